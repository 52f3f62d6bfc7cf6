#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace aimdmf {

enum class Status { pass, inconclusive, fail };

const char* to_string(Status s);
/// Worst of the two: fail > inconclusive > pass.
Status combine(Status a, Status b);

struct Criterion {
    std::string name;
    Status status = Status::pass;
    std::string detail;
};

/// Criterion whose pass rests on a Monte Carlo estimate: when the standard
/// error is wider than the tolerance band, no verdict is claimed.
Criterion mc_criterion(std::string name, bool holds, double se, double band, std::string detail);

/// Markdown table; every row must have as many cells as the header.
std::string markdown_table(const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Self-contained SVG line chart.
std::string svg_line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<Series>& series);

/// Writes text to dir/name, replacing any existing file; throws Error on failure.
void write_text(const std::filesystem::path& dir, const std::string& name, const std::string& text);

/// Throws ConfigError unless dir exists (or can be created) and accepts a file.
void ensure_writable(const std::filesystem::path& dir);

}  // namespace aimdmf
