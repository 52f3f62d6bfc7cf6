#include "aimdmf/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "aimdmf/error.hpp"
#include "aimdmf/init_law.hpp"
#include "aimdmf/mckean.hpp"

namespace aimdmf {

namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream is(text);
    std::vector<std::string> out;
    for (std::string w; is >> w;) {
        // commas are accepted as separators in lists
        std::size_t start = 0;
        for (std::size_t i = 0; i <= w.size(); ++i) {
            if (i == w.size() || w[i] == ',') {
                if (i > start) out.push_back(w.substr(start, i - start));
                start = i + 1;
            }
        }
    }
    return out;
}

double to_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) throw ConfigError(fmt::format("{}: '{}' is not a number", where, s));
    return v;
}

std::size_t to_count(const std::string& s, const std::string& where) {
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) {
        throw ConfigError(fmt::format("{}: '{}' is not a nonnegative integer", where, s));
    }
    return v;
}

bool to_bool(const std::string& s, const std::string& where) {
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", where, s));
}

std::vector<double> to_doubles(const std::string& s, const std::string& where) {
    std::vector<double> out;
    for (const auto& w : split_words(s)) out.push_back(to_double(w, where));
    return out;
}

std::vector<std::size_t> to_counts(const std::string& s, const std::string& where) {
    std::vector<std::size_t> out;
    for (const auto& w : split_words(s)) out.push_back(to_count(w, where));
    return out;
}

pt::ptree read_tree(const std::string& text) {
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("malformed config (line {}): {}", e.line(), e.message()));
    }
    return tree;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Node index from a key suffix like "3" (1-based in the file).
std::size_t node_suffix(const std::string& suffix, std::size_t nodes, const std::string& where) {
    const std::size_t j = to_count(suffix, where);
    if (j < 1 || j > nodes) throw ConfigError(fmt::format("{}: node {} out of range 1..{}", where, j, nodes));
    return j - 1;
}

ClassSpec parse_class(const pt::ptree& sec, const std::string& name, std::size_t nodes) {
    std::optional<double> r, p, a, tau, delta;
    std::string drift_kind = "constant", loss_form;
    std::vector<ScalarRate> delays(nodes), dloss(nodes);
    std::optional<ScalarRate> g, in_w;
    bool monotone = false;
    for (const auto& [key, node] : sec) {
        const std::string v = node.data();
        const std::string where = fmt::format("[{}] {}", name, key);
        if (key == "r") {
            r = to_double(v, where);
        } else if (key == "p") {
            p = to_double(v, where);
        } else if (key == "drift.kind") {
            drift_kind = v;
            if (v != "constant" && v != "reciprocal") {
                throw ConfigError(fmt::format("{}: expected constant or reciprocal", where));
            }
        } else if (key == "drift.a") {
            a = to_double(v, where);
        } else if (key == "drift.tau") {
            tau = to_double(v, where);
        } else if (key.rfind("drift.t.", 0) == 0) {
            delays[node_suffix(key.substr(8), nodes, where)] = parse_rate(v);
        } else if (key == "loss.form") {
            loss_form = v;
        } else if (key == "loss.delta") {
            delta = to_double(v, where);
        } else if (key.rfind("loss.d.", 0) == 0) {
            dloss[node_suffix(key.substr(7), nodes, where)] = parse_rate(v);
        } else if (key == "loss.g") {
            g = parse_rate(v);
        } else if (key == "loss.w") {
            in_w = parse_rate(v);
        } else if (key == "loss.monotone") {
            monotone = to_bool(v, where);
        } else {
            throw ConfigError(fmt::format("[{}]: unknown key '{}'", name, key));
        }
    }
    if (!r) throw ConfigError(fmt::format("[{}]: missing r", name));
    if (!p) throw ConfigError(fmt::format("[{}]: missing p", name));

    ClassSpec c;
    c.r = *r;
    c.p = *p;
    if (drift_kind == "constant") {
        if (!a) throw ConfigError(fmt::format("[{}]: constant drift needs drift.a", name));
        if (tau) throw ConfigError(fmt::format("[{}]: drift.tau belongs to the reciprocal drift", name));
        c.drift = DriftSpec::constant(*a);
    } else {
        if (!tau) throw ConfigError(fmt::format("[{}]: reciprocal drift needs drift.tau", name));
        if (a) throw ConfigError(fmt::format("[{}]: drift.a belongs to the constant drift", name));
        c.drift = DriftSpec::reciprocal(*tau, delays);
    }

    const bool any_d = std::any_of(dloss.begin(), dloss.end(), [](const ScalarRate& x) { return !x.is_zero(); });
    if (loss_form == "aggregate") {
        if (!g) throw ConfigError(fmt::format("[{}]: aggregate loss needs loss.g", name));
        if (delta || any_d || in_w) {
            throw ConfigError(fmt::format("[{}]: aggregate loss takes only loss.g", name));
        }
        c.loss = LossSpec::aggregate_of(*g);
    } else if (loss_form == "per_node") {
        if (g || in_w) throw ConfigError(fmt::format("[{}]: per_node loss takes loss.delta and loss.d.<j>", name));
        c.loss = LossSpec::per_node(delta.value_or(0.0), dloss);
    } else if (loss_form == "general") {
        if (!in_w) throw ConfigError(fmt::format("[{}]: general loss needs loss.w", name));
        if (g) throw ConfigError(fmt::format("[{}]: loss.g belongs to the aggregate loss", name));
        c.loss = LossSpec::general(*in_w, delta.value_or(0.0), dloss, monotone);
    } else if (loss_form.empty()) {
        throw ConfigError(fmt::format("[{}]: missing loss.form", name));
    } else {
        throw ConfigError(fmt::format("[{}]: loss.form '{}' is not aggregate, per_node or general", name, loss_form));
    }
    return c;
}

}  // namespace

ScalarRate parse_rate(const std::string& text) {
    const auto w = split_words(text);
    const std::string where = fmt::format("rate '{}'", text);
    if (w.empty()) throw ConfigError("empty rate specification");
    const auto arg = [&](std::size_t i) { return to_double(w[i], where); };
    if (w[0] == "constant" && w.size() == 2) return ScalarRate::constant(arg(1));
    if (w[0] == "affine" && w.size() == 3) return ScalarRate::affine(arg(1), arg(2));
    if (w[0] == "power" && w.size() == 4) return ScalarRate::power(arg(1), arg(2), arg(3));
    throw ConfigError(fmt::format("{}: expected 'constant c0', 'affine c0 c1' or 'power c0 c1 p'", where));
}

NetworkModel parse_model(const std::string& text) {
    const pt::ptree tree = read_tree(text);
    const auto net = tree.get_child_optional("network");
    if (!net) throw ConfigError("missing [network] section");

    std::optional<std::size_t> nodes, classes;
    std::vector<double> allocation;
    std::optional<std::vector<std::size_t>> counts;
    for (const auto& [key, node] : *net) {
        const std::string where = "[network] " + key;
        if (key == "nodes") {
            nodes = to_count(node.data(), where);
        } else if (key == "classes") {
            classes = to_count(node.data(), where);
        } else if (key == "allocation") {
            allocation = to_doubles(node.data(), where);
        } else if (key == "counts") {
            counts = to_counts(node.data(), where);
        } else {
            throw ConfigError(fmt::format("[network]: unknown key '{}'", key));
        }
    }
    if (!nodes || *nodes < 1) throw ConfigError("[network]: nodes must be >= 1");
    if (!classes || *classes < 1) throw ConfigError("[network]: classes must be >= 1");

    std::map<std::size_t, ClassSpec> specs;
    for (const auto& [name, sec] : tree) {
        if (name == "network") continue;
        if (name.rfind("class.", 0) != 0) throw ConfigError(fmt::format("unknown section [{}]", name));
        const std::size_t k = to_count(name.substr(6), "[" + name + "]");
        if (k < 1 || k > *classes) {
            throw ConfigError(fmt::format("[{}]: class index out of range 1..{}", name, *classes));
        }
        if (specs.count(k)) throw ConfigError(fmt::format("duplicate section [{}]", name));
        specs.emplace(k, parse_class(sec, name, *nodes));
    }
    if (specs.size() != *classes) {
        throw ConfigError(fmt::format("expected {} [class.k] sections, found {}", *classes, specs.size()));
    }
    std::vector<ClassSpec> list;
    for (auto& [k, c] : specs) list.push_back(std::move(c));
    return NetworkModel(*nodes, *classes, std::move(allocation), std::move(list), std::move(counts));
}

NetworkModel load_model(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return parse_model(text);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

// ---------------------------------------------------------------------------

ExperimentKind parse_experiment_kind(const std::string& name) {
    static const std::map<std::string, ExperimentKind> kinds{
        {"chaos", ExperimentKind::chaos},           {"equilibrium", ExperimentKind::equilibrium},
        {"scaling", ExperimentKind::scaling},       {"fixedpoint", ExperimentKind::fixedpoint},
        {"mckean", ExperimentKind::mckean},         {"dynkin", ExperimentKind::dynkin}};
    const auto it = kinds.find(name);
    if (it == kinds.end()) {
        throw ConfigError(fmt::format(
            "unknown experiment '{}' (chaos, equilibrium, scaling, fixedpoint, mckean, dynkin)", name));
    }
    return it->second;
}

const char* to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::chaos:
            return "chaos";
        case ExperimentKind::equilibrium:
            return "equilibrium";
        case ExperimentKind::scaling:
            return "scaling";
        case ExperimentKind::fixedpoint:
            return "fixedpoint";
        case ExperimentKind::mckean:
            return "mckean";
        case ExperimentKind::dynkin:
            return "dynkin";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    const auto positive = [](double x, const char* what) {
        if (!(x > 0.0)) throw ConfigError(fmt::format("{} must be > 0", what));
    };
    positive(horizon, "horizon");
    positive(step, "step");
    positive(sample_dt, "sample_dt");
    positive(picard_tol, "picard_tol");
    positive(fixed_point_tol, "fixed_point_tol");
    positive(thin, "thin");
    if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must be in (0, 1]");
    if (!(burn_in >= 0.0)) throw ConfigError("burn_in must be >= 0");
    if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("factor must be in (0, 1)");
    if (ensemble < 100) throw ConfigError("ensemble must be >= 100");
    if (reference_ensemble < 100) throw ConfigError("reference_ensemble must be >= 100");
    if (max_iter < 2) throw ConfigError("max_iter must be >= 2");
    if (replicates < 2) throw ConfigError("replicates must be >= 2");
    if (samples < 1) throw ConfigError("samples must be >= 1");
    if (particles < 1) throw ConfigError("particles must be >= 1");
    if (populations.empty()) throw ConfigError("populations must not be empty");
    for (std::size_t i = 0; i < populations.size(); ++i) {
        if (populations[i] < 2) throw ConfigError("populations must be >= 2");
        if (i > 0 && populations[i] <= populations[i - 1]) {
            throw ConfigError("populations must be strictly increasing");
        }
    }
    if (kind == ExperimentKind::chaos) {
        for (double t : check_times) {
            if (!(t >= 0.0 && t <= horizon)) throw ConfigError("check_times must lie in [0, horizon]");
        }
    }
    for (double t : dynkin_times) {
        if (!(t > 0.0 && t <= horizon)) throw ConfigError("dynkin_times must lie in (0, horizon]");
    }
    for (double e : eps) {
        if (!(e >= 0.0 && e < 1.0)) throw ConfigError("eps values must lie in [0, 1)");
    }
    for (const auto& f : functions) parse_test_function(f);
    if (init != "stationary") InitLaw::parse(init);
    for (const auto& s : class_init) {
        if (!s.empty() && s != "stationary") InitLaw::parse(s);
    }
    if (kind != ExperimentKind::scaling && !model) throw ConfigError("experiment needs a model file");
    if (model && !class_init.empty() && class_init.size() != model->classes()) {
        throw ConfigError("class_init override has the wrong number of classes");
    }
}

ExperimentConfig parse_experiment(const std::string& text, const std::filesystem::path& base_dir) {
    const pt::ptree tree = read_tree(text);
    ExperimentConfig cfg;
    cfg.source = text;
    bool have_kind = false;
    std::optional<std::filesystem::path> model_file;
    std::map<std::size_t, std::string> class_init;
    for (const auto& [name, sec] : tree) {
        if (name != "experiment") throw ConfigError(fmt::format("unknown section [{}]", name));
        for (const auto& [key, node] : sec) {
            const std::string v = node.data();
            const std::string where = "[experiment] " + key;
            if (key == "kind") {
                cfg.kind = parse_experiment_kind(v);
                have_kind = true;
            } else if (key == "model") {
                model_file = base_dir / v;
            } else if (key == "horizon") {
                cfg.horizon = to_double(v, where);
            } else if (key == "step") {
                cfg.step = to_double(v, where);
            } else if (key == "sample_dt") {
                cfg.sample_dt = to_double(v, where);
            } else if (key == "ensemble") {
                cfg.ensemble = to_count(v, where);
            } else if (key == "reference_ensemble") {
                cfg.reference_ensemble = to_count(v, where);
            } else if (key == "picard_tol") {
                cfg.picard_tol = to_double(v, where);
            } else if (key == "max_iter") {
                cfg.max_iter = to_count(v, where);
            } else if (key == "init") {
                cfg.init = v;
            } else if (key.rfind("init.", 0) == 0) {
                class_init[to_count(key.substr(5), where)] = v;
            } else if (key == "populations") {
                cfg.populations = to_counts(v, where);
            } else if (key == "replicates") {
                cfg.replicates = to_count(v, where);
            } else if (key == "particles") {
                cfg.particles = to_count(v, where);
            } else if (key == "check_times") {
                cfg.check_times = to_doubles(v, where);
            } else if (key == "eps") {
                cfg.eps = to_doubles(v, where);
            } else if (key == "factor") {
                cfg.factor = to_double(v, where);
            } else if (key == "samples") {
                cfg.samples = to_count(v, where);
            } else if (key == "burn_in") {
                cfg.burn_in = to_double(v, where);
            } else if (key == "thin") {
                cfg.thin = to_double(v, where);
            } else if (key == "damping") {
                cfg.damping = to_double(v, where);
            } else if (key == "fixed_point_tol") {
                cfg.fixed_point_tol = to_double(v, where);
            } else if (key == "multistart") {
                cfg.multistart = to_count(v, where);
            } else if (key == "functions") {
                cfg.functions = split_words(v);
            } else if (key == "dynkin_times") {
                cfg.dynkin_times = to_doubles(v, where);
            } else {
                throw ConfigError(fmt::format("[experiment]: unknown key '{}'", key));
            }
        }
    }
    if (!have_kind) throw ConfigError("[experiment]: missing kind");
    if (model_file) {
        cfg.model_path = *model_file;
        cfg.model_source = read_file(*model_file);
        try {
            cfg.model = parse_model(cfg.model_source);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}: {}", model_file->string(), e.what()));
        }
    }
    if (!class_init.empty()) {
        const std::size_t K = cfg.model ? cfg.model->classes() : 0;
        cfg.class_init.assign(K, "");
        for (const auto& [k, s] : class_init) {
            if (k < 1 || k > K) throw ConfigError(fmt::format("[experiment] init.{}: no such class", k));
            cfg.class_init[k - 1] = s;
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return parse_experiment(text, path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

}  // namespace aimdmf
