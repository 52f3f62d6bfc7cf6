import math
from pathlib import Path

import pytest

import aimdmf

ROOT = Path(__file__).resolve().parents[2]
MODELS = ROOT / "configs" / "models"
EXPERIMENTS = ROOT / "configs" / "experiments"


def test_psi_values():
    assert aimdmf.psi(0.0) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    assert abs(aimdmf.psi(0.5) - 1.30983327465802066437) < 1e-10
    with pytest.raises(aimdmf.ParameterError):
        aimdmf.psi(1.0)


def test_stationary_distribution():
    d = aimdmf.StationaryDistribution(0.5, 2.0)
    assert d.mean() == pytest.approx(math.sqrt(2.0) * aimdmf.psi(0.5))
    assert d.cdf(0.0) == 0.0
    assert d.cdf(d.cutoff) == pytest.approx(1.0, abs=1e-9)
    xs = d.sample(20000, seed=3)
    assert sum(xs) / len(xs) == pytest.approx(d.mean(), rel=0.02)
    assert aimdmf.stationary_density(0.5, 2.0, 1.0) == pytest.approx(
        aimdmf.stationary_density(0.5, 1.0, 1.0 / math.sqrt(2.0)) / math.sqrt(2.0), rel=1e-12
    )


def test_next_jump_time():
    assert aimdmf.next_jump_time(0.0, 2.0, 1.0, 1.0) == pytest.approx(1.0)
    assert math.isinf(aimdmf.next_jump_time(0.0, 0.0, 1.0, 1.0))


def test_canonical_fixed_point():
    model = aimdmf.load_model(str(MODELS / "single_node.cfg"))
    assert (model.nodes, model.classes) == (1, 2)
    law = aimdmf.solve_single_node(model)
    assert abs(law.u[0] - 1.64581920629) < 1e-10
    general = aimdmf.solve_fixed_point(model, multistart=4)
    assert len(general) == 1
    assert abs(general[0].u[0] - law.u[0]) < 1e-7


def test_symmetric_torus():
    law = aimdmf.solve_torus(aimdmf.load_model(str(MODELS / "torus_symmetric.cfg")))
    assert all(abs(u - 1.0) < 1e-10 for u in law.u)


def test_invalid_model_is_rejected():
    with pytest.raises(aimdmf.ConfigError):
        aimdmf.load_model(str(MODELS / "invalid_decreasing.cfg"))


def test_simulators():
    path = aimdmf.simulate_connection(1.0, 1.0, 1.0, 0.5, 50.0, seed=2)
    assert len(path["jump_times"]) > 10
    chain = aimdmf.sample_discrete_aimd(0.0, 0.5, 0, 4, 3, 3)
    assert chain == [7, 10, 13]


def test_mckean_uncoupled_converges_in_two_iterations():
    text = (MODELS / "uncoupled.cfg").read_text()
    model = aimdmf.parse_model(text)
    sol = aimdmf.solve_mckean(model, ["uniform 0 2"] * model.classes, horizon=1.0, ensemble=200)
    assert sol["converged"]
    assert sol["iterations"] == 2


def test_run_fixedpoint_experiment(tmp_path):
    result = aimdmf.run_experiment(str(EXPERIMENTS / "fixedpoint_single_node.cfg"), str(tmp_path), seed=1)
    assert result["status"] == "pass"
    assert result["exit_code"] == 0
    assert (tmp_path / "fixedpoint.csv").exists()
    assert (tmp_path / "manifest.txt").exists()
