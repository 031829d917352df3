import json
import math

import numpy as np
import pytest

import rrm


def test_sphere_exp_log_roundtrip():
    s = rrm.Manifold.sphere(2)
    p = np.array([0.0, 0.0, 1.0])
    v = np.array([0.3, -0.2, 0.0])
    q = s.exp(p, v)
    assert abs(np.linalg.norm(q) - 1.0) < 1e-12
    assert np.allclose(s.log(p, q), v, atol=1e-12)
    assert s.dist(p, q) == pytest.approx(math.hypot(0.3, 0.2), abs=1e-12)


def test_hyperbolic_is_hadamard():
    h = rrm.Manifold.hyperbolic(2)
    assert h.is_hadamard
    assert math.isinf(h.injectivity_radius)
    assert repr(h) == "Manifold(H^2)"


def test_comparison_function_spot_values():
    assert rrm.comparison_f(-1.0, 1.0) == pytest.approx(math.sinh(1.0) - 1.0, abs=1e-12)
    assert rrm.comparison_f(1.0, 1.0) == pytest.approx(1.0 - math.sin(1.0), abs=1e-12)


def test_schedules():
    w = rrm.StepSchedule.window(1, 1, 0.5)
    assert w.gamma(100) == pytest.approx(1.0 / (10.0 * math.log(100.0)), rel=1e-14)
    assert w.rm_valid()
    assert not rrm.StepSchedule.power_law(1, 0.4).rm_valid()


def test_ramp_bounds():
    for i in range(101):
        x = 4.0 * i / 100
        assert -1e-6 <= rrm.ramp_prime(1.0, x) <= 1 + 1e-6
        assert rrm.ramp(1.0, x) >= x - 2.0


def test_registry_and_templates():
    names = [s["name"] for s in rrm.list_scenarios()]
    assert len(names) >= 5
    for name in names:
        rrm.validate(rrm.scenario_template(name))


def test_validate_reports_the_path():
    cfg = {"scenario": "rayleigh-sphere", "oracle": {"sigma": -1}}
    with pytest.raises(rrm.ConfigError, match=r"\$\.oracle\.sigma"):
        rrm.validate(cfg)


def test_run_and_outputs(tmp_path):
    cfg = {"scenario": "rayleigh-sphere", "iterations": 300, "replications": 2, "seed": 4}
    res = rrm.run(cfg, out_dir=tmp_path)
    assert res["scenario"] == "rayleigh-sphere"
    assert len(res["replications"]) == 2
    states = res["replications"][0]["states"]
    assert states.shape == (300, 3)
    assert np.allclose(np.linalg.norm(states, axis=1), 1.0, atol=1e-10)
    assert (tmp_path / "verdicts.csv").read_text().startswith("replication,scenario,metric")
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["replications"] == 2
    again = rrm.run(cfg)
    assert np.array_equal(again["replications"][1]["states"], res["replications"][1]["states"])
