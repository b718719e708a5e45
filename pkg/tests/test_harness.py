import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reifflow import harness
from reifflow.errors import DomainError, EmptyResultError, NotAGraphError, ResolutionError
from reifflow.fractal_gen import circle_curve
from reifflow.geom_core import Curve
from reifflow.harness import ExperimentConfig, Report, emit_report, graph_representation, power_fit
from reifflow.mollifier import offset_curve

CIRCLE = {
    "shape": {"type": "circle", "radius": 1.0, "vertices": 1024},
    "scales": [0.2, 0.1, 0.05],
    "grid": {"h": 1 / 128, "pad": 0.1},
    "time": {"T": 0.18, "snapshots": [0.1, 0.18]},
}


@pytest.fixture(scope="module")
def circle_cfg(tmp_path_factory):
    return ExperimentConfig.from_dict(dict(CIRCLE, out_dir=str(tmp_path_factory.mktemp("circle"))))


@pytest.fixture(scope="module")
def circle_runs(circle_cfg):
    return harness.evolve_scales(circle_cfg)


# ---------------------------------------------------------------------------
# power_fit


def test_power_fit_exact_power():
    x = np.array([0.5, 1.0, 2.0, 4.0])
    f = power_fit(x, 3 * x**2)
    assert f.exponent == pytest.approx(2.0, abs=1e-9)
    assert f.prefactor == pytest.approx(3.0, abs=1e-9)
    assert f.residual == pytest.approx(0.0, abs=1e-9)


def test_power_fit_constant():
    assert power_fit([1, 2, 4, 8], [5, 5, 5, 5]).exponent == pytest.approx(0.0, abs=1e-12)


def test_power_fit_noisy_square_root():
    rng = np.random.default_rng(0)
    x = np.geomspace(0.01, 1, 12)
    y = np.sqrt(x) * (1 + 0.01 * rng.standard_normal(len(x)))
    f = power_fit(x, y)
    assert 0.45 <= f.exponent <= 0.55
    assert f.residual >= 0


@given(
    exponent=st.floats(-3, 3),
    scale=st.floats(1e-3, 1e3),
    noise=st.lists(st.floats(-0.1, 0.1), min_size=5, max_size=5),
)
def test_power_fit_units_invariance(exponent, scale, noise):
    x = np.array([0.1, 0.2, 0.4, 0.8, 1.6])
    y = x**exponent * np.exp(noise)
    a = power_fit(x, y)
    b = power_fit(scale * x, y)
    assert b.exponent == pytest.approx(a.exponent, abs=1e-9)


@pytest.mark.parametrize("xs,ys", [([1, 2], [1, 2]), ([1, 2, 3], [1, 0, 2]), ([1, -2, 3], [1, 2, 3])])
def test_power_fit_rejects_bad_input(xs, ys):
    with pytest.raises(DomainError):
        power_fit(xs, ys)


# ---------------------------------------------------------------------------
# configuration


def test_defaults_are_valid():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.scales == sorted(cfg.scales, reverse=True)
    assert all(r >= 6 * cfg.h for r in cfg.scales)
    assert cfg.snapshots[-1] == cfg.T
    assert cfg.dt == pytest.approx(0.2 * cfg.h**2)


def test_snapshots_end_at_T():
    cfg = ExperimentConfig.from_dict({"time": {"T": 0.1, "snapshots": [0.05]}})
    assert cfg.snapshots == [0.05, 0.1]


@pytest.mark.parametrize(
    "data,field",
    [
        ({"scales": [0.01, 0.02]}, "scales"),
        ({"grid": {"h": -1}}, "grid.h"),
        ({"shape": {"type": "square"}}, "shape.type"),
        ({"shape": {"beta": 2.0}}, "shape.beta"),
        ({"time": {"T": 0.01, "snapshots": [0.02]}}, "time.snapshots"),
        ({"grid": {"h": "fine"}}, "grid.h"),
        ({"nonsense": 1}, "nonsense"),
        ({"grid": {"spacing": 1}}, "grid.spacing"),
    ],
)
def test_invalid_values_name_the_field(data, field):
    with pytest.raises(DomainError, match=field.replace(".", r"\.")):
        ExperimentConfig.from_dict(data)


def test_dt_stability_message():
    with pytest.raises(DomainError, match=r"stability bound dt <= 0\.25 h\^2"):
        ExperimentConfig.from_dict({"grid": {"h": 0.01}, "time": {"dt": 1e-4}})


def test_overrides_parse_json_and_strings():
    cfg = ExperimentConfig.from_dict({}).with_overrides(
        ["grid.h=0.002", "scales=[0.04,0.02,0.01]", "shape.type=circle", "time.dt=null"]
    )
    assert cfg.h == 0.002
    assert cfg.scales == [0.04, 0.02, 0.01]
    assert cfg.shape["type"] == "circle"
    assert cfg.data["time"]["dt"] is None


@pytest.mark.parametrize("item", ["grid.h", "grid.width=3", "shape.beta.x=1"])
def test_bad_overrides(item):
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict({}).with_overrides([item])


def test_every_key_can_be_overridden():
    base = ExperimentConfig.from_dict({})

    def leaves(d, prefix=""):
        for k, v in d.items():
            if isinstance(v, dict):
                yield from leaves(v, f"{prefix}{k}.")
            else:
                yield f"{prefix}{k}", v

    for key, value in leaves(base.to_dict()):
        cfg = base.with_overrides([f"{key}={json.dumps(value)}"])
        assert cfg.to_dict() == base.to_dict()


def test_load_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(CIRCLE)
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    again = ExperimentConfig.load(path)
    assert again == cfg
    assert ExperimentConfig.load(path, ["seed=3"]).seed == 3


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        ExperimentConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(DomainError):
        ExperimentConfig.load(bad)


def test_require_resolved():
    cfg = ExperimentConfig.from_dict({"grid": {"h": 0.01}, "scales": [0.1, 0.05]})
    cfg.require_resolved(0.06, "r")
    with pytest.raises(ResolutionError):
        cfg.require_resolved(0.05, "r")
    with pytest.raises(ResolutionError):
        harness.evolve_scales(cfg)


def test_build_scale_grid():
    assert harness.build_scale_grid(0.08, 1 / 600) == pytest.approx(0.005)
    assert harness.build_scale_grid(0.01, 1 / 600) == pytest.approx(1 / 800)
    assert harness.build_scale_grid(0.02, 1 / 600) == pytest.approx(1 / 600)


# ---------------------------------------------------------------------------
# graph representation


@pytest.fixture(scope="module")
def ring():
    return circle_curve(1.0, 512)


def test_graph_of_itself_is_zero(ring):
    g = graph_representation(ring, ring)
    assert len(g) == len(ring)
    assert max(abs(u) for _, u in g) < 1e-12
    s = [s for s, _ in g]
    assert s[0] == 0 and np.all(np.diff(s) > 0)


def test_graph_of_offset(ring):
    z = offset_curve(ring, 0.1)
    h = 1 / 256
    assert all(abs(u - 0.1) < 2 * h for _, u in graph_representation(ring, z))
    z_in = offset_curve(ring, -0.1)
    assert all(abs(u + 0.1) < 2 * h for _, u in graph_representation(ring, z_in))


def test_graph_of_rotated_circle(ring):
    c = ring.centroid()
    rot = 2 * c - ring.vertices
    g = graph_representation(ring, Curve(rot))
    assert max(abs(u) for _, u in g) < 1e-9


def test_graph_outside_tube(ring):
    with pytest.raises(DomainError):
        graph_representation(ring, circle_curve(1.6, 512))


def test_graph_fold_is_not_a_graph(ring):
    s = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
    th = s + 0.04 * np.sin(40 * s)
    r = 1.1 + 0.02 * np.cos(40 * s)
    z = Curve(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    with pytest.raises(NotAGraphError):
        graph_representation(ring, z)


# ---------------------------------------------------------------------------
# reports


def _report(name="demo"):
    fit = power_fit([1, 2, 4], [1, 4, 16])
    return Report(name, ["x", "y", "ok"], [(1, 1.0, True), (2, 4.0, False)],
                  [("y", [1, 2, 4], [1, 4, 16], fit)], "x", "y")


def test_report_csv_format():
    text = Report("r", ["a", "b", "c"], [(1, 1 / 3, True)]).to_csv()
    assert text == "a,b,c\n1,0.333333333,true\n"


def test_emit_report_empty(tmp_path):
    out = tmp_path / "empty"
    with pytest.raises(EmptyResultError):
        emit_report([Report("nothing", ["a"], [])], out)
    assert not out.exists() or not any(out.iterdir())


def test_emit_report_one_run(tmp_path):
    files = emit_report([_report()], tmp_path)
    assert sorted(p.name for p in files) == ["demo.csv", "demo.svg"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["demo.csv", "demo.svg"]
    assert all(p.stat().st_size > 0 for p in files)
    assert (tmp_path / "demo.svg").read_text().lstrip().startswith(("<?xml", "<svg"))


def test_emit_report_is_deterministic(tmp_path):
    a = emit_report([_report()], tmp_path / "a")
    b = emit_report([_report()], tmp_path / "b")
    for p, q in zip(a, b):
        assert p.read_bytes() == q.read_bytes()


# ---------------------------------------------------------------------------
# experiments on small circle configs


def test_uniform_circle_closed_form(circle_cfg, circle_runs):
    rep = harness.run_uniform_estimates(circle_cfg, circle_runs)
    assert not rep.errors
    exact = math.sqrt(0.18) / math.sqrt(1 - 0.36)
    at_end = [row for row in rep.rows if row[1] == pytest.approx(0.18)]
    assert len(at_end) == 3
    for row in at_end:
        assert row[3] == pytest.approx(exact, rel=0.15)
        assert row[6] == 1.0


def test_uniform_only_after_burn_in(circle_cfg, circle_runs):
    rep = harness.run_uniform_estimates(circle_cfg, circle_runs)
    for r, t, *_ in rep.rows:
        assert t >= circle_cfg.c3 * r * r
    # t = 0.1 is before 4 r^2 = 0.16 for the largest scale
    assert not [row for row in rep.rows if row[0] == 0.2 and row[1] == pytest.approx(0.1)]


def test_separation_self_pair_is_zero(circle_cfg, circle_runs):
    cfg = circle_cfg.with_overrides(["scales=[0.1,0.1,0.1]"])
    rep = harness.run_separation(cfg, {0.1: circle_runs[0.1]})
    assert rep.rows
    assert all(row[3] == 0.0 for row in rep.rows)


def test_separation_needs_three_scales(circle_cfg):
    with pytest.raises(DomainError):
        harness.run_separation(circle_cfg.with_overrides(["scales=[0.2,0.1]"]), {})


def test_reports_are_deterministic(circle_cfg, circle_runs):
    a = harness.run_uniform_estimates(circle_cfg, circle_runs).to_csv()
    b = harness.run_uniform_estimates(circle_cfg, circle_runs).to_csv()
    assert a == b
    r1, _ = harness.run_approximation(circle_cfg)
    r2, _ = harness.run_approximation(circle_cfg)
    assert r1.to_csv() == r2.to_csv()


def test_failed_scale_is_recorded(circle_cfg):
    # r = 0.6 is above diameter / 4, so approximate() refuses it
    cfg = circle_cfg.with_overrides(["scales=[0.6,0.2,0.1]"])
    rep, curves = harness.run_approximation(cfg)
    assert 0.6 in rep.errors and sorted(curves) == [0.1, 0.2]
    assert len(rep.rows) == 2


def test_decomposition_fraction():
    c = circle_curve(1.0, 512)
    centers = c.vertices[::64]
    assert harness.decomposition_fraction([c], 0.2, centers) == 1.0
    far = Curve(c.vertices * 0.1 + np.array([5.0, 0.0]))
    assert harness.decomposition_fraction([c, far], 0.2, centers) == 1.0
    # a ball of radius 1.5 about the center of two concentric circles meets two arcs
    inner = Curve(c.vertices * 0.5)
    assert harness.decomposition_fraction([c, inner], 1.5, np.zeros((1, 2))) == 0.0


@pytest.fixture(scope="module")
def circle_nonfatten(tmp_path_factory):
    cfg = ExperimentConfig.from_dict({
        "shape": {"type": "circle", "radius": 1.0, "vertices": 1024},
        "scales": [0.02],
        "grid": {"h": 1 / 128, "pad": 0.1},
        "time": {"T": 0.05, "snapshots": [0.005, 0.01, 0.02, 0.03, 0.04, 0.05]},
    })
    return harness.run_nonfattening(cfg)


def test_nonfatten_circle_closed_form(circle_nonfatten):
    rep = circle_nonfatten
    assert not rep.errors and rep.summary["containment_ok"]
    d = 10 * math.sin(math.pi / 4) * 0.02
    for _, t, gap, _ in rep.rows:
        exact = math.sqrt((1 + d) ** 2 - 2 * t) - math.sqrt((1 - d) ** 2 - 2 * t)
        assert gap == pytest.approx(exact, rel=0.25)


def test_nonfatten_circle_gap_near_monotone(circle_nonfatten):
    assert circle_nonfatten.summary["max_relative_growth"][0.02] <= 0.10


@pytest.mark.xfail(reason="Koch barrier gaps grow 14-19% over the run; see the decisions ledger", strict=False)
def test_nonfatten_koch_gap_near_monotone(nonfatten_report):
    growth = nonfatten_report.summary["max_relative_growth"]
    assert growth and all(g <= 0.10 for g in growth.values())


def test_nonfatten_resolution_rule():
    cfg = ExperimentConfig.from_dict({"scales": [0.02, 0.01, 0.002], "grid": {"h": 0.0025}})
    with pytest.raises(ResolutionError):
        harness.run_nonfattening(cfg)


def test_kernel_constant_report():
    cfg = ExperimentConfig.from_dict({"graph": {"taus": [0.01, 0.02], "h": 0.001}})
    rep = harness.run_kernel_constant(cfg)
    assert rep.summary["all_passed"]
    assert [row[0] for row in rep.rows] == [0.01, 0.02]
    for row in rep.rows:
        assert row[5] == pytest.approx(1.0, abs=0.02)


def test_ecker_huisken_runs_are_seeded():
    a, ca = harness.ecker_huisken_runs(2, seed=1)
    b, cb = harness.ecker_huisken_runs(2, seed=1)
    assert [c.lhs for c in a] == [c.lhs for c in b]
    assert all(c.passed for c in a) and not any(c.passed for c in ca)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("REIFFLOW_THREADS", "3")
    assert harness._threads() == 3
    monkeypatch.setenv("REIFFLOW_THREADS", "many")
    with pytest.raises(DomainError):
        harness._threads()
