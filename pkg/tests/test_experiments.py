import math

import numpy as np
import pytest

from pbcover import cover as cv
from pbcover import experiments as ex
from pbcover.partition import PartitionFamily, canonical_partition
from pbcover.pbnorm import pb_of_partition
from pbcover.surface import make_surface


@pytest.fixture(scope="module")
def torus():
    return make_surface("torus", 1.0, (48, 48))


@pytest.fixture(scope="module")
def sphere():
    return make_surface("sphere", 4 * math.pi, (128, 64))


def table(vals, caps=None):
    caps = caps or [0.1 * (i + 1) for i in range(len(vals))]
    return list(zip(caps, vals))


def test_monotonicity_constant_and_decreasing():
    assert ex.monotonicity_report(table([5.0] * 6)) == []
    assert ex.monotonicity_report(table([9.0, 7.0, 4.0, 1.0])) == []
    assert ex.monotonicity_report(table([])) == []


def test_monotonicity_injected_bump():
    vals = [9.0, 7.0, 4.0, 1.0]
    vals[2] = vals[1] * 1.10
    out = ex.monotonicity_report(table(vals))
    assert len(out) == 1 and out[0]["index"] == 2
    # inside the tolerance nothing is flagged
    vals[2] = vals[1] * 1.04
    assert ex.monotonicity_report(table(vals)) == []


def test_lattice_k():
    # minimal k x k lattice per capacity on the unit torus
    assert [ex.lattice_k(c) for c in (0.15, 0.2, 0.3, 0.45)] == [4, 3, 3, 2]
    with pytest.raises(ex.ExperimentError):
        ex.lattice_k(0.001, k_max=4)


def test_minimize_never_worse_than_canonical(torus):
    cov = ex.three_disk_torus(grid=(48, 48))
    cfg = ex.OptimizerConfig(restarts=2, max_evals=40, seed=1)
    res = ex.minimize_pb(cov, config=cfg)
    assert res.value <= res.canonical_value
    assert res.canonical_value == pytest.approx(pb_of_partition(canonical_partition(cov)).value, rel=1e-12)
    # the reported optimum is what an independent evaluation of theta gives
    fam = PartitionFamily(cov, cfg.profile, cfg.vary)
    assert pb_of_partition(fam.partition(res.theta)).value == pytest.approx(res.value, rel=1e-12)


def test_minimize_beats_random_search_median(torus):
    # oracle: plain random search over the same box with the same budget
    cov = ex.three_disk_torus(grid=(48, 48))
    cfg = ex.OptimizerConfig(restarts=2, max_evals=40, seed=2)
    res = ex.minimize_pb(cov, config=cfg)
    fam = PartitionFamily(cov, cfg.profile, cfg.vary)
    rng = np.random.default_rng(0)
    vals = []
    for _ in range(res.evaluations):
        try:
            vals.append(pb_of_partition(fam.partition(fam.from_unit(rng.random(fam.dim)))).value)
        except Exception:
            vals.append(math.inf)
    assert res.value <= np.median(vals)


def test_minimize_deterministic(torus):
    cov = ex.three_disk_torus(grid=(48, 48))
    cfg = ex.OptimizerConfig(restarts=2, max_evals=25, seed=5)
    a, b = ex.minimize_pb(cov, config=cfg), ex.minimize_pb(cov, config=cfg)
    assert np.array_equal(a.theta, b.theta) and a.value == b.value


def test_polterovich_precondition(sphere):
    big = ex.cap_cover(sphere, [[0, 0, 1], [0, 0, -1]], [2.2 * math.pi] * 2, eta=0.05)
    with pytest.raises(ex.ExperimentError, match="displaceable"):
        ex.polterovich_consistency(big)
    with pytest.raises(ex.ExperimentError):
        ex.polterovich_consistency(ex.three_disk_torus(grid=(48, 48)))


def test_polterovich_tetrahedral(sphere):
    cov = ex.solid_cover(sphere, 4, [1.5 * math.pi] * 4)
    rep = ex.polterovich_consistency(cov)
    assert rep.passed
    rec = rep.records[0]
    assert rec.rhs == 1 / 32 and rec.lhs > rec.rhs


def test_two_set_vanishing_small():
    rep = ex.two_set_vanishing(n=4, seed=3)
    assert rep.passed and len(rep.records) == 4


def test_restriction_identity():
    rep = ex.restriction_check(grid=(64, 64))
    assert rep.passed


def test_sweep_table_round_trip(torus, tmp_path):
    cfg = ex.OptimizerConfig(restarts=1, max_evals=6)
    tab = ex.pb_curve_sweep(make_surface("torus", 1.0, (64, 64)), [0.3, 0.45], config=cfg)
    assert tab.capacities() == [0.3, 0.45]
    pb, own = tab.values("pb"), tab.values("pb_own")
    assert pb[1] <= own[1] and pb[1] <= pb[0]
    assert ex.monotonicity_report(tab) == []
    ex.emit_plot_data(tab, tmp_path / "c.dat")
    lines = (tmp_path / "c.dat").read_text().splitlines()
    assert lines[0] == "# capacity pb" and len(lines) == 3
    ex.emit_plot_data(ex.SweepTable([]), tmp_path / "e.dat")
    assert (tmp_path / "e.dat").read_text().splitlines() == ["# capacity pb"]


def test_consistency_report_csv(tmp_path):
    rep = ex.ConsistencyReport()
    rep.add("a", 2.0, 1.0, True, "ok")
    rep.add("b", 0.5, 1.0, False, "bad")
    assert not rep.passed
    assert rep.records[0].margin == pytest.approx(1.0)
    rep.to_csv(tmp_path / "r.csv")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0].startswith("check,lhs,rhs") and len(rows) == 3


def test_cover_template_sphere(sphere):
    cov = ex.cover_template(sphere, 1.5 * math.pi, "caps")
    assert cov.n >= 4
    with pytest.raises(ex.ExperimentError):
        ex.cover_template(sphere, 1.5 * math.pi, "lattice")


def test_mt_refinement_settles():
    curve = ex.mt_refinement((32, 128, 256))
    vals = [v for _, v in curve]
    assert vals[0] > vals[1] > 0
    # the last doubling changes the value by about one percent
    assert abs(vals[2] - vals[1]) < 0.05 * vals[1]
