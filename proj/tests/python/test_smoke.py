import math
import random

import pytest

import calibcusum as cc


def test_llo_adjust_known_value():
    assert cc.llo_adjust(0.9, 0.89, 0.17) == pytest.approx(0.563897296370907865, abs=1e-12)
    assert cc.llo_adjust([0.2, 0.8], 1.0, 1.0) == pytest.approx([0.2, 0.8])


def test_logliks():
    assert cc.loglik_calibrated([0.8, 0.3], [1, 0]) == pytest.approx(-0.5798184952529421, abs=1e-12)
    assert cc.loglik_uncalibrated([0.5], [1], 2.0, 1.0) == pytest.approx(math.log(2 / 3), abs=1e-12)


def test_fit_and_test():
    rng = random.Random(3)
    p, y = [], []
    for _ in range(20000):
        u = rng.random()
        p.append(u)
        y.append(int(rng.random() < cc.llo_adjust(u, 2.0, 1.0)))
    fit = cc.fit_mle(p, y)
    assert fit.converged
    assert fit.delta == pytest.approx(2.0, rel=0.1)
    assert fit.gamma == pytest.approx(1.0, rel=0.1)
    assert cc.calibration_test(p, y).p_value < 1e-4
    assert len(cc.apply_fit(p[:5], fit)) == 5
    with pytest.raises(ValueError):
        cc.fit_mle([0.5, 0.5], [1, 1])


def test_chart_and_dpcl():
    spec = cc.ChartSpec("shift-up", alpha=0.01, replicates=500, seed=2)
    assert spec.name == "shift-up"
    assert cc.increment([0.5], [1], spec) == pytest.approx(math.log(4 / 3), abs=1e-12)
    limits = cc.dpcl_limits([[0.2, 0.6]] * 10, spec)
    engine = cc.DpclEngine(spec)
    assert [engine.advance([0.2, 0.6]) for _ in range(10)] == limits
    assert engine.steps == 10
    with pytest.raises(ValueError):
        cc.ChartSpec("sideways")


def test_summaries_and_study():
    s = cc.summarize([5, 5, 5])
    assert (s.arl, s.sdrl) == (5.0, 0.0)
    g = cc.geometric_reference(0.005)
    assert list(g.quantiles) == [21, 57, 138, 276, 459]
    csv = cc.simulate_study("in-control", alpha=0.05, replicates=100, replications=20)
    assert csv.splitlines()[0].startswith("Alternatives/Parameters,Distribution,ARL")
    assert "Geometric" in csv


def test_monitor_resume():
    charts = [cc.ChartSpec("scale-down", alpha=0.05, replicates=200, seed=1)]
    rng = random.Random(5)
    stream = [(t, [rng.random() for _ in range(3)]) for t in range(1, 21)]
    stream = [(t, p, [int(rng.random() < x) for x in p]) for t, p in stream]
    full = cc.Monitor(charts)
    expected = [full.process(*b) for b in stream]
    first = cc.Monitor(charts)
    for b in stream[:8]:
        first.process(*b)
    resumed = cc.Monitor(charts, first.snapshot())
    assert [resumed.process(*b) for b in stream[8:]] == expected[8:]
    other = [cc.ChartSpec("scale-down", alpha=0.05, replicates=200, seed=2)]
    with pytest.raises(ValueError):
        cc.Monitor(other, first.snapshot())
