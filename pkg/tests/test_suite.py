import numpy as np
import pytest

from beamcap import PowerBudget
from beamcap.parallel import map_ordered, worker_count
from beamcap.suite import (check_instance, instance_from_json, instance_to_json, random_instance,
                           run_suite)


def test_random_instance_is_pure():
    a, b = random_instance(3, 17), random_instance(3, 17)
    assert np.array_equal(a[0].gains, b[0].gains) and a[1] == b[1]
    assert random_instance(0, 0)[1].is_uniform
    assert not random_instance(0, 1)[1].is_uniform


def test_instance_round_trip():
    h, b = random_instance(1, 5)
    h2, b2 = instance_from_json(instance_to_json(h, b))
    assert np.array_equal(h.gains, h2.gains) and b == b2


def test_check_instance_reports_problems(monkeypatch):
    import beamcap.suite as suite

    h, b = random_instance(0, 2)
    assert check_instance(h, b).passed

    real = suite.solve

    def broken(h, budget):
        sol = real(h, budget)
        from dataclasses import replace
        return replace(sol, snr=sol.snr * 0.9)

    monkeypatch.setattr(suite, "solve", broken)
    res = check_instance(h, b, checks=("oracle",))
    assert not res.passed
    assert any("oracle" in p for p in res.problems)


def test_run_suite_summary():
    rep = run_suite(25, seed=4, workers=2)
    assert rep["pass"] and rep["instances"] == 25
    assert rep["negative_controls"] == rep["negative_controls_rejected"] > 0
    assert rep["kkt_pass_rate"] == 1.0


def test_worker_count(monkeypatch):
    monkeypatch.setenv("BEAMCAP_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.setenv("BEAMCAP_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.setenv("BEAMCAP_THREADS", "x")
    with pytest.raises(ValueError):
        worker_count()


def test_map_ordered_keeps_order():
    import time

    def f(x):
        time.sleep(0.001 * (5 - x % 5))
        return x * x

    assert map_ordered(f, range(20), workers=4) == [x * x for x in range(20)]
