import csv
import io

import numpy as np
import pytest

from proxlab import ConvexProblem, Euclidean, MonotoneOperator, Spider, StepSchedule, build_family
from proxlab.mappings import MappingFamily, MappingHandle, identity_map
from proxlab.ppa import (CSV_HEADER, N_MAX_CAP, PPAError, monitor_asymptotic_regularity, monitor_cumulative,
                         monitor_fejer, monitor_residual, run_ppa, verify_divergence_rate)
from proxlab.resolvents import SubproblemError

E2 = Euclidean(2)


def shifted_identity(schedule=None):
    A = MonotoneOperator("shifted-identity", p=[0.0, 0.0])
    return build_family("monotone", A, schedule or StepSchedule.constant(1.0), E2)


def test_identity_family_is_constant():
    fam = MappingFamily(lambda n, g: identity_map(E2), StepSchedule.constant(1.0), E2)
    x0 = np.array([1.0, 2.0])
    tr = run_ppa(fam, x0, 50, p=x0)
    assert all(np.array_equal(tr.point(n), x0) for n in range(51))
    assert not tr.residual.any() and not tr.dist_to_p.any()
    for r in (monitor_fejer(tr), monitor_residual(tr)):
        assert r.clean and max(abs(s) for s in r.slacks) == 0
    cum = monitor_cumulative(tr, 1.0)
    assert cum.clean and cum.details["total"] == 0.0


def test_shifted_identity_closed_form():
    tr = run_ppa(shifted_identity(), np.array([2.0, 0.0]), 60)
    n = np.arange(61)
    assert np.array_equal(tr.dist_to_p, 2.0 ** (1 - n))
    assert np.array_equal(tr.residual, 2.0 ** (-np.arange(60)))
    fe = monitor_fejer(tr)
    # d^2 slack at step n: |x_n|^2 - |x_n|^2/4 - |x_n|^2/4 = |x_n|^2 / 2
    strong = tr.dist_to_p[:-1] ** 2 / 2
    assert fe.clean and np.allclose(fe.slacks, np.minimum(strong, tr.dist_to_p[:-1] / 2))
    res = monitor_residual(tr, K=3)
    assert res.clean and res.details["first_below"] == {"0": 0, "1": 1, "2": 2, "3": 2}
    assert monitor_cumulative(tr, 2.0).clean
    ar = monitor_asymptotic_regularity(shifted_identity(), tr, probes=(0,))
    assert ar.clean and ar.details["final_probe_distance"]["0"] == pytest.approx(tr.dist_to_p[59] / 2)


def test_spider_prox_halves_distance_once_on_ray():
    fam = build_family("moreau-yosida", ConvexProblem.squared_distance((2, 1.0)), StepSchedule.constant(1.0),
                       Spider(3))
    tr = run_ppa(fam, (1, 3.0), 10)
    d = tr.dist_to_p
    assert d[0] == 4.0 and d[1] == 2.0  # midpoint of a path through the hub
    assert np.allclose(d[1:] / d[:-1], 0.5)


def test_monitors_flag_a_bad_trajectory():
    # an expanding "family": the monitors must notice
    fam = MappingFamily(lambda n, g: MappingHandle(lambda x: 1.5 * x, E2), StepSchedule.constant(1.0), E2,
                        fixed_point=np.zeros(2))
    tr = run_ppa(fam, np.array([1.0, 0.0]), 20)
    assert not monitor_fejer(tr).clean
    assert not monitor_residual(tr).clean
    assert not monitor_cumulative(tr, 1.0).clean


def test_harmonic_sqrt_trace_uses_schedule_steps():
    tr = run_ppa(shifted_identity(StepSchedule.harmonic_sqrt(1.0)), np.array([1.0, 1.0]), 30)
    assert tr.gamma == pytest.approx(1 / np.sqrt(np.arange(1, 31)))
    assert monitor_fejer(tr).clean and monitor_residual(tr).clean


def test_csv_schema():
    tr = run_ppa(shifted_identity(), np.array([2.0, 0.0]), 5)
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 6
    assert rows[-1][0] == "5" and rows[-1][1] == "" and float(rows[-1][4]) == 2.0 ** -4
    assert float(rows[1][5]) == 1.0


def test_retention_thins_long_runs():
    tr = run_ppa(shifted_identity(), np.array([2.0, 0.0]), 20_000)
    assert 0 in tr.points and 20_000 in tr.points and 1000 in tr.points
    assert len(tr.points) < 4000
    small = run_ppa(shifted_identity(), np.array([2.0, 0.0]), 100, retain=[3])
    assert set(small.points) == {3, 100}


def test_n_max_validation():
    with pytest.raises(ValueError):
        run_ppa(shifted_identity(), np.zeros(2), 0)
    with pytest.raises(ValueError):
        run_ppa(shifted_identity(), np.zeros(2), N_MAX_CAP + 1)


def test_solver_failure_reports_step():
    def make(n, g):
        def fn(x):
            if n == 3:
                raise SubproblemError("budget exhausted")
            return x

        return MappingHandle(fn, E2)

    with pytest.raises(PPAError) as info:
        run_ppa(MappingFamily(make, StepSchedule.constant(1.0), E2, gamma_keyed=False), np.zeros(2), 10)
    assert info.value.index == 3


def test_divergence_rate():
    r = verify_divergence_rate(StepSchedule.constant(1.0), 20)
    assert r.clean and r.details["thetas"][:3] == [1, 2, 3]
    # partial sums of 1/(n+1) against theta(K) = ceil(e^K)
    h = verify_divergence_rate(StepSchedule.harmonic_sqrt(1.0), 12)
    assert h.clean
    for K, t in enumerate(h.details["thetas"], start=1):
        assert sum(1.0 / (n + 1) for n in range(t + 1)) >= K
    bad = verify_divergence_rate(StepSchedule.table([0.5], thetas=[0, 1, 2, 3]), 3)
    # partial sums 0.25 (n+1) fall short at every K; the witness is the worst one
    assert bad.violations == 3 and bad.witness == {"K": 3, "theta": 3, "partial_sum": 1.0}
