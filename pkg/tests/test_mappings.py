import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxlab import ConvexProblem, Euclidean, Hyperboloid, SampleSpec, StepSchedule, build_family
from proxlab.mappings import (MappingFamily, MappingHandle, Modulus, ModulusError, alpha_grid, beta_for, c1_slack,
                              check_c1, check_firmly_nonexpansive, check_jointly_fne, check_jointly_p2,
                              check_lemma_qp, check_nonexpansive, check_p2, check_uniform_fne, check_uniform_p2,
                              constant_map, identity_map, implication_chain, jointly_fne_slack,
                              jointly_p2_quasilin_slack, jointly_p2_slack, near_fixed_separation_slack, p2_slack)
from proxlab.resolvents import mismatched_family

E1, E2 = Euclidean(1), Euclidean(2)
SPEC = SampleSpec(count=400, seed=5)


def halve(space=E2):
    return MappingHandle(lambda x: x / 2, space, fixed_point=np.zeros(space.dim), name="halve")


def test_identity_and_constant_are_fne_and_p2():
    for T in (identity_map(E2), constant_map(E2, np.array([0.3, 0.1]))):
        for r in (check_nonexpansive(T, E2, SPEC), check_firmly_nonexpansive(T, E2, SPEC), check_p2(T, E2, SPEC)):
            assert r.clean, r.summary()
    r = check_p2(identity_map(E2), E2, SPEC)
    assert max(abs(s) for s in r.slacks) < 1e-12


def test_halving_map_fne_and_p2():
    # symbolic: |(x-y)/2| <= (1 - t/2)|x-y| for t in [0, 1]
    assert check_firmly_nonexpansive(halve(), E2, SPEC).clean
    big = SampleSpec(count=10_000, seed=1)
    r = check_p2(halve(), E2, big)
    assert r.clean and r.samples == 10_000
    # P2 maps are nonexpansive
    assert check_nonexpansive(halve(), E2, big).clean


def test_expanding_map_is_caught():
    T = MappingHandle(lambda x: 2 * x, E2)
    assert not check_nonexpansive(T, E2, SPEC).clean
    assert not check_p2(T, E2, SPEC).clean


def test_p2_slack_algebra():
    x, y = np.array([1.0, 0.0]), np.array([0.0, 2.0])
    # T = x/2: 2|Tx-Ty|^2 = 2.5; rhs = |x-Ty|^2 + |y-Tx|^2 - |x-Tx|^2 - |y-Ty|^2 = 2 + 4.25 - .25 - 1
    assert p2_slack(E2, x, y, x / 2, y / 2) == pytest.approx(5.0 - 2.5)


def test_uniform_p2_examples():
    ball = (np.zeros(2), 1.0)
    big = SampleSpec(count=10_000, seed=0)
    assert check_uniform_p2(halve(), E2, ball, Modulus.power(0.5, 2), big).clean
    assert not check_uniform_p2(halve(), E2, ball, Modulus.power(10.0, 2), SPEC).clean
    # a constant map has d(Tx, Ty) = 0, so the modulus plays no role
    c = constant_map(E2, np.array([0.2, 0.2]))
    u = check_uniform_p2(c, E2, ball, Modulus.power(100.0, 2), SPEC)
    assert u.clean and u.slacks == pytest.approx(check_p2(c, E2, SampleSpec(400, 5, radius=1.0)).slacks)


def test_uniform_p2_reports_escapes():
    shift = MappingHandle(lambda x: x + 5.0, E2)
    r = check_uniform_p2(shift, E2, (np.zeros(2), 1.0), Modulus.power(1e-3, 2), SPEC)
    assert r.details["image_escapes"] > 0 and not r.clean


def test_uniform_fne_implies_uniform_p2():
    ball = (np.zeros(2), 1.0)
    for c in (0.25, 0.5, 1.0, 2.0):
        phi = Modulus.power(c, 2)
        fne = check_uniform_fne(halve(), E2, ball, phi, SPEC)
        p2 = check_uniform_p2(halve(), E2, ball, phi, SPEC)
        if fne.clean:
            assert p2.clean
        # Hilbert backend: the converse holds too
        assert fne.clean == p2.clean


def test_uniform_fne_at_t_one_is_trivial():
    # the (1 - t) factor removes the modulus term, leaving d(Tx, Ty) <= d(Tx, Ty)
    x, y = np.array([0.5, 0.0]), np.array([0.0, 0.5])
    dT = E2.dist(x / 2, y / 2)
    assert E2.dist(E2.combine(x, x / 2, 1.0), E2.combine(y, y / 2, 1.0)) ** 2 - dT ** 2 == 0.0


def test_modulus_contract():
    with pytest.raises(ModulusError):
        Modulus.power(0.0, 2)
    with pytest.raises(ModulusError):
        Modulus("tabulated", ts=[0, 1, 2], values=[0, 1, 1])
    tab = Modulus("tabulated", ts=[0, 1, 2], values=[0, 1, 3])
    assert tab(1.5) == pytest.approx(2.0) and tab(3.0) == pytest.approx(5.0)
    assert tab.validate()
    assert Modulus.from_dict(tab.to_dict())(0.5) == tab(0.5)
    from fractions import Fraction
    assert Modulus.power(1.0, 2).exact(Fraction(1, 3)) == Fraction(1, 9)
    assert Modulus.power(1.0, 2.5).exact(Fraction(1, 3)) is None


def my_family(schedule, space=E1, anchor=None):
    anchor = np.zeros(space.dim) if anchor is None else anchor
    return build_family("moreau-yosida", ConvexProblem.squared_distance(anchor), schedule, space)


def test_alpha_grid_is_feasible():
    rng = np.random.default_rng(0)
    for gn, gm in [(1, 2), (2, 1), (1, 1), (0.3, 5)]:
        for a in alpha_grid(gn, gm, rng):
            b = beta_for(a, gn, gm)
            assert 0 <= a <= 1 and 0 <= b <= 1
            assert (1 - a) * gn == pytest.approx((1 - b) * gm, abs=1e-12)


def test_jointly_fne_reduces_to_single_map():
    # n = m and alpha = beta = t: the single-map firm nonexpansivity slack
    T = halve()
    x, y = np.array([1.0, 0.5]), np.array([-0.2, 0.3])
    for t in (0.0, 0.3, 1.0):
        s, _ = jointly_fne_slack(E2, x, y, T(x), T(y), 1.0, 1.0, [t])
        single = E2.dist(E2.combine(x, T(x), t), E2.combine(y, T(y), t)) - E2.dist(T(x), T(y))
        assert s == pytest.approx(single, abs=1e-15)
    s, _ = jointly_fne_slack(E2, x, y, T(x), T(y), 1.0, 2.0, [1.0])
    assert s == pytest.approx(0.0, abs=1e-15)


def test_jointly_fne_half_norm_family():
    # J_g(x) = x / (1 + g) in euclidean(1), gamma_0 = 1, gamma_1 = 2
    fam = build_family("moreau-yosida", ConvexProblem.half_norm_squared(1), StepSchedule.table([1.0, 2.0]), E1)
    spec = SampleSpec(count=10_000, seed=0, radius=3.0)
    assert fam(1)(np.array([3.0]))[0] == pytest.approx(1.0)
    r = check_jointly_fne(fam, E1, [[0, 1], [1, 0]], spec)
    assert r.clean and r.samples == 10_000


def test_jointly_p2_forms_agree_and_reduce():
    fam = my_family(StepSchedule.harmonic_sqrt(1.0), E2, np.array([0.2, 0.1]))
    r = check_jointly_p2(fam, E2, [[0, 3], [2, 2]], SPEC)
    assert r.clean and r.details["quasilin_form_agrees"]
    x, y = np.array([1.0, 0.5]), np.array([-0.2, 0.3])
    T = halve()
    assert jointly_p2_slack(E2, x, y, T(x), T(y), 1.0, 1.0) == pytest.approx(p2_slack(E2, x, y, T(x), T(y)))
    s10 = jointly_p2_slack(E2, x, y, T(x), T(y), 1.0, 3.0)
    assert s10 == pytest.approx(2 * jointly_p2_quasilin_slack(E2, x, y, T(x), T(y), 1.0, 3.0))


def test_c1_examples():
    fam = build_family("moreau-yosida", ConvexProblem.half_norm_squared(1), StepSchedule.table([1.0, 2.0]), E1)
    w = np.array([3.0])
    Tn, Tm = fam(0)(w), fam(1)(w)
    assert abs(Tn[0] - Tm[0]) == pytest.approx(0.5)
    assert c1_slack(E1, w, Tn, Tm, 1.0, 2.0) == pytest.approx(1.5 - 0.5)
    # equal steps: maps must agree; a common fixed point gives 0 = 0
    assert c1_slack(E1, w, Tn, Tn, 1.0, 1.0) == 0.0
    z = np.zeros(1)
    assert c1_slack(E1, z, fam(0)(z), fam(1)(z), 1.0, 2.0) == 0.0
    assert check_c1(fam, E1, [[0, 1], [1, 0]], SPEC).clean


def test_mismatched_family_breaks_c1():
    fam = mismatched_family("moreau-yosida", ConvexProblem.squared_distance(np.zeros(1)),
                            StepSchedule.constant(1.0), StepSchedule.harmonic_sqrt(1.0), E1)
    r = check_c1(fam, E1, [[0, 1]], SPEC)
    assert not r.clean
    n, m, w = r.witness
    assert (n, m) == (0, 1) and abs(w[0]) > 0


def test_implication_chain_counts():
    fam = my_family(StepSchedule.harmonic_sqrt(1.0), E2, np.array([0.5, 0.0]))
    ch = implication_chain(fam, E2, [[0, 1], [3, 1]], SPEC)
    assert ch.holds and ch.verdict_disagreements == 0
    assert ch.fne_pass == ch.p2_pass == ch.samples


def test_family_rejects_malformed_schedule():
    class Bad:
        def gamma(self, n):
            return -1.0

        def to_dict(self):
            return {}

    fam = MappingFamily(lambda n, g: identity_map(E1), Bad(), E1)
    with pytest.raises(ValueError):
        fam.member(0)


def test_lemma_qp_and_near_fixed_separation():
    # J = x / 2 is uniformly FNE with phi(t) = t^2 on the unit ball around its fixed point 0
    phi = Modulus.power(1.0, 2)
    assert check_lemma_qp(halve(), E2, (np.zeros(2), 1.0), phi, np.zeros(2), SPEC).clean
    z = np.zeros(2)
    assert near_fixed_separation_slack(E2, halve(), phi, z, z) == 0.0


def test_uniform_p2_on_hyperboloid_prox():
    H2 = Hyperboloid(2)
    a = H2.from_spatial([0.4, 0.1])
    fam = build_family("moreau-yosida", ConvexProblem.squared_distance(a), StepSchedule.constant(0.7), H2)
    r = check_uniform_p2(fam(0), H2, (a, 1.0), Modulus.power(0.7, 2), SPEC)
    assert r.clean, r.summary()
    assert not check_uniform_p2(fam(0), H2, (a, 1.0), Modulus.power(70.0, 2), SPEC).clean


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_jointly_fne_hilbert_half_norm(gn, gm, x, y):
    Tn = lambda v: v / (1 + gn)  # noqa: E731
    Tm = lambda v: v / (1 + gm)  # noqa: E731
    xv, yv = np.array([x]), np.array([y])
    alphas = alpha_grid(gn, gm, np.random.default_rng(0))
    s, _ = jointly_fne_slack(E1, xv, yv, Tn(xv), Tm(yv), gn, gm, alphas)
    assert s >= -1e-12 * (1 + x * x + y * y)
    assert jointly_p2_slack(E1, xv, yv, Tn(xv), Tm(yv), gn, gm) >= -1e-9 * (1 + x * x + y * y) / min(gn, gm)
    assert math.isfinite(s)
