"""Self-maps of a geodesic space and sampled checks of the inequalities they satisfy.

Slacks are always ``rhs - lhs``; see :mod:`proxlab.reports`.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Optional

import numpy as np

from .geometry import SampleSpec, quasilin
from .reports import DEFAULT_TOL, collect, map_chunks


class ModulusError(ValueError):
    pass


class Modulus:
    """Increasing function on ``[0, inf)`` vanishing only at 0.

    Either ``power`` (``c * t**q``, ``c > 0``, ``q >= 1``) or ``tabulated``
    (piecewise linear through ``(ts, values)``, extended with the last slope).
    """

    def __init__(self, kind="power", c=1.0, q=2.0, ts=None, values=None):
        self.kind = kind
        if kind == "power":
            if not c > 0 or not q >= 1:
                raise ModulusError(f"power modulus needs c > 0 and q >= 1, got c={c}, q={q}")
            self.c, self.q = float(c), float(q)
        elif kind == "tabulated":
            ts = np.asarray(ts, dtype=float)
            values = np.asarray(values, dtype=float)
            if ts.ndim != 1 or ts.shape != values.shape or ts.size < 2:
                raise ModulusError("tabulated modulus needs matching 1-D grids of length >= 2")
            if ts[0] != 0.0 or values[0] != 0.0:
                raise ModulusError("tabulated modulus must start at (0, 0)")
            if np.any(np.diff(ts) <= 0) or np.any(np.diff(values) <= 0):
                raise ModulusError("tabulated modulus must be strictly increasing")
            self.ts, self.values = ts, values
        else:
            raise ModulusError(f"unknown modulus kind {kind!r}")

    @classmethod
    def power(cls, c=1.0, q=2.0):
        return cls("power", c=c, q=q)

    def __call__(self, t):
        if self.kind == "power":
            return self.c * np.power(t, self.q)
        t = np.asarray(t, dtype=float)
        slope = (self.values[-1] - self.values[-2]) / (self.ts[-1] - self.ts[-2])
        inside = np.interp(t, self.ts, self.values)
        out = np.where(t > self.ts[-1], self.values[-1] + slope * (t - self.ts[-1]), inside)
        return float(out) if out.ndim == 0 else out

    def exact(self, t):
        """``phi(t)`` as a Fraction when exact evaluation is possible, else None."""
        if self.kind == "power" and self.q.is_integer():
            return Fraction(self.c) * Fraction(t) ** int(self.q)
        return None

    def scaled(self, factor):
        if not factor > 0:
            raise ModulusError("modulus scale factor must be positive")
        if self.kind == "power":
            return Modulus.power(self.c * factor, self.q)
        return Modulus("tabulated", ts=self.ts, values=self.values * factor)

    def validate(self, grid=None):
        grid = np.linspace(0.0, 10.0, 1001) if grid is None else np.asarray(grid)
        vals = np.asarray(self(grid), dtype=float)
        if vals[0] != 0.0 or np.any(vals[1:] <= 0) or np.any(np.diff(vals) < 0):
            raise ModulusError("modulus fails monotonicity/positivity on the grid")
        return True

    def to_dict(self):
        if self.kind == "power":
            return {"kind": "power", "c": self.c, "q": self.q}
        return {"kind": "tabulated", "ts": self.ts.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        return cls(d.pop("kind", "power"), **d)

    def __repr__(self):
        return f"Modulus({self.to_dict()})"


@dataclass(frozen=True)
class MappingHandle:
    """A computable self-map together with how accurately it is evaluated."""

    fn: Callable
    space: Any
    eps_eval: float = 0.0
    gamma: Optional[float] = None
    fixed_point: Any = None
    name: str = "T"

    def __post_init__(self):
        if not self.eps_eval >= 0:
            raise ValueError("eps_eval must be nonnegative")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("step parameter gamma must be positive")

    def __call__(self, x):
        return self.fn(x)

    def check_fixed_point(self, tol=DEFAULT_TOL):
        if self.fixed_point is None:
            return True
        p = self.fixed_point
        return self.space.dist(self(p), p) <= self.eps_eval + tol


def identity_map(space):
    return MappingHandle(lambda x: x, space, name="identity", gamma=None)


def constant_map(space, c):
    return MappingHandle(lambda x: c, space, fixed_point=c, name="constant")


class MappingFamily:
    """Indexed maps ``T_n`` attached to a step schedule ``gamma_n``.

    ``constructor(n, gamma_n)`` builds the n-th member.  With
    ``gamma_keyed=True`` members depending only on ``gamma_n`` are cached by
    step value.
    """

    def __init__(self, constructor, schedule, space, fixed_point=None, name="family", gamma_keyed=True):
        self.constructor = constructor
        self.schedule = schedule
        self.space = space
        self.fixed_point = fixed_point
        self.name = name
        self.gamma_keyed = gamma_keyed
        self._cache = {}

    def gamma(self, n):
        g = self.schedule.gamma(n)
        if not g > 0:
            raise ValueError(f"malformed schedule: gamma_{n} = {g!r}")
        return g

    def member(self, n):
        g = self.gamma(n)
        key = g if self.gamma_keyed else n
        T = self._cache.get(key)
        if T is None:
            if len(self._cache) > 4096:
                self._cache.clear()
            T = self.constructor(n, g)
            self._cache[key] = T
        return T

    def __call__(self, n):
        return self.member(n)

    def eps_eval(self, indices):
        return max((self.member(n).eps_eval for n in indices), default=0.0)


def inflated_tolerance(spec, eps_eval=0.0, scale=1.0, base=DEFAULT_TOL):
    """Base tolerance scaled by the sampling radius, plus a first-order
    allowance ``4 * eps_eval * diameter`` for inexactly evaluated maps."""
    diameter = 2.0 * spec.radius
    return scale * (base * (1.0 + spec.radius ** 2) + 4.0 * eps_eval * max(diameter, 1.0))


def _spec_on(spec, center, radius):
    return SampleSpec(count=spec.count, seed=spec.seed, radius=radius, center=center, t_grid=spec.t_grid)


def _pair_samples(T, space, spec, stream):
    samples = spec.points(space, 2, stream)
    return [(x, y, t, T(x), T(y)) for (x, y), t in samples]


def _t_values(spec, t):
    return sorted(set(spec.t_grid) | {t})


def check_nonexpansive(T, space, spec, tol=None):
    tol = inflated_tolerance(spec, T.eps_eval) if tol is None else tol
    data = _pair_samples(T, space, spec, 30)
    d = space.dist
    slacks = [d(x, y) - d(Tx, Ty) for x, y, t, Tx, Ty in data]
    return collect("nonexpansive", slacks, lambda i: [space.to_json(data[i][0]), space.to_json(data[i][1])], tol)


def check_firmly_nonexpansive(T, space, spec, tol=None):
    """d(Tx, Ty) <= d((1-t)x + tTx, (1-t)y + tTy), minimized over the t grid per pair."""
    tol = inflated_tolerance(spec, T.eps_eval) if tol is None else tol
    data = _pair_samples(T, space, spec, 30)
    d, comb = space.dist, space.combine
    worst_t = []

    def slack(item):
        x, y, t, Tx, Ty = item
        base = d(Tx, Ty)
        best, arg = math.inf, t
        for s in _t_values(spec, t):
            v = d(comb(x, Tx, s), comb(y, Ty, s)) - base
            if v < best:
                best, arg = v, s
        return best, arg

    out = map_chunks(slack, data)
    slacks = [v for v, _ in out]
    worst_t = [a for _, a in out]
    return collect("firmly_nonexpansive", slacks,
                   lambda i: [space.to_json(data[i][0]), space.to_json(data[i][1]), worst_t[i]], tol)


def p2_slack(space, x, y, Tx, Ty):
    d2 = lambda a, b: space.dist(a, b) ** 2  # noqa: E731
    return d2(x, Ty) + d2(y, Tx) - d2(x, Tx) - d2(y, Ty) - 2.0 * d2(Tx, Ty)


def check_p2(T, space, spec, tol=None):
    tol = inflated_tolerance(spec, T.eps_eval) if tol is None else tol
    data = _pair_samples(T, space, spec, 30)
    slacks = [p2_slack(space, x, y, Tx, Ty) for x, y, t, Tx, Ty in data]
    return collect("p2", slacks, lambda i: [space.to_json(data[i][0]), space.to_json(data[i][1])], tol)


def _escapes(space, center, radius, data, tol):
    d = space.dist
    return sum(1 for x, y, t, Tx, Ty in data
               for img in (Tx, Ty) if d(center, img) > radius + tol)


def check_uniform_p2(T, space, C, phi, spec, tol=None):
    """Uniform (P2) on the ball ``C = (center, radius)`` with modulus ``phi``.

    Images leaving ``C`` are counted in ``details["image_escapes"]``.
    """
    center, radius = C
    spec = _spec_on(spec, center, radius)
    tol = inflated_tolerance(spec, T.eps_eval) if tol is None else tol
    data = _pair_samples(T, space, spec, 31)
    slacks = [p2_slack(space, x, y, Tx, Ty) - 2.0 * float(phi(space.dist(Tx, Ty)))
              for x, y, t, Tx, Ty in data]
    details = {"image_escapes": _escapes(space, center, radius, data, tol), "modulus": phi.to_dict()}
    return collect("uniform_p2", slacks, lambda i: [space.to_json(data[i][0]), space.to_json(data[i][1])],
                   tol, details)


def check_uniform_fne(T, space, C, phi, spec, tol=None):
    """Squared-distance uniform firm nonexpansivity on ``C`` with modulus ``phi``."""
    center, radius = C
    spec = _spec_on(spec, center, radius)
    tol = inflated_tolerance(spec, T.eps_eval) if tol is None else tol
    data = _pair_samples(T, space, spec, 31)
    d, comb = space.dist, space.combine

    def slack(item):
        x, y, t, Tx, Ty = item
        dT = d(Tx, Ty)
        mod = float(phi(dT))
        best, arg = math.inf, t
        for s in _t_values(spec, t):
            v = d(comb(x, Tx, s), comb(y, Ty, s)) ** 2 - 2.0 * (1.0 - s) * mod - dT ** 2
            if v < best:
                best, arg = v, s
        return best, arg

    out = map_chunks(slack, data)
    details = {"image_escapes": _escapes(space, center, radius, data, tol), "modulus": phi.to_dict()}
    return collect("uniform_fne", [v for v, _ in out],
                   lambda i: [space.to_json(data[i][0]), space.to_json(data[i][1]), out[i][1]], tol, details)


# ---------------------------------------------------------------- families


def alpha_grid(gn, gm, rng, k=4):
    """Admissible alphas for the joint condition: uniform draws from the
    feasible interval plus both endpoints and two near-boundary values."""
    lo = max(0.0, 1.0 - gm / gn)
    width = 1.0 - lo
    alphas = [lo, lo + 1e-3 * width, 1.0 - 1e-6 * width, 1.0]
    alphas += list(lo + width * rng.uniform(size=k))
    return alphas


def beta_for(alpha, gn, gm):
    beta = 1.0 - (1.0 - alpha) * gn / gm
    return min(1.0, max(0.0, beta))


def _family_samples(family, space, pairs, spec, stream):
    if not pairs:
        raise ValueError("index-pairs must be nonempty")
    rng = spec.rng(stream)
    c = spec.center_in(space)
    out = []
    for i in range(spec.count):
        n, m = pairs[i % len(pairs)]
        x = space.sample(rng, c, spec.radius)
        y = space.sample(rng, c, spec.radius)
        out.append((int(n), int(m), x, y))
    return out, rng


def _family_tol(family, spec, pairs, tol):
    if tol is not None:
        return tol
    idx = {i for pair in pairs for i in pair}
    eps = family.eps_eval(idx)
    inv = max(1.0 / family.gamma(i) for i in idx)
    return inflated_tolerance(spec, eps, scale=max(1.0, inv))


def _joint_witness(space, n, m, x, y, *extra):
    return [n, m, space.to_json(x), space.to_json(y), *extra]


def jointly_fne_slack(space, x, y, Tnx, Tmy, gn, gm, alphas):
    d, comb = space.dist, space.combine
    base = d(Tnx, Tmy)
    best, arg = math.inf, None
    for a in alphas:
        b = beta_for(a, gn, gm)
        v = d(comb(x, Tnx, a), comb(y, Tmy, b)) - base
        if v < best:
            best, arg = v, a
    return best, arg


def jointly_p2_slack(space, x, y, Tnx, Tmy, gn, gm):
    d2 = lambda a, b: space.dist(a, b) ** 2  # noqa: E731
    rhs = (d2(x, Tmy) - d2(x, Tnx) - d2(Tnx, Tmy)) / gn
    lhs = (d2(Tnx, Tmy) + d2(y, Tmy) - d2(y, Tnx)) / gm
    return rhs - lhs


def jointly_p2_quasilin_slack(space, x, y, Tnx, Tmy, gn, gm):
    return (quasilin(space, Tnx, Tmy, x, Tnx) / gn - quasilin(space, Tnx, Tmy, y, Tmy) / gm)


def c1_slack(space, w, Tnw, Tmw, gn, gm):
    return abs(gn - gm) / gn * space.dist(w, Tnw) - space.dist(Tnw, Tmw)


def check_jointly_fne(family, space, pairs, spec, tol=None):
    tol = _family_tol(family, spec, pairs, tol)
    samples, rng = _family_samples(family, space, pairs, spec, 40)
    rows = []
    for n, m, x, y in samples:
        gn, gm = family.gamma(n), family.gamma(m)
        alphas = alpha_grid(gn, gm, rng)
        rows.append((n, m, x, y, gn, gm, alphas))

    def slack(row):
        n, m, x, y, gn, gm, alphas = row
        return jointly_fne_slack(space, x, y, family(n)(x), family(m)(y), gn, gm, alphas)

    out = map_chunks(slack, rows)
    return collect("jointly_fne", [v for v, _ in out],
                   lambda i: _joint_witness(space, *samples[i], out[i][1]), tol)


def check_jointly_p2(family, space, pairs, spec, tol=None, agree_tol=1e-9):
    """Joint (P2) in squared-distance form, cross-checked against the
    quasi-linearization form (whose slack is exactly half as large)."""
    tol = _family_tol(family, spec, pairs, tol)
    samples, _ = _family_samples(family, space, pairs, spec, 40)

    def slack(row):
        n, m, x, y = row
        gn, gm = family.gamma(n), family.gamma(m)
        Tnx, Tmy = family(n)(x), family(m)(y)
        s10 = jointly_p2_slack(space, x, y, Tnx, Tmy, gn, gm)
        s11 = jointly_p2_quasilin_slack(space, x, y, Tnx, Tmy, gn, gm)
        return s10, abs(s10 - 2.0 * s11)

    out = map_chunks(slack, samples)
    gap = max(g for _, g in out)
    details = {"quasilin_form_max_gap": gap, "quasilin_form_agrees": bool(gap <= agree_tol)}
    return collect("jointly_p2", [v for v, _ in out], lambda i: _joint_witness(space, *samples[i]), tol, details)


def check_c1(family, space, pairs, spec, tol=None):
    tol = _family_tol(family, spec, pairs, tol)
    samples, _ = _family_samples(family, space, pairs, spec, 40)

    def slack(row):
        n, m, w, _ = row
        return c1_slack(space, w, family(n)(w), family(m)(w), family.gamma(n), family.gamma(m))

    slacks = map_chunks(slack, samples)
    return collect("c1", slacks, lambda i: [samples[i][0], samples[i][1], space.to_json(samples[i][2])], tol)


@dataclass
class ChainReport:
    """Per-sample implication chain on identical samples.

    ``fne_not_p2`` counts samples where the joint firm nonexpansivity check
    passed at every alpha but joint (P2) failed; ``p2_not_c1`` counts samples
    ``w`` where joint (P2) at ``x = y = w`` passed but (C1) failed;
    ``verdict_disagreements`` counts samples where the two joint verdicts
    differ (meaningful on Hilbert backends only).
    """

    samples: int
    fne_pass: int
    p2_pass: int
    c1_pass: int
    fne_not_p2: int
    p2_not_c1: int
    verdict_disagreements: int
    tolerance: float

    @property
    def holds(self):
        return self.fne_not_p2 == 0 and self.p2_not_c1 == 0

    def to_dict(self):
        return dict(self.__dict__)


def implication_chain(family, space, pairs, spec, tol=None):
    tol = _family_tol(family, spec, pairs, tol)
    samples, rng = _family_samples(family, space, pairs, spec, 40)
    counts = dict(fne=0, p2=0, c1=0, fne_not_p2=0, p2_not_c1=0, disagree=0)
    for n, m, x, y in samples:
        gn, gm = family.gamma(n), family.gamma(m)
        Tn, Tm = family(n), family(m)
        Tnx, Tmy = Tn(x), Tm(y)
        fne = jointly_fne_slack(space, x, y, Tnx, Tmy, gn, gm, alpha_grid(gn, gm, rng))[0] >= -tol
        p2 = jointly_p2_slack(space, x, y, Tnx, Tmy, gn, gm) >= -tol
        Tmx = Tm(x)
        p2_diag = jointly_p2_slack(space, x, x, Tnx, Tmx, gn, gm) >= -tol
        c1 = c1_slack(space, x, Tnx, Tmx, gn, gm) >= -tol
        counts["fne"] += fne
        counts["p2"] += p2
        counts["c1"] += c1
        counts["fne_not_p2"] += fne and not p2
        counts["p2_not_c1"] += p2_diag and not c1
        counts["disagree"] += fne != p2
    return ChainReport(len(samples), counts["fne"], counts["p2"], counts["c1"], counts["fne_not_p2"],
                       counts["p2_not_c1"], counts["disagree"], tol)


# ---------------------------------------------------- consequences of uniformity


def check_lemma_qp(T, space, C, phi, z, spec, tol=None):
    """phi(d(Tx, z)) <= d(x, Tx) * d(Tx, z) for sampled x in C and a fixed point z."""
    center, radius = C
    spec = _spec_on(spec, center, radius)
    tol = inflated_tolerance(spec, T.eps_eval) if tol is None else tol
    rng = spec.rng(50)
    xs = [space.sample(rng, center, radius) for _ in range(spec.count)]
    d = space.dist

    def slack(x):
        Tx = T(x)
        r = d(Tx, z)
        return d(x, Tx) * r - float(phi(r))

    slacks = map_chunks(slack, xs)
    return collect("lemma_qp", slacks, lambda i: [space.to_json(xs[i])], tol)


def near_fixed_separation_slack(space, T, phi, x, z):
    """Slack of phi(d(Tx, Tz)) <= 2 eps (d(Tx, Tz) + eps), eps = max displacement.

    This is what uniform (P2) gives for two points that are fixed only up to
    ``eps``; at ``eps = 0`` it forces ``Tx = Tz``.
    """
    Tx, Tz = T(x), T(z)
    eps = max(space.dist(x, Tx), space.dist(z, Tz)) + T.eps_eval
    D = space.dist(Tx, Tz)
    return 2.0 * eps * (D + eps) - float(phi(D))
