"""Resolvent families: proximal maps, resolvents of nonexpansive maps and of
monotone operators, all returned as :class:`~proxlab.mappings.MappingHandle`.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Euclidean, Hyperboloid, Spider, minkowski
from .mappings import MappingFamily, MappingHandle, Modulus
from .reports import collect


class SubproblemError(RuntimeError):
    """The inner solver ran out of iterations before certifying its accuracy."""


class UnsupportedProblemError(ValueError):
    """The problem or operator kind is not available on the given backend."""


@dataclass(frozen=True)
class SubproblemConfig:
    eps_eval: float = 1e-10
    max_iter: int = 10_000
    method: Optional[str] = None  # closed-form | geodesic-averaging | contraction-iteration | linear-solve

    def __post_init__(self):
        if not self.eps_eval > 0:
            raise ValueError("eps_eval must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")

    def to_dict(self):
        return {"eps_eval": self.eps_eval, "max_iter": self.max_iter, "method": self.method}

    @classmethod
    def from_dict(cls, d):
        return cls(**(d or {}))


# ----------------------------------------------------------------- problems


class ConvexProblem:
    """A convex function with a computable proximal map.

    ``squared-distance-sum``  f = 1/2 sum w_i d(., a_i)^2   (every CAT(0) backend)
    ``distance-to-point``     f = w d(., a)                  (every CAT(0) backend)
    ``quadratic``             f = 1/2 y'Qy + c'y             (euclidean)
    ``l1``                    f = lam ||y||_1                (euclidean)
    ``indicator-of-ball``     f = 0 on the ball, +inf off it (euclidean)
    """

    EUCLIDEAN_ONLY = {"quadratic", "l1", "indicator-of-ball"}

    def __init__(self, kind, **params):
        self.kind = kind
        self.params = params
        if kind == "squared-distance-sum":
            self.weights = [float(w) for w in params.get("weights", [])]
            self.anchors = list(params.get("anchors", []))
            if len(self.weights) != len(self.anchors) or any(not w > 0 for w in self.weights):
                raise ValueError("squared-distance-sum needs one positive weight per anchor")
        elif kind == "distance-to-point":
            self.anchor = params["anchor"]
            self.weight = float(params.get("weight", 1.0))
            if not self.weight > 0:
                raise ValueError("weight must be positive")
        elif kind == "quadratic":
            Q = np.atleast_2d(np.array(params["Q"], dtype=float))
            if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, atol=1e-12):
                raise ValueError("Q must be symmetric")
            if np.linalg.eigvalsh(Q).min() < -1e-10:
                raise ValueError("Q must be positive semidefinite")
            self.Q = Q
            self.c = np.zeros(Q.shape[0]) if params.get("c") is None else np.array(params["c"], dtype=float)
        elif kind == "l1":
            self.lam = float(params.get("lam", 1.0))
            if not self.lam > 0:
                raise ValueError("l1 weight must be positive")
        elif kind == "indicator-of-ball":
            self.center = np.array(params["center"], dtype=float)
            self.radius = float(params["radius"])
            if not self.radius >= 0:
                raise ValueError("ball radius must be nonnegative")
        else:
            raise ValueError(f"unknown problem kind {kind!r}")

    @classmethod
    def squared_distance(cls, anchor, weight=1.0):
        return cls("squared-distance-sum", weights=[weight], anchors=[anchor])

    @classmethod
    def half_norm_squared(cls, dim):
        return cls("quadratic", Q=np.eye(dim), c=np.zeros(dim))

    def supported_on(self, space):
        if self.kind in self.EUCLIDEAN_ONLY:
            return isinstance(space, Euclidean)
        return space.is_cat0

    def value(self, space, y):
        if self.kind == "squared-distance-sum":
            return 0.5 * sum(w * space.dist(y, a) ** 2 for w, a in zip(self.weights, self.anchors))
        if self.kind == "distance-to-point":
            return self.weight * space.dist(y, self.anchor)
        if self.kind == "quadratic":
            return 0.5 * float(y @ self.Q @ y) + float(self.c @ y)
        if self.kind == "l1":
            return self.lam * float(np.abs(y).sum())
        inside = np.linalg.norm(y - self.center) <= self.radius * (1 + 1e-12)
        return 0.0 if inside else math.inf

    def minimizer(self, space):
        """A known minimizer, or None when not available in closed form."""
        if self.kind == "squared-distance-sum":
            if len(self.anchors) == 1:
                return self.anchors[0]
            if isinstance(space, Euclidean) and self.anchors:
                W = sum(self.weights)
                return sum(w * a for w, a in zip(self.weights, self.anchors)) / W
            return None
        if self.kind == "distance-to-point":
            return self.anchor
        if self.kind == "quadratic":
            try:
                return np.linalg.solve(self.Q, -self.c)
            except np.linalg.LinAlgError:
                return None
        if self.kind == "l1":
            return np.zeros(space.dim)
        return self.center.copy()

    def uniform_convexity(self):
        """Modulus psi of uniform convexity when one is known, else None."""
        if self.kind == "squared-distance-sum" and self.weights:
            return Modulus.power(sum(self.weights) / 2.0, 2)
        if self.kind == "quadratic":
            lam = float(np.linalg.eigvalsh(self.Q).min())
            if lam > 0:
                return Modulus.power(lam / 2.0, 2)
        return None

    def gradient(self, space, y):
        if self.kind == "quadratic":
            return self.Q @ y + self.c
        if self.kind == "squared-distance-sum" and isinstance(space, Euclidean):
            return sum(w * (y - a) for w, a in zip(self.weights, self.anchors)) if self.anchors else np.zeros_like(y)
        raise UnsupportedProblemError(f"no single-valued gradient for {self.kind} on {space.kind}")

    def to_dict(self, space):
        if self.kind == "squared-distance-sum":
            return {"kind": self.kind, "weights": self.weights, "anchors": [space.to_json(a) for a in self.anchors]}
        if self.kind == "distance-to-point":
            return {"kind": self.kind, "anchor": space.to_json(self.anchor), "weight": self.weight}
        if self.kind == "quadratic":
            return {"kind": self.kind, "Q": self.Q.tolist(), "c": self.c.tolist()}
        if self.kind == "l1":
            return {"kind": self.kind, "lam": self.lam}
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}

    @classmethod
    def from_dict(cls, d, space):
        d = dict(d)
        kind = d.pop("kind")
        if kind == "squared-distance-sum":
            d["anchors"] = [space.from_json(a) for a in d.get("anchors", [])]
        elif kind == "distance-to-point":
            d["anchor"] = space.from_json(d["anchor"])
        return cls(kind, **d)


ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


class MonotoneOperator:
    """Single-valued monotone operators on euclidean space with computable resolvents.

    ``linear`` (M with M + M' positive semidefinite), ``gradient`` (of a
    ConvexProblem), ``shifted-identity`` (A x = x - p), ``rotation`` (the
    quarter-turn skew matrix).
    """

    def __init__(self, kind, **params):
        self.kind = kind
        if kind == "linear":
            M = np.atleast_2d(np.array(params["M"], dtype=float))
            if M.shape[0] != M.shape[1]:
                raise ValueError("M must be square")
            if np.linalg.eigvalsh(M + M.T).min() < -1e-10:
                raise ValueError("M + M^T must be positive semidefinite")
            self.M = M
        elif kind == "rotation":
            self.M = ROTATION.copy()
        elif kind == "shifted-identity":
            self.p = np.array(params["p"], dtype=float)
        elif kind == "gradient":
            self.problem = params["problem"]
        else:
            raise ValueError(f"unknown operator kind {kind!r}")

    @property
    def dim(self):
        if self.kind in ("linear", "rotation"):
            return self.M.shape[0]
        if self.kind == "shifted-identity":
            return self.p.size
        return None

    def apply(self, x, space=None):
        if self.kind in ("linear", "rotation"):
            return self.M @ x
        if self.kind == "shifted-identity":
            return x - self.p
        return self.problem.gradient(space, x)

    def zero(self, space=None):
        """A known zero of the operator, or None."""
        if self.kind == "shifted-identity":
            return self.p.copy()
        if self.kind in ("linear", "rotation"):
            return np.zeros(self.M.shape[0])
        return self.problem.minimizer(space)

    def uniform_monotonicity(self):
        """Modulus phi with <x-y, Ax-Ay> >= phi(|x-y|), when known."""
        if self.kind == "shifted-identity":
            return Modulus.power(1.0, 2)
        if self.kind == "linear":
            lam = float(np.linalg.eigvalsh((self.M + self.M.T) / 2).min())
            if lam > 0:
                return Modulus.power(lam, 2)
        if self.kind == "gradient":
            psi = self.problem.uniform_convexity()
            if psi is not None:
                return psi.scaled(2.0)
        return None

    def to_dict(self, space=None):
        if self.kind == "linear":
            return {"kind": "linear", "M": self.M.tolist()}
        if self.kind == "rotation":
            return {"kind": "rotation"}
        if self.kind == "shifted-identity":
            return {"kind": "shifted-identity", "p": self.p.tolist()}
        return {"kind": "gradient", "problem": self.problem.to_dict(space)}

    @classmethod
    def from_dict(cls, d, space=None):
        d = dict(d)
        kind = d.pop("kind")
        if kind == "gradient":
            return cls(kind, problem=ConvexProblem.from_dict(d["problem"], space))
        return cls(kind, **d)


def check_monotone(A, space, spec, tol=1e-9):
    rng = spec.rng(60)
    c = spec.center_in(space)
    pairs = [(space.sample(rng, c, spec.radius), space.sample(rng, c, spec.radius)) for _ in range(spec.count)]
    slacks = [float((x - y) @ (A.apply(x, space) - A.apply(y, space))) for x, y in pairs]
    return collect("monotone", slacks, lambda i: [space.to_json(pairs[i][0]), space.to_json(pairs[i][1])], tol)


# -------------------------------------------------------- proximal maps


def moreau_yosida(problem, gamma, space, cfg=None):
    """Proximal map ``y -> argmin f(y) + d(x, y)^2 / (2 gamma)``."""
    cfg = cfg or SubproblemConfig()
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not problem.supported_on(space):
        raise UnsupportedProblemError(f"{problem.kind} is not supported on {space.kind}")
    p = problem.minimizer(space)
    fn, eps = _prox_evaluator(problem, gamma, space, cfg)
    return MappingHandle(fn, space, eps_eval=eps, gamma=float(gamma), fixed_point=p,
                         name=f"prox[{problem.kind}, gamma={gamma:g}]")


def _prox_evaluator(problem, gamma, space, cfg):
    kind = problem.kind
    if kind == "squared-distance-sum":
        if not problem.anchors:
            return (lambda x: x), 0.0
        iterative = cfg.method == "geodesic-averaging" and isinstance(space, Hyperboloid)
        if len(problem.anchors) == 1 and not iterative:
            a, w = problem.anchors[0], problem.weights[0]
            t = gamma * w / (1.0 + gamma * w)
            return (lambda x: space.combine(x, a, t)), 0.0
        if isinstance(space, Euclidean):
            W = sum(problem.weights)
            s = sum(w * a for w, a in zip(problem.weights, problem.anchors))
            return (lambda x: (x / gamma + s) / (1.0 / gamma + W)), 0.0
        if isinstance(space, Spider):
            return (lambda x: _spider_weighted_mean(space, [x, *problem.anchors],
                                                    [1.0 / gamma, *problem.weights])), 0.0
        if isinstance(space, Hyperboloid):
            return (lambda x: _hyperboloid_weighted_mean(space, [x, *problem.anchors],
                                                         [1.0 / gamma, *problem.weights], cfg, start=x)), cfg.eps_eval
        raise UnsupportedProblemError(f"no solver for {kind} on {space.kind}")
    if kind == "distance-to-point":
        a, step = problem.anchor, gamma * problem.weight

        def fn(x):
            r = space.dist(x, a)
            return a if r <= step else space.combine(x, a, step / r)

        return fn, 0.0
    if kind == "quadratic":
        inv = np.linalg.inv(np.eye(problem.Q.shape[0]) + gamma * problem.Q)
        shift = gamma * problem.c
        return (lambda x: inv @ (x - shift)), 0.0
    if kind == "l1":
        thr = gamma * problem.lam
        return (lambda x: np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)), 0.0
    center, radius = problem.center, problem.radius

    def project(x):
        v = x - center
        r = math.sqrt(float(v @ v))
        return x.copy() if r <= radius else center + (radius / r) * v

    return project, 0.0


def _spider_weighted_mean(space, points, weights):
    """Exact minimizer of 1/2 sum w_i d(., a_i)^2 on a spider: a quadratic on each ray."""
    W = sum(weights)
    best, best_val = None, math.inf
    for ray in range(space.rays):
        signed = [(off if (r == ray or off == 0.0) else -off) for r, off in points]
        s = max(0.0, sum(w * v for w, v in zip(weights, signed)) / W)
        val = sum(w * (s - v) ** 2 for w, v in zip(weights, signed))
        if val < best_val - 1e-15 * max(1.0, val):
            best, best_val = space._canon(ray, s), val
    return best


def _hyperboloid_weighted_mean(space, points, weights, cfg, start):
    """Weighted barycenter on the hyperboloid by geodesic averaging.

    The objective is ``W``-strongly geodesically convex, so the iterate is
    certified once ``|grad| / W <= eps_eval``.
    """
    W = sum(weights)

    def objective(y):
        return 0.5 * sum(w * space.dist(y, a) ** 2 for w, a in zip(weights, points))

    y = start.copy()
    fy = objective(y)
    for _ in range(cfg.max_iter):
        step = sum(w * space.log(y, a) for w, a in zip(weights, points)) / W  # = -grad / W
        size = math.sqrt(max(minkowski(step, step), 0.0))
        if size <= cfg.eps_eval:
            return y
        eta = 1.0
        while True:
            cand = space.exp(y, eta * step)
            fc = objective(cand)
            if fc <= fy or eta < 1e-12:
                break
            eta *= 0.5
        y, fy = cand, fc
    raise SubproblemError(f"geodesic averaging did not reach eps_eval={cfg.eps_eval} in {cfg.max_iter} iterations")


# ----------------------------------------------- nonexpansive-map resolvents


def rotation_map(space, angle=math.pi / 2):
    if not (isinstance(space, Euclidean) and space.dim == 2):
        raise UnsupportedProblemError("rotation needs euclidean(2)")
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return MappingHandle(lambda x: R @ x, space, fixed_point=np.zeros(2), name=f"rotation[{angle:g}]")


def linear_map(space, M):
    M = np.atleast_2d(np.array(M, dtype=float))
    if not isinstance(space, Euclidean) or M.shape != (space.dim, space.dim):
        raise UnsupportedProblemError("linear map needs a matching euclidean space")
    if np.linalg.norm(M, 2) > 1 + 1e-12:
        raise ValueError("linear map is not nonexpansive (spectral norm > 1)")
    return MappingHandle(lambda x: M @ x, space, fixed_point=np.zeros(space.dim), name="linear")


def ball_projection(space, center, radius):
    """Metric projection onto a closed geodesic ball (nonexpansive on CAT(0) spaces)."""
    if not radius > 0:
        raise ValueError("radius must be positive")

    def fn(x):
        r = space.dist(center, x)
        return x if r <= radius else space.combine(center, x, radius / r)

    return MappingHandle(fn, space, fixed_point=center, name="ball-projection")


def map_from_dict(d, space):
    from .mappings import constant_map, identity_map

    kind = d["kind"]
    if kind == "rotation":
        return rotation_map(space, d.get("angle", math.pi / 2))
    if kind == "linear":
        return linear_map(space, d["matrix"])
    if kind == "ball-projection":
        return ball_projection(space, space.from_json(d["center"]), d["radius"])
    if kind == "identity":
        return identity_map(space)
    if kind == "constant":
        return constant_map(space, space.from_json(d["point"]))
    raise ValueError(f"unknown map kind {kind!r}")


def nonexpansive_resolvent(T, gamma, space, cfg=None):
    """Resolvent of order ``gamma`` of a nonexpansive ``T``: the fixed point of
    ``y -> (1/(1+gamma)) x + (gamma/(1+gamma)) T y``, by Banach iteration with
    the a-priori stopping bound."""
    cfg = cfg or SubproblemConfig()
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    q = gamma / (1.0 + gamma)
    eps = cfg.eps_eval

    def fn(x):
        y = x
        y1 = space.combine(x, T(y), q)
        d01 = space.dist(y, y1)
        if d01 == 0.0:
            return y1
        # smallest k with q^k d01 / (1 - q) <= eps
        k = max(1, math.ceil(math.log(eps * (1.0 - q) / d01) / math.log(q)))
        if k > cfg.max_iter:
            raise SubproblemError(f"resolvent needs {k} > {cfg.max_iter} contraction steps")
        y = y1
        for _ in range(k - 1):
            y = space.combine(x, T(y), q)
        return y

    return MappingHandle(fn, space, eps_eval=eps + gamma * T.eps_eval, gamma=float(gamma),
                         fixed_point=T.fixed_point, name=f"R[{T.name}, gamma={gamma:g}]")


# ------------------------------------------------- monotone-operator resolvents


def monotone_resolvent(A, gamma, cfg=None, space=None):
    """``(id + gamma A)^{-1}`` on euclidean space."""
    cfg = cfg or SubproblemConfig()
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    dim = A.dim if A.dim is not None else (space.dim if space is not None else None)
    if space is None:
        space = Euclidean(dim)
    if not isinstance(space, Euclidean):
        raise UnsupportedProblemError("monotone resolvents are available on euclidean spaces only")
    if A.kind == "gradient":
        h = moreau_yosida(A.problem, gamma, space, cfg)
        return MappingHandle(h.fn, space, h.eps_eval, float(gamma), h.fixed_point,
                             name=f"J[gradient, gamma={gamma:g}]")
    if A.kind == "shifted-identity":
        p = A.p
        fn = lambda x: (x + gamma * p) / (1.0 + gamma)  # noqa: E731
    else:
        K = np.eye(A.M.shape[0]) + gamma * A.M
        if np.linalg.cond(K) > 1e12:
            raise np.linalg.LinAlgError("resolvent system is numerically singular")
        inv = np.linalg.inv(K)
        fn = lambda x: inv @ x  # noqa: E731
    return MappingHandle(fn, space, eps_eval=0.0, gamma=float(gamma), fixed_point=A.zero(space),
                         name=f"J[{A.kind}, gamma={gamma:g}]")


# ----------------------------------------------------------------- families


def build_family(constructor, target, schedule, space, cfg=None, name=None):
    """Family whose n-th member is the resolvent of order ``gamma_n``.

    ``constructor`` is one of :func:`moreau_yosida`,
    :func:`nonexpansive_resolvent`, :func:`monotone_resolvent` (or its name).
    """
    cfg = cfg or SubproblemConfig()
    constructor = _CONSTRUCTORS.get(constructor, constructor)
    if constructor is moreau_yosida:
        make = lambda n, g: moreau_yosida(target, g, space, cfg)  # noqa: E731
        p = target.minimizer(space)
    elif constructor is nonexpansive_resolvent:
        make = lambda n, g: nonexpansive_resolvent(target, g, space, cfg)  # noqa: E731
        p = target.fixed_point
    elif constructor is monotone_resolvent:
        make = lambda n, g: monotone_resolvent(target, g, cfg, space)  # noqa: E731
        p = target.zero(space)
    else:
        raise ValueError(f"unknown resolvent constructor {constructor!r}")
    make(0, schedule.gamma(0))  # surface construction errors early
    return MappingFamily(make, schedule, space, fixed_point=p, name=name or constructor.__name__)


def mismatched_family(constructor, target, schedule, actual, space, cfg=None):
    """Members are resolvents of order ``actual.gamma(n)`` while the family
    claims ``schedule.gamma(n)``; a deliberately broken family."""
    inner = build_family(constructor, target, actual, space, cfg)
    return MappingFamily(lambda n, g: inner.member(n), schedule, space, fixed_point=inner.fixed_point,
                         name=f"mismatched-{inner.name}", gamma_keyed=False)


_CONSTRUCTORS = {
    "moreau-yosida": moreau_yosida,
    "nonexpansive": nonexpansive_resolvent,
    "monotone": monotone_resolvent,
}
