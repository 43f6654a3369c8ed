"""Geodesic spaces and sampled checks of their defining inequalities.

Points are backend-native values:

* ``euclidean(n)`` and ``linf-plane``: float arrays of shape ``(n,)``;
* ``hyperboloid(n)``: float arrays ``(x0, ..., xn)`` on the upper sheet
  ``<x, x>_L = -1``;
* ``spider(k)``: tuples ``(ray, offset)``, the hub being ``(0, 0.0)``.

All spaces expose ``dist``, ``combine`` (the point at parameter ``t`` on the
geodesic from ``x`` to ``y``), ``sample`` and JSON conversion.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .reports import DEFAULT_TOL, collect, map_chunks


class BackendMismatchError(ValueError):
    """A point does not belong to the space it was handed to."""


class ParameterRangeError(ValueError):
    """A geodesic parameter or sampling radius is out of range."""


def _check_t(t):
    if not 0.0 <= t <= 1.0:
        raise ParameterRangeError(f"geodesic parameter t={t!r} outside [0, 1]")


class Space:
    kind = None
    is_cat0 = True

    def to_dict(self):
        raise NotImplementedError

    def origin(self):
        raise NotImplementedError

    def point(self, coords):
        """Validate/convert raw coordinates into a point of this space."""
        raise NotImplementedError

    def to_json(self, x):
        return [float(c) for c in x]

    def from_json(self, obj):
        return self.point(obj)

    def dist(self, x, y):
        raise NotImplementedError

    def combine(self, x, y, t):
        raise NotImplementedError

    def sample(self, rng, center, radius):
        raise NotImplementedError

    def same_point(self, x, y):
        return self.dist(x, y) == 0.0

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(tuple(sorted(self.to_dict().items())))

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class _VectorSpace(Space):
    def __init__(self, dim):
        if int(dim) != dim or dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {dim!r}")
        self.dim = int(dim)
        self._shape = (self.dim,)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}

    def origin(self):
        return np.zeros(self.dim)

    def point(self, coords):
        x = np.array(coords, dtype=float)
        if x.shape != self._shape:
            raise BackendMismatchError(f"{self.kind}({self.dim}) expects {self.dim} coordinates, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite coordinates")
        return x

    def _check(self, x):
        if not isinstance(x, np.ndarray) or x.shape != self._shape:
            raise BackendMismatchError(f"not a point of {self.kind}({self.dim}): {x!r}")

    def combine(self, x, y, t):
        self._check(x)
        self._check(y)
        _check_t(t)
        if t == 0.0:
            return x.copy()
        if t == 1.0:
            return y.copy()
        return (1.0 - t) * x + t * y


class Euclidean(_VectorSpace):
    """``R^n`` with the 2-norm."""

    kind = "euclidean"

    def dist(self, x, y):
        self._check(x)
        self._check(y)
        d = x - y
        return math.sqrt(float(d @ d))

    def sample(self, rng, center, radius):
        _check_radius(radius)
        self._check(center)
        u = rng.standard_normal(self.dim)
        nu = math.sqrt(float(u @ u))
        if nu == 0.0:
            return center.copy()
        r = radius * rng.uniform() ** (1.0 / self.dim)
        # shrink by an ulp-sized factor so re-measured distances never exceed radius
        return center + (r * (1.0 - 4e-16) / nu) * u


class LInfPlane(_VectorSpace):
    """``R^n`` under the max norm; geodesic but not CAT(0).

    Geodesics are taken to be straight segments, one of infinitely many.
    """

    kind = "linf-plane"
    is_cat0 = False

    def __init__(self, dim=2):
        super().__init__(dim)

    def dist(self, x, y):
        self._check(x)
        self._check(y)
        return float(np.max(np.abs(x - y)))

    def sample(self, rng, center, radius):
        _check_radius(radius)
        self._check(center)
        return center + rng.uniform(-radius, radius, self.dim)


def minkowski(x, y):
    return float(x[1:] @ y[1:]) - float(x[0] * y[0])


class Hyperboloid(Space):
    """Hyperbolic ``n``-space in the hyperboloid model."""

    kind = "hyperboloid"

    def __init__(self, dim):
        if int(dim) != dim or dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {dim!r}")
        self.dim = int(dim)
        self._shape = (self.dim + 1,)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}

    def origin(self):
        x = np.zeros(self.dim + 1)
        x[0] = 1.0
        return x

    def point(self, coords):
        x = np.array(coords, dtype=float)
        if x.shape != self._shape:
            raise BackendMismatchError(f"hyperboloid({self.dim}) expects {self.dim + 1} coordinates, got shape {x.shape}")
        if x[0] < 1.0 - 1e-12 or abs(minkowski(x, x) + 1.0) > 1e-9 * max(1.0, x[0] ** 2):
            raise BackendMismatchError(f"point off the hyperboloid sheet: {coords!r}")
        return self.normalize(x)

    @staticmethod
    def normalize(x):
        """Project back onto the sheet by recomputing the time coordinate."""
        x = np.array(x, dtype=float)
        x[0] = math.sqrt(1.0 + float(x[1:] @ x[1:]))
        return x

    def from_spatial(self, coords):
        x = np.zeros(self.dim + 1)
        x[1:] = coords
        return self.normalize(x)

    def _check(self, x):
        if not isinstance(x, np.ndarray) or x.shape != self._shape:
            raise BackendMismatchError(f"not a point of hyperboloid({self.dim}): {x!r}")

    def dist(self, x, y):
        self._check(x)
        self._check(y)
        c = -minkowski(x, y)
        if c > 2.0:
            return math.acosh(c)
        # chordal form is accurate for nearby points
        v = x - y
        q = minkowski(v, v)
        return 2.0 * math.asinh(math.sqrt(max(q, 0.0)) / 2.0)

    def log(self, x, y):
        """Tangent vector at ``x`` pointing to ``y`` with length ``dist(x, y)``."""
        w = y + minkowski(x, y) * x
        nw = math.sqrt(max(minkowski(w, w), 0.0))
        if nw == 0.0:
            return np.zeros_like(x)
        return (self.dist(x, y) / nw) * w

    def exp(self, x, v):
        nv = math.sqrt(max(minkowski(v, v), 0.0))
        if nv == 0.0:
            return x.copy()
        return self.normalize(math.cosh(nv) * x + (math.sinh(nv) / nv) * v)

    def combine(self, x, y, t):
        self._check(x)
        self._check(y)
        _check_t(t)
        if t == 0.0:
            return x.copy()
        if t == 1.0:
            return y.copy()
        d = self.dist(x, y)
        if d == 0.0:
            return x.copy()
        w = y + minkowski(x, y) * x
        # |w|_L = sinh(d); scale so that the result sits at arc length t*d
        out = math.cosh(t * d) * x + (math.sinh(t * d) / math.sinh(d)) * w
        return self.normalize(out)

    def boost(self, c):
        """Lorentz isometry taking the origin to ``c``."""
        n = self.dim
        cs = c[1:]
        L = np.empty((n + 1, n + 1))
        L[0, 0] = c[0]
        L[0, 1:] = cs
        L[1:, 0] = cs
        L[1:, 1:] = np.eye(n) + np.outer(cs, cs) / (1.0 + c[0])
        return L

    def sample(self, rng, center, radius):
        _check_radius(radius)
        self._check(center)
        # tangent Gaussian at the origin, truncated to the ball, moved to center
        while True:
            v = rng.standard_normal(self.dim) * (radius / 2.0)
            r = math.sqrt(float(v @ v))
            if r <= radius:
                break
        p = np.empty(self.dim + 1)
        p[0] = math.cosh(r)
        p[1:] = (math.sinh(r) / r) * v if r > 0 else 0.0
        out = self.normalize(self.boost(center) @ p)
        if self.dist(center, out) > radius:
            out = self.combine(center, out, radius / self.dist(center, out) * (1.0 - 1e-15))
        return out


class Spider(Space):
    """``k`` half-lines glued at a common hub (a metric tree)."""

    kind = "spider"

    def __init__(self, rays):
        if int(rays) != rays or rays < 1:
            raise ValueError(f"ray count must be a positive integer, got {rays!r}")
        self.rays = int(rays)

    def to_dict(self):
        return {"kind": self.kind, "rays": self.rays}

    def origin(self):
        return (0, 0.0)

    def point(self, coords):
        try:
            ray, offset = coords
        except (TypeError, ValueError):
            raise BackendMismatchError(f"spider point must be [ray, offset], got {coords!r}") from None
        if int(ray) != ray or not 0 <= ray < self.rays:
            raise BackendMismatchError(f"ray index {ray!r} outside 0..{self.rays - 1}")
        offset = float(offset)
        if not offset >= 0.0 or not math.isfinite(offset):
            raise BackendMismatchError(f"spider offset must be finite and nonnegative, got {offset!r}")
        return self._canon(int(ray), offset)

    @staticmethod
    def _canon(ray, offset):
        if offset == 0.0:
            return (0, 0.0)
        return (ray, offset)

    def to_json(self, x):
        return [int(x[0]), float(x[1])]

    def _check(self, x):
        if not isinstance(x, tuple) or len(x) != 2 or not 0 <= x[0] < self.rays:
            raise BackendMismatchError(f"not a point of spider({self.rays}): {x!r}")

    def dist(self, x, y):
        self._check(x)
        self._check(y)
        if x[0] == y[0]:
            return abs(x[1] - y[1])
        return x[1] + y[1]

    def combine(self, x, y, t):
        self._check(x)
        self._check(y)
        _check_t(t)
        if t == 0.0:
            return x
        if t == 1.0:
            return y
        if x[0] == y[0] or x[1] == 0.0 or y[1] == 0.0:
            ray = y[0] if x[1] == 0.0 else x[0]
            return self._canon(ray, (1.0 - t) * x[1] + t * y[1])
        s = t * (x[1] + y[1])
        if s <= x[1]:
            return self._canon(x[0], x[1] - s)
        return self._canon(y[0], s - x[1])

    def sample(self, rng, center, radius):
        _check_radius(radius)
        self._check(center)
        hi = center[1] + radius
        while True:
            p = self._canon(int(rng.integers(self.rays)), float(rng.uniform(0.0, hi)))
            if self.dist(center, p) <= radius:
                return p


_SPACES = {"euclidean": Euclidean, "hyperboloid": Hyperboloid, "spider": Spider, "linf-plane": LInfPlane}


def space_from_dict(desc):
    """Build a space from its JSON descriptor, e.g. ``{"kind": "spider", "rays": 3}``."""
    try:
        kind = desc["kind"]
        cls = _SPACES[kind]
    except (KeyError, TypeError):
        raise ValueError(f"unknown space descriptor {desc!r}") from None
    if kind == "spider":
        return cls(desc["rays"])
    if kind == "linf-plane":
        return cls(desc.get("dim", 2))
    return cls(desc["dim"])


def dist(space, x, y):
    return space.dist(x, y)


def combine(space, x, y, t):
    return space.combine(x, y, t)


def quasilin(space, x, y, u, v):
    """Quasi-linearization <xy, uv> built from four squared distances."""
    d = space.dist
    return 0.5 * (d(x, v) ** 2 + d(y, u) ** 2 - d(x, u) ** 2 - d(y, v) ** 2)


def _check_radius(radius):
    if not radius > 0.0:
        raise ParameterRangeError(f"sampling radius must be positive, got {radius!r}")


def sample_point(space, center, radius, rng):
    """Random point within ``radius`` of ``center``; deterministic given ``rng``'s seed."""
    return space.sample(rng, center, radius)


@dataclass
class SampleSpec:
    count: int = 1000
    seed: int = 0
    radius: float = 1.0
    center: object = None
    t_grid: list = field(default_factory=lambda: [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0])

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("sample count must be a positive integer")
        _check_radius(self.radius)
        for t in self.t_grid:
            _check_t(t)
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")

    def rng(self, stream=0):
        return np.random.default_rng([int(self.seed), int(stream)])

    def center_in(self, space):
        return space.origin() if self.center is None else self.center

    def points(self, space, k, stream=0):
        """``count`` tuples of ``k`` sampled points plus one uniform ``t`` per tuple."""
        rng = self.rng(stream)
        c = self.center_in(space)
        out = []
        for _ in range(self.count):
            pts = tuple(space.sample(rng, c, self.radius) for _ in range(k))
            t = float(rng.choice(self.t_grid)) if rng.uniform() < 0.3 else float(rng.uniform())
            out.append((pts, t))
        return out

    def to_dict(self, space=None):
        d = {"count": self.count, "seed": self.seed, "radius": self.radius, "t_grid": list(self.t_grid)}
        if self.center is not None and space is not None:
            d["center"] = space.to_json(self.center)
        return d

    @classmethod
    def from_dict(cls, d, space=None):
        d = dict(d or {})
        center = d.pop("center", None)
        if center is not None and space is not None:
            center = space.from_json(center)
        return cls(center=center, **d)


def default_tolerance(spec):
    return DEFAULT_TOL * (1.0 + spec.radius ** 2)


def _witness(space, pts, t=None):
    w = [space.to_json(p) for p in pts]
    if t is not None:
        w.append(float(t))
    return w


def _run(space, spec, name, k, slack_fn, tol, stream):
    samples = spec.points(space, k, stream)
    slacks = map_chunks(lambda s: slack_fn(*s[0], s[1]), samples)
    return collect(name, slacks, lambda i: _witness(space, *samples[i]), tol)


def validate_cat0(space, spec, tol=None):
    """Sampled checks of the CAT(0) inequality, Cauchy-Schwarz and the four-point condition.

    Returns three reports, in that order.
    """
    tol = default_tolerance(spec) if tol is None else tol
    d = space.dist

    def cat0(z, x, y, t):
        m = space.combine(x, y, t)
        return ((1 - t) * d(z, x) ** 2 + t * d(z, y) ** 2 - t * (1 - t) * d(x, y) ** 2) - d(z, m) ** 2

    def cauchy_schwarz(x, y, u, v, t):
        return d(x, y) * d(u, v) - quasilin(space, x, y, u, v)

    def four_point(x, y, u, v, t):
        return (d(x, u) ** 2 + d(y, v) ** 2 + d(x, y) ** 2 + d(u, v) ** 2) - (d(x, v) ** 2 + d(y, u) ** 2)

    return [
        _run(space, spec, "cat0", 3, cat0, tol, 1),
        _run(space, spec, "cauchy_schwarz", 4, cauchy_schwarz, tol, 2),
        _run(space, spec, "four_point", 4, four_point, tol, 3),
    ]


def validate_busemann(space, spec, tol=None):
    tol = default_tolerance(spec) if tol is None else tol
    d = space.dist

    def busemann(x, y, u, v, t):
        lhs = d(space.combine(x, y, t), space.combine(u, v, t))
        return (1 - t) * d(x, u) + t * d(y, v) - lhs

    return _run(space, spec, "busemann", 4, busemann, tol, 4)


def validate_quasilinearization(space, spec, tol=None):
    """The four defining identities of the quasi-linearization, as one report each."""
    tol = default_tolerance(spec) if tol is None else tol
    ql = lambda *p: quasilin(space, *p)  # noqa: E731
    d = space.dist
    checks = {
        "quasilin_self": lambda x, y, u, v, w, t: -abs(ql(x, y, x, y) - d(x, y) ** 2),
        "quasilin_symmetric": lambda x, y, u, v, w, t: -abs(ql(x, y, u, v) - ql(u, v, x, y)),
        "quasilin_antisymmetric": lambda x, y, u, v, w, t: -abs(ql(y, x, u, v) + ql(x, y, u, v)),
        "quasilin_additive": lambda x, y, u, v, w, t: -abs(ql(x, y, u, v) + ql(x, y, v, w) - ql(x, y, u, w)),
    }
    return [_run(space, spec, name, 5, fn, tol, 10 + i) for i, (name, fn) in enumerate(checks.items())]


def validate_geodesic(space, spec, tol=None):
    """Metric axioms and the constant-speed parametrization of ``combine``."""
    tol = default_tolerance(spec) if tol is None else tol
    d = space.dist

    def triangle(x, y, z, t):
        return d(x, z) + d(z, y) - d(x, y)

    def symmetry(x, y, z, t):
        return -abs(d(x, y) - d(y, x))

    def parametrization(x, y, z, t):
        s = float(np.clip(abs(d(x, z) - d(y, z)) / (1.0 + d(x, y)), 0.0, 1.0))
        gap = d(space.combine(x, y, s), space.combine(x, y, t)) - abs(s - t) * d(x, y)
        return -abs(gap)

    return [
        _run(space, spec, "triangle", 3, triangle, tol, 20),
        _run(space, spec, "symmetry", 3, symmetry, tol, 21),
        _run(space, spec, "geodesic_parametrization", 3, parametrization, tol, 22),
    ]
