"""The abstract proximal point iteration ``x_{n+1} = T_n x_n`` and its monitors."""

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .reports import collect
from .resolvents import SubproblemError

N_MAX_CAP = 10_000_000
FULL_RETENTION = 10_000
CSV_HEADER = ("n", "gamma", "step_dist", "residual", "dist_to_p", "cum_sq")
TRACE_FORMAT_VERSION = 1


class PPAError(RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"resolvent evaluation failed at step n={index}: {cause}")
        self.index = index
        self.cause = cause


@dataclass
class IterationTrace:
    """Per-step record of a run.

    ``step_dist[n] = d(x_n, x_{n+1})``, ``residual[n] = step_dist[n] / gamma[n]``
    and ``cum_sq[n] = sum_{k<=n} step_dist[k]**2`` for ``n < n_max``;
    ``dist_to_p`` has ``n_max + 1`` entries when a reference point was given.
    ``points`` maps step index to the retained iterate.
    """

    space: object
    gamma: np.ndarray
    step_dist: np.ndarray
    residual: np.ndarray
    cum_sq: np.ndarray
    dist_to_p: object = None
    points: dict = field(default_factory=dict)
    p: object = None
    eps_eval: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def n_max(self):
        return int(self.step_dist.size)

    def point(self, n):
        return self.points[n]

    def first_crossing(self, level):
        """min{n : d(x_n, p) <= level}, or None."""
        hits = np.nonzero(self.dist_to_p <= level)[0]
        return int(hits[0]) if hits.size else None

    def to_csv(self):
        buf = io.StringIO()
        buf.write(",".join(CSV_HEADER) + "\n")
        fmt = lambda v: repr(float(v))  # noqa: E731
        for n in range(self.n_max + 1):
            last = n == self.n_max
            row = [
                str(n),
                "" if last else fmt(self.gamma[n]),
                "" if last else fmt(self.step_dist[n]),
                "" if last else fmt(self.residual[n]),
                "" if self.dist_to_p is None else fmt(self.dist_to_p[n]),
                "" if last else fmt(self.cum_sq[n]),
            ]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def to_json(self):
        body = {
            "format_version": TRACE_FORMAT_VERSION,
            "metadata": self.metadata,
            "n_max": self.n_max,
            "eps_eval": self.eps_eval,
            "reference_point": None if self.p is None else self.space.to_json(self.p),
            "columns": list(CSV_HEADER),
            "final_point": self.space.to_json(self.points[max(self.points)]) if self.points else None,
        }
        return json.dumps(body, sort_keys=True, indent=2)


def retained_indices(n_max):
    """Every step up to ``FULL_RETENTION``, a logarithmic grid above."""
    if n_max <= FULL_RETENTION:
        return None
    keep = set(range(1001))
    keep.update(int(v) for v in np.unique(np.geomspace(1000, n_max, 2000).astype(np.int64)))
    keep.add(n_max)
    return keep


def run_ppa(family, x0, n_max, p=None, retain=None, monitors=()):
    """Iterate ``x_{n+1} = T_n x_n`` for ``n < n_max``.

    ``p`` (default: the family's declared fixed point) enables the
    ``dist_to_p`` column.  ``retain`` is an optional set of indices whose
    iterates are kept (default: all up to 10^4 steps, then thinned).
    Named ``monitors`` are evaluated after the run and stored in
    ``trace.metadata["monitors"]``.
    """
    if int(n_max) != n_max or n_max < 1:
        raise ValueError("n_max must be a positive integer")
    if n_max > N_MAX_CAP:
        raise ValueError(f"n_max={n_max} exceeds the cap of {N_MAX_CAP}")
    space = family.space
    p = family.fixed_point if p is None else p
    keep = retain_indices_or_default(retain, n_max)
    gam = np.empty(n_max)
    step = np.empty(n_max)
    dp = np.empty(n_max + 1) if p is not None else None
    points = {}
    d = space.dist
    member = family.member
    x = x0
    if dp is not None:
        dp[0] = d(x, p)
    eps = 0.0
    for n in range(n_max):
        if keep is None or n in keep:
            points[n] = x
        T = member(n)
        try:
            y = T(x)
        except SubproblemError as exc:
            raise PPAError(n, exc) from exc
        if T.eps_eval > eps:
            eps = T.eps_eval
        gam[n] = family.gamma(n)
        step[n] = d(x, y)
        if dp is not None:
            dp[n + 1] = d(y, p)
        x = y
    points[n_max] = x
    trace = IterationTrace(space, gam, step, step / gam, np.cumsum(step * step), dp, points, p, eps,
                           {"family": family.name, "schedule": family.schedule.to_dict(), "n_max": int(n_max)})
    if monitors:
        trace.metadata["monitors"] = {r.inequality: r.to_dict() for r in run_monitors(family, trace, monitors)}
    return trace


def retain_indices_or_default(retain, n_max):
    if retain is None:
        return retained_indices(n_max)
    return set(retain)


def trajectory_tolerance(trace, b=None, base=1e-8):
    b = b if b is not None else (trace.dist_to_p[0] if trace.dist_to_p is not None else 1.0)
    return base + 4.0 * trace.eps_eval * max(b, 1.0)


def monitor_fejer(trace, p=None, tol=None):
    """Per step: d(x_{n+1}, p) <= d(x_n, p) and the stronger
    d^2(x_{n+1}, p) <= d^2(x_n, p) - d^2(x_n, x_{n+1}).

    The reported slack per step is the smaller of the two; details carry each
    one separately, together with boundedness d(x_n, p) <= d(x_0, p).
    """
    if trace.dist_to_p is None:
        raise ValueError("trace has no dist_to_p column; run with a reference point")
    tol = trajectory_tolerance(trace) if tol is None else tol
    dp, s = trace.dist_to_p, trace.step_dist
    weak = dp[:-1] - dp[1:]
    strong = dp[:-1] ** 2 - dp[1:] ** 2 - s ** 2
    bounded = dp[0] - dp[1:]
    details = {
        "worst_weak": float(weak.min()),
        "worst_strong": float(strong.min()),
        "weak_violations": int(np.count_nonzero(weak < -tol)),
        "strong_violations": int(np.count_nonzero(strong < -tol)),
        "bounded_violations": int(np.count_nonzero(bounded < -tol)),
    }
    return collect("fejer", np.minimum(weak, strong), lambda i: [int(i)], tol, details)


def monitor_residual(trace, K=10, tol=None):
    """Residuals d(x_n, x_{n+1}) / gamma_n must be nonincreasing.

    ``details["first_below"][k]`` is the first step whose residual is at most
    ``1/(k+1)`` (None if never), for ``k = 0..K``.
    """
    tol = trajectory_tolerance(trace) if tol is None else tol
    r = trace.residual
    slacks = r[:-1] - r[1:] if r.size > 1 else np.zeros(0)
    first = {}
    for k in range(K + 1):
        hits = np.nonzero(r <= 1.0 / (k + 1))[0]
        first[str(k)] = int(hits[0]) if hits.size else None
    return collect("residual_monotone", slacks, lambda i: [int(i)], tol, {"first_below": first})


def monitor_cumulative(trace, b, tol=None):
    """sum_{k<=n} d^2(x_k, x_{k+1}) <= b^2 for every n."""
    tol = trajectory_tolerance(trace, b) if tol is None else tol
    return collect("cumulative_sq", b * b - trace.cum_sq, lambda i: [int(i)], tol,
                   {"b": float(b), "total": float(trace.cum_sq[-1])})


def monitor_asymptotic_regularity(family, trace, probes, tol=None, max_points=2000):
    """d(x_n, T_m x_n) <= 2 d(x_n, x_{n+1}) + gamma_m * residual_n at retained steps."""
    tol = trajectory_tolerance(trace) if tol is None else tol
    space = trace.space
    idx = sorted(n for n in trace.points if n < trace.n_max)
    if len(idx) > max_points:
        pick = np.unique(np.linspace(0, len(idx) - 1, max_points).astype(int))
        idx = [idx[i] for i in pick]
    slacks, wit, last = [], [], {}
    for m in probes:
        Tm = family.member(m)
        gm = family.gamma(m)
        for n in idx:
            x = trace.points[n]
            dist_m = space.dist(x, Tm(x))
            bound = 2.0 * trace.step_dist[n] + gm * trace.residual[n]
            slacks.append(bound - dist_m)
            wit.append((n, m))
            last[str(m)] = float(dist_m)
    return collect("asymptotic_regularity", slacks, lambda i: list(wit[i]), tol,
                   {"final_probe_distance": last})


def run_monitors(family, trace, names, b=None, probes=(0, 1)):
    out = []
    for name in names:
        if name == "fejer" and trace.dist_to_p is not None:
            out.append(monitor_fejer(trace))
        elif name == "residual":
            out.append(monitor_residual(trace))
        elif name == "cumulative" and trace.dist_to_p is not None:
            out.append(monitor_cumulative(trace, trace.dist_to_p[0] if b is None else b))
        elif name == "asymptotic_regularity":
            out.append(monitor_asymptotic_regularity(family, trace, probes))
    return out


def verify_divergence_rate(schedule, K_max, max_terms=50_000_000):
    """Check sum_{n=0}^{theta(K)} gamma_n^2 >= K for K = 1..K_max."""
    if int(K_max) != K_max or K_max < 1:
        raise ValueError("K_max must be a positive integer")
    thetas = [schedule.theta(K) for K in range(1, K_max + 1)]
    top = max(thetas)
    if top + 1 > max_terms:
        raise ValueError(f"theta({K_max}) = {top} is too large to verify by summation")
    g = np.array([schedule.gamma(n) for n in range(top + 1)]) if schedule.kind == "custom-table" else None
    if g is None:
        n = np.arange(top + 1, dtype=float)
        g = np.full(top + 1, schedule.gamma(0)) if schedule.kind == "constant" else schedule.c / np.sqrt(n + 1)
    partial = np.cumsum(g * g)
    slacks = np.array([partial[t] - K for K, t in zip(range(1, K_max + 1), thetas)])
    return collect("divergence_rate", slacks, lambda i: {"K": i + 1, "theta": thetas[i],
                                                         "partial_sum": float(partial[thetas[i]])},
                   0.0, {"thetas": thetas})

