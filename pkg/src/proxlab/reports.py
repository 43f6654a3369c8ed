"""Sampled-inequality reports.

Every checker in the package evaluates a *slack* per sample (right-hand side
minus left-hand side, so that a nonnegative slack means the inequality holds)
and condenses the slacks into a :class:`CheckReport`.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

DEFAULT_TOL = 1e-9


@dataclass
class CheckReport:
    """Outcome of one sampled inequality.

    ``worst_violation`` is the smallest slack seen (negative means violated)
    and ``witness`` is the JSON-ready tuple that produced it.  Slacks in
    ``[-tolerance, 0)`` count as warnings, not violations.
    """

    inequality: str
    samples: int
    violations: int
    worst_violation: float
    witness: Any
    tolerance: float
    warnings: int = 0
    details: dict = field(default_factory=dict)
    slacks: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def clean(self):
        return (self.violations == 0 and not self.details.get("image_escapes", 0)
                and self.details.get("precondition_clean", True))

    def merge(self, other):
        """Combine two reports of the same inequality (associative)."""
        if other.inequality != self.inequality:
            raise ValueError("cannot merge reports of different inequalities")
        worst, witness = self.worst_violation, self.witness
        if other.samples and (not self.samples or other.worst_violation < worst):
            worst, witness = other.worst_violation, other.witness
        slacks = None
        if self.slacks is not None and other.slacks is not None:
            slacks = np.concatenate([self.slacks, other.slacks])
        details = dict(self.details)
        for key, value in other.details.items():
            if isinstance(value, (int, float)) and isinstance(details.get(key), (int, float)):
                details[key] = details[key] + value
            else:
                details.setdefault(key, value)
        return CheckReport(
            inequality=self.inequality,
            samples=self.samples + other.samples,
            violations=self.violations + other.violations,
            worst_violation=worst,
            witness=witness,
            tolerance=max(self.tolerance, other.tolerance),
            warnings=self.warnings + other.warnings,
            details=details,
            slacks=slacks,
        )

    def to_dict(self):
        out = {
            "inequality": self.inequality,
            "samples": int(self.samples),
            "violations": int(self.violations),
            "worst_violation": _json_float(self.worst_violation),
            "witness": self.witness,
            "tolerance": float(self.tolerance),
            "warnings": int(self.warnings),
        }
        if self.details:
            out["details"] = self.details
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    def summary(self):
        status = "clean" if self.clean else "VIOLATED"
        return (f"{self.inequality}: {status} ({self.violations}/{self.samples} violations, "
                f"worst slack {self.worst_violation:.3e}, tol {self.tolerance:.1e})")


def _json_float(value):
    value = float(value)
    if np.isfinite(value):
        return value
    return None


def collect(inequality, slacks, witness_of, tolerance, details=None, keep_slacks=True):
    """Build a report from an array of slacks.

    ``witness_of(i)`` is only called for the worst sample.
    """
    slacks = np.asarray(slacks, dtype=float)
    n = slacks.size
    if n == 0:
        return CheckReport(inequality, 0, 0, float("inf"), None, tolerance,
                           details=dict(details or {}),
                           slacks=slacks if keep_slacks else None)
    # NaN slacks count as violations
    bad = np.isnan(slacks)
    work = np.where(bad, -np.inf, slacks)
    i = int(np.argmin(work))
    violations = int(np.count_nonzero(work < -tolerance))
    warnings = int(np.count_nonzero((work < 0) & (work >= -tolerance)))
    return CheckReport(
        inequality=inequality,
        samples=n,
        violations=violations,
        worst_violation=float(work[i]),
        witness=witness_of(i),
        tolerance=float(tolerance),
        warnings=warnings,
        details=dict(details or {}),
        slacks=slacks if keep_slacks else None,
    )


def worker_count():
    """Worker cap from ``PROXLAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("PROXLAB_THREADS", "1")))
    except ValueError:
        return 1


def map_chunks(fn, items, workers=None, chunk=256):
    """Apply ``fn`` to every item, possibly across threads, preserving order.

    Results are independent of the worker count because chunks are fixed and
    reassembled in input order.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= chunk:
        return [fn(item) for item in items]
    parts = [items[i:i + chunk] for i in range(0, len(items), chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        done = list(pool.map(lambda part: [fn(item) for item in part], parts))
    return [r for part in done for r in part]
