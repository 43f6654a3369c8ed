"""Explicit rates of convergence for the uniform case, and their empirical certification.

``sigma(b, theta, k) = theta(ceil(b^2 (k+1)^2))`` is a rate for the residuals
``d(x_n, x_{n+1}) / gamma_n -> 0``;
``psi(b, theta, phi, k) = sigma(b, theta, ceil(2b / phi(1/(k+1)))) + 1`` is a
rate for ``d(x_n, p) -> 0`` when every ``T_n`` is uniformly (P2) on the ball
of radius ``b`` around ``p`` with modulus ``gamma_n * phi``.
"""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .geometry import SampleSpec
from .mappings import check_uniform_p2, near_fixed_separation_slack
from .ppa import monitor_residual, run_ppa
from .reports import collect
from .schedules import INT64_MAX

PASS, RATE_FAILURE, PRECONDITION = "pass", "rate-failure", "precondition-violation"
PHI_FLOOR = 1e-300


def _theta_fn(theta):
    return theta.theta if hasattr(theta, "theta") else theta


def _guard(value, what):
    if value > INT64_MAX:
        raise OverflowError(f"{what} = {value} exceeds 64-bit range")
    return int(value)


def sigma(b, theta, k):
    """Residual rate; ``theta`` is a schedule or a callable on the naturals."""
    if not b > 0:
        raise ValueError("b must be positive")
    if int(k) != k or k < 0:
        raise ValueError("k must be a natural number")
    arg = math.ceil(Fraction(b) ** 2 * (int(k) + 1) ** 2)
    return _guard(_theta_fn(theta)(_guard(arg, "b^2 (k+1)^2")), "sigma")


def psi_index(b, phi, k):
    """``ceil(2b / phi(1/(k+1)))``, exactly for integer-power moduli."""
    t = Fraction(1, int(k) + 1)
    exact = phi.exact(t)
    if exact is not None:
        return _guard(math.ceil(2 * Fraction(b) / exact), "2b/phi")
    val = float(phi(float(t)))
    if not val >= PHI_FLOOR:
        raise ValueError(f"phi(1/(k+1)) = {val!r} is below {PHI_FLOOR}")
    return _guard(math.ceil(2.0 * float(b) / val), "2b/phi")


def psi(b, theta, phi, k):
    """Rate of convergence of the iterates to the unique fixed point in the ball."""
    if int(k) != k or k < 0:
        raise ValueError("k must be a natural number")
    return _guard(sigma(b, theta, psi_index(b, phi, k)) + 1, "psi")


@dataclass
class RateInstance:
    family: Any
    x0: Any
    p: Any
    b: float
    phi: Any
    id: str = "instance"


@dataclass
class RateCertificate:
    instance_id: str
    b: float
    schedule: dict
    modulus: dict
    eps_eval: float
    K: int
    rows: list = field(default_factory=list)
    residual_rows: list = field(default_factory=list)
    preconditions: list = field(default_factory=list)
    verdict: str = PASS
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.verdict == PASS

    def to_dict(self):
        return {
            "instance": self.instance_id,
            "b": self.b,
            "schedule": self.schedule,
            "modulus": self.modulus,
            "eps_eval": self.eps_eval,
            "K": self.K,
            "rate_table": self.rows,
            "residual_table": self.residual_rows,
            "preconditions": self.preconditions,
            "verdict": self.verdict,
            "notes": self.notes,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_markdown(self):
        lines = [
            f"# Rate certificate: {self.instance_id}",
            "",
            f"- verdict: **{self.verdict}**",
            f"- b = {self.b}, schedule = `{json.dumps(self.schedule, sort_keys=True)}`, "
            f"modulus = `{json.dumps(self.modulus, sort_keys=True)}`",
            f"- evaluation accuracy eps_eval = {self.eps_eval:g} "
            f"(iterate threshold 1/(k+1) + 2 eps_eval)",
            "",
        ]
        if self.rows:
            lines += ["| k | Psi(k) | d(x_Psi(k), p) | 1/(k+1) | first n with d <= 1/(k+1) | ok |",
                      "|---|---|---|---|---|---|"]
            for r in self.rows:
                lines.append(f"| {r['k']} | {r['psi']} | {r['distance']:.3e} | {r['threshold']:.4f} | "
                             f"{r['first_crossing']} | {'yes' if r['pass'] else 'NO'} |")
            lines += ["", "| k | Sigma(k) | residual at Sigma(k) | 1/(k+1) | ok |", "|---|---|---|---|---|"]
            for r in self.residual_rows:
                lines.append(f"| {r['k']} | {r['sigma']} | {r['residual']:.3e} | {r['threshold']:.4f} | "
                             f"{'yes' if r['pass'] else 'NO'} |")
        if self.preconditions:
            lines += ["", "Preconditions:"]
            lines += [f"- {p['inequality']}: {p['violations']} violations / {p['samples']} samples"
                      for p in self.preconditions]
        if self.notes:
            lines += [""] + [f"- {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def precondition_indices(N):
    idx = {0, 1, 2, 3, N - 1, N // 2}
    return sorted(i for i in idx if 0 <= i < max(N, 1))


def certify_rate(instance, K, spec=None, tol=None):
    """Run the iteration up to ``psi(K)`` and compare against the rate table.

    Preconditions (``d(x0, p) <= b``, sampled uniform (P2) on the ball with
    modulus ``gamma_n * phi``, monotone residuals) are checked separately and
    yield the ``precondition-violation`` verdict instead of a rate failure.
    """
    fam, phi, b, p = instance.family, instance.phi, instance.b, instance.p
    space = fam.space
    theta = fam.schedule
    spec = spec or SampleSpec(count=300, seed=0)
    psis = [psi(b, theta, phi, k) for k in range(K + 1)]
    sigmas = [sigma(b, theta, k) for k in range(K + 1)]
    N = max(psis[-1], max(sigmas) + 1)
    cert = RateCertificate(instance.id, float(b), theta.to_dict(), phi.to_dict(), 0.0, int(K))

    d0 = space.dist(instance.x0, p)
    if d0 > b:
        cert.verdict = PRECONDITION
        cert.notes.append(f"d(x0, p) = {d0:.6g} exceeds b = {b}")
        return cert
    for n in precondition_indices(N):
        T = fam.member(n)
        rep = check_uniform_p2(T, space, (p, b), phi.scaled(fam.gamma(n)), spec)
        rep.inequality = f"uniform_p2[n={n}]"
        cert.preconditions.append(rep.to_dict())
        if not rep.clean:
            cert.verdict = PRECONDITION
    if cert.verdict == PRECONDITION:
        cert.notes.append("sampled uniform (P2) precondition failed; rate not evaluated")
        return cert

    trace = run_ppa(fam, instance.x0, N, p=p, retain=set())
    eps = trace.eps_eval
    cert.eps_eval = eps
    res_tol = (1e-8 + 4.0 * eps * max(b, 1.0)) if tol is None else tol
    c2 = monitor_residual(trace, K=K, tol=res_tol)
    cert.preconditions.append(c2.to_dict())
    if not c2.clean:
        cert.verdict = PRECONDITION
        cert.notes.append("residuals are not monotone (C2 fails); rate not asserted")
        return cert

    ok = True
    for k in range(K + 1):
        thr = 1.0 / (k + 1)
        dist = float(trace.dist_to_p[psis[k]])
        passed = dist <= thr + 2.0 * eps
        ok &= passed
        cert.rows.append({"k": k, "psi": psis[k], "distance": dist, "threshold": thr,
                          "first_crossing": trace.first_crossing(thr), "pass": bool(passed)})
        r = float(trace.residual[sigmas[k]])
        rpass = r <= thr + res_tol
        ok &= rpass
        cert.residual_rows.append({"k": k, "sigma": sigmas[k], "residual": r, "threshold": thr,
                                   "pass": bool(rpass)})
    # the guarantee covers every n >= psi(k), not only psi(k) itself
    tail = trace.dist_to_p
    for row in cert.rows:
        worst_after = float(tail[row["psi"]:].max())
        row["max_distance_after"] = worst_after
        if worst_after > row["threshold"] + 2.0 * eps:
            row["pass"] = False
            ok = False
    cert.verdict = PASS if ok else RATE_FAILURE
    return cert


def unique_fixed_point_check(instance, candidates=None, eps=1e-6, indices=(0, 1), spec=None):
    """Near-fixed points of ``T_n`` inside the ball must cluster at ``p``.

    For each candidate ``z`` with ``d(T_n z, z) <= eps`` the slack of
    ``phi_n(d(T_n z, T_n p)) <= 2 e (d(T_n z, T_n p) + e)`` is recorded, where
    ``e`` is the larger displacement of ``z`` and ``p``.  The uniform (P2)
    precondition is checked first; when it fails the report is marked with
    ``details["precondition_clean"] = False``.
    """
    fam, phi, b, p = instance.family, instance.phi, instance.b, instance.p
    space = fam.space
    spec = spec or SampleSpec(count=300, seed=0)
    pre_clean = True
    for n in indices:
        rep = check_uniform_p2(fam.member(n), space, (p, b), phi.scaled(fam.gamma(n)), spec)
        pre_clean &= rep.clean
    if candidates is None:
        rng = spec.rng(70)
        candidates = [p]
        candidates += [space.sample(rng, p, min(b, 10 * eps)) for _ in range(spec.count // 2)]
        candidates += [space.sample(rng, p, b) for _ in range(spec.count // 2)]
    slacks, wit, considered = [], [], 0
    for n in indices:
        T = fam.member(n)
        phin = phi.scaled(fam.gamma(n))
        for z in candidates:
            if space.dist(T(z), z) > eps:
                continue
            considered += 1
            slacks.append(near_fixed_separation_slack(space, T, phin, z, p))
            wit.append((n, z))
    tol = 1e-9 * (1.0 + b * b)
    return collect("unique_fixed_point", slacks, lambda i: [wit[i][0], space.to_json(wit[i][1])], tol,
                   {"precondition_clean": bool(pre_clean), "near_fixed_candidates": considered,
                    "candidates": len(candidates)})
