"""Step-size schedules with a rate of divergence for the sum of squared steps."""

import math
from fractions import Fraction

INT64_MAX = 2 ** 63 - 1


class ScheduleError(ValueError):
    pass


class StepSchedule:
    """Positive steps ``gamma_n`` plus a witness ``theta`` with
    ``sum_{n <= theta(K)} gamma_n**2 >= K`` for every ``K``.

    Kinds:

    ``constant``       gamma_n = gamma, theta(K) = ceil(K / gamma**2)
    ``harmonic-sqrt``  gamma_n = c / sqrt(n + 1), theta(K) = ceil(exp(K / c**2))
    ``custom-table``   explicit steps (the last one repeats) and an explicit theta table
    """

    def __init__(self, kind, gamma=None, c=None, gammas=None, thetas=None):
        self.kind = kind
        if kind == "constant":
            if gamma is None or not gamma > 0:
                raise ScheduleError("constant schedule needs gamma > 0")
            self.gamma_value = float(gamma)
        elif kind == "harmonic-sqrt":
            if c is None or not c > 0:
                raise ScheduleError("harmonic-sqrt schedule needs c > 0")
            self.c = float(c)
        elif kind == "custom-table":
            if not gammas or any(not g > 0 for g in gammas):
                raise ScheduleError("custom-table needs a nonempty list of positive steps")
            self.gammas = [float(g) for g in gammas]
            self.thetas = None if thetas is None else [int(v) for v in thetas]
        else:
            raise ScheduleError(f"unknown schedule kind {kind!r}")

    @classmethod
    def constant(cls, gamma):
        return cls("constant", gamma=gamma)

    @classmethod
    def harmonic_sqrt(cls, c=1.0):
        return cls("harmonic-sqrt", c=c)

    @classmethod
    def table(cls, gammas, thetas=None):
        return cls("custom-table", gammas=gammas, thetas=thetas)

    def gamma(self, n):
        if self.kind == "constant":
            return self.gamma_value
        if self.kind == "harmonic-sqrt":
            return self.c / math.sqrt(n + 1)
        return self.gammas[min(n, len(self.gammas) - 1)]

    def theta(self, K):
        """Rate of divergence; exact integer arithmetic where the kind allows."""
        K = int(K)
        if K < 0:
            raise ScheduleError("theta is defined on the naturals")
        if self.kind == "constant":
            g2 = Fraction(self.gamma_value) ** 2
            out = math.ceil(Fraction(K) / g2)
        elif self.kind == "harmonic-sqrt":
            expo = K / self.c ** 2
            if expo > math.log(INT64_MAX):
                raise OverflowError(f"theta({K}) exceeds 64-bit range")
            out = math.ceil(math.exp(expo))
        else:
            if self.thetas is None:
                out = self._table_theta(K)
            elif K < len(self.thetas):
                out = self.thetas[K]
            else:
                raise ScheduleError(f"theta table has no entry for K={K}")
        if out > INT64_MAX:
            raise OverflowError(f"theta({K}) exceeds 64-bit range")
        return int(out)

    def _table_theta(self, K):
        # smallest N with partial sum >= K
        total, n = 0.0, 0
        while True:
            total += self.gamma(n) ** 2
            if total >= K:
                return n
            n += 1
            if n > INT64_MAX:
                raise OverflowError("theta search overflow")

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "gamma": self.gamma_value}
        if self.kind == "harmonic-sqrt":
            return {"kind": "harmonic-sqrt", "c": self.c}
        d = {"kind": "custom-table", "gammas": list(self.gammas)}
        if self.thetas is not None:
            d["thetas"] = list(self.thetas)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        return cls(kind, **d)

    def __repr__(self):
        return f"StepSchedule({self.to_dict()})"
