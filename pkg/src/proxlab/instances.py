"""Experiment configurations: JSON in, (space, family, start point, reference point) out."""

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

from .geometry import Hyperboloid, SampleSpec, space_from_dict
from .mappings import MappingFamily, Modulus, identity_map
from .ppa import N_MAX_CAP
from .rates import RateInstance
from .resolvents import (ConvexProblem, MonotoneOperator, SubproblemConfig, build_family, map_from_dict,
                         mismatched_family)
from .schedules import StepSchedule

MONITORS = ("fejer", "residual", "cumulative", "asymptotic_regularity")
INEQUALITIES = ("jointly_fne", "jointly_p2", "c1", "uniform_p2", "uniform_fne", "chain")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def parse_point(space, obj):
    """Backend point from JSON; hyperboloid points may be given as ``{"spatial": [...]}``."""
    if isinstance(obj, dict):
        if "spatial" in obj and isinstance(space, Hyperboloid):
            return space.from_spatial(obj["spatial"])
        raise ConfigError(f"cannot read point {obj!r}")
    return space.from_json(obj)


@dataclass
class Experiment:
    name: str
    space: Any
    family: Optional[MappingFamily] = None
    x0: Any = None
    p: Any = None
    b: Optional[float] = None
    n_max: int = 1000
    monitors: tuple = ()
    modulus: Optional[Modulus] = None
    sample: SampleSpec = field(default_factory=SampleSpec)
    pairs: list = field(default_factory=lambda: [[0, 0], [0, 1], [1, 3], [5, 2]])
    inequalities: tuple = ()
    K: int = 5
    checks: tuple = ()
    raw: dict = field(default_factory=dict)

    def rate_instance(self):
        if self.family is None or self.modulus is None or self.p is None or self.b is None:
            raise ConfigError("certification needs an instance, a modulus, p and b")
        return RateInstance(self.family, self.x0, self.p, self.b, self.modulus, self.name)


def _family(inst, schedule, space, cfg):
    kind = inst.get("constructor")
    if kind == "identity":
        return MappingFamily(lambda n, g: identity_map(space), schedule, space, name="identity")
    if kind == "moreau-yosida":
        target = ConvexProblem.from_dict(_points_in(inst["problem"], space), space)
    elif kind == "nonexpansive":
        target = map_from_dict(inst["map"], space)
    elif kind == "monotone":
        target = MonotoneOperator.from_dict(inst["operator"], space)
    else:
        raise ConfigError(f"unknown constructor {kind!r}")
    if "actual_schedule" in inst:
        actual = StepSchedule.from_dict(inst["actual_schedule"])
        return mismatched_family(kind, target, schedule, actual, space, cfg)
    return build_family(kind, target, schedule, space, cfg)


def _points_in(problem, space):
    # allow {"spatial": ...} anchors by pre-converting them
    d = dict(problem)
    for key in ("anchors",):
        if key in d:
            d[key] = [space.to_json(parse_point(space, a)) for a in d[key]]
    if "anchor" in d:
        d["anchor"] = space.to_json(parse_point(space, d["anchor"]))
    return d


def experiment_from_dict(cfg, seed=None):
    """Build an :class:`Experiment`; every failure surfaces as :class:`ConfigError`."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    try:
        if "seed" not in cfg and seed is None:
            raise ConfigError("config needs an explicit seed")
        seed = int(cfg["seed"] if seed is None else seed)
        space = space_from_dict(cfg["space"])
        sample = dict(cfg.get("sample", {}))
        sample["seed"] = seed
        if "center" in sample and sample["center"] is not None:
            sample["center"] = space.to_json(parse_point(space, sample["center"]))
        spec = SampleSpec.from_dict(sample, space)
        exp = Experiment(cfg.get("name", "experiment"), space, sample=spec, raw=cfg)
        exp.checks = tuple(cfg.get("checks", ()))
        if "instance" in cfg:
            schedule = StepSchedule.from_dict(cfg.get("schedule", {"kind": "constant", "gamma": 1.0}))
            sub = SubproblemConfig.from_dict(cfg.get("subproblem"))
            exp.family = _family(cfg["instance"], schedule, space, sub)
            exp.family.name = exp.name
        if "x0" in cfg:
            exp.x0 = parse_point(space, cfg["x0"])
        exp.p = parse_point(space, cfg["p"]) if cfg.get("p") is not None else (
            exp.family.fixed_point if exp.family is not None else None)
        if exp.p is None and exp.family is not None and cfg["instance"].get("constructor") == "identity":
            exp.p = exp.x0  # every point is fixed; measure against the start
        if cfg.get("b") is not None:
            exp.b = float(cfg["b"])
            if not exp.b > 0:
                raise ConfigError("b must be positive")
        n_max = cfg.get("n_max", 1000)
        if int(n_max) != n_max or n_max < 1:
            raise ConfigError("n_max must be a positive integer")
        if n_max > N_MAX_CAP:
            raise ConfigError(f"n_max={n_max} exceeds the cap of {N_MAX_CAP}")
        exp.n_max = int(n_max)
        exp.monitors = tuple(cfg.get("monitors", ()))
        bad = set(exp.monitors) - set(MONITORS)
        if bad:
            raise ConfigError(f"unknown monitors {sorted(bad)}")
        if "modulus" in cfg:
            exp.modulus = Modulus.from_dict(cfg["modulus"])
        if "pairs" in cfg:
            exp.pairs = [list(map(int, pq)) for pq in cfg["pairs"]]
        exp.inequalities = tuple(cfg.get("inequalities", ()))
        exp.K = int(cfg.get("K", 5))
        return exp
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from exc


def load_experiment(path, seed=None):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return experiment_from_dict(cfg, seed)


def bundled_configs():
    """Names of the configurations shipped with the package."""
    root = resources.files("proxlab") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name):
    """Filesystem path of a bundled configuration (``name`` with or without ``.json``)."""
    name = name if name.endswith(".json") else name + ".json"
    return str(resources.files("proxlab") / "configs" / name)
