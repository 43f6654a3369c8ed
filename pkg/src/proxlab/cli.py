"""Command-line runner: ``proxlab {validate,run,check-family,certify} --config FILE``.

Exit codes: 0 success, 1 property or rate failure, 2 usage or configuration
error, 3 certification precondition failure.
"""

import argparse
import json
import os
import sys
import tempfile

from .geometry import validate_busemann, validate_cat0, validate_geodesic, validate_quasilinearization
from .instances import INEQUALITIES, ConfigError, bundled_configs, bundled_path, load_experiment
from .mappings import (check_c1, check_jointly_fne, check_jointly_p2, check_uniform_fne, check_uniform_p2,
                       implication_chain)
from .ppa import PPAError, run_ppa, run_monitors
from .rates import PASS, PRECONDITION, certify_rate

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PRECONDITION = 0, 1, 2, 3

SPACE_CHECKS = {
    "cat0": validate_cat0,
    "busemann": lambda s, spec: [validate_busemann(s, spec)],
    "quasilinearization": validate_quasilinearization,
    "geodesic": validate_geodesic,
}


def write_atomic(path, text):
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _say(msg):
    print(msg, file=sys.stderr)


def _resolve_config(path):
    if os.path.exists(path) or os.sep in path:
        return path
    if path + ".json" in bundled_configs() or path in bundled_configs():
        return bundled_path(path)
    return path


def cmd_validate(args, exp):
    names = exp.checks or tuple(SPACE_CHECKS)
    unknown = set(names) - set(SPACE_CHECKS)
    if unknown:
        raise ConfigError(f"unknown space checks {sorted(unknown)}")
    reports = [r for name in names for r in SPACE_CHECKS[name](exp.space, exp.sample)]
    for r in reports:
        _say(r.summary())
    write_atomic(os.path.join(args.out, "validate.json"),
                 _dump({"space": exp.space.to_dict(), "sample": exp.sample.to_dict(exp.space),
                        "reports": [r.to_dict() for r in reports]}))
    violated = any(not r.clean for r in reports)
    if args.expect_violation:
        return EXIT_OK if violated else EXIT_FAIL
    return EXIT_FAIL if violated else EXIT_OK


def cmd_run(args, exp):
    if exp.family is None or exp.x0 is None:
        raise ConfigError("run needs an instance and x0")
    trace = run_ppa(exp.family, exp.x0, exp.n_max, p=exp.p)
    reports = run_monitors(exp.family, trace, exp.monitors, b=exp.b)
    trace.metadata["monitors"] = {r.inequality: r.to_dict() for r in reports}
    for r in reports:
        _say(r.summary())
    write_atomic(os.path.join(args.out, "trace.csv"), trace.to_csv())
    write_atomic(os.path.join(args.out, "trace.json"), trace.to_json() + "\n")
    return EXIT_FAIL if any(not r.clean for r in reports) else EXIT_OK


def _family_reports(exp, names):
    fam, space, spec = exp.family, exp.space, exp.sample
    out = []
    for name in names:
        if name == "jointly_fne":
            out.append(check_jointly_fne(fam, space, exp.pairs, spec).to_dict())
        elif name == "jointly_p2":
            out.append(check_jointly_p2(fam, space, exp.pairs, spec).to_dict())
        elif name == "c1":
            out.append(check_c1(fam, space, exp.pairs, spec).to_dict())
        elif name == "chain":
            ch = implication_chain(fam, space, exp.pairs, spec)
            d = ch.to_dict()
            d.update(inequality="chain", violations=ch.fne_not_p2 + ch.p2_not_c1)
            out.append(d)
        else:
            if exp.modulus is None or exp.p is None or exp.b is None:
                raise ConfigError(f"{name} needs modulus, p and b in the config")
            check = check_uniform_p2 if name == "uniform_p2" else check_uniform_fne
            for n in sorted({n for pq in exp.pairs for n in pq}):
                r = check(fam.member(n), space, (exp.p, exp.b), exp.modulus.scaled(fam.gamma(n)), spec)
                r.inequality = f"{name}[n={n}]"
                out.append(r.to_dict())
    return out


def cmd_check_family(args, exp):
    if exp.family is None:
        raise ConfigError("check-family needs an instance")
    names = exp.inequalities if args.inequalities is None else tuple(
        s for s in args.inequalities.split(",") if s.strip())
    if not names:
        raise ConfigError("empty inequality list")
    unknown = set(names) - set(INEQUALITIES)
    if unknown:
        raise ConfigError(f"unknown inequalities {sorted(unknown)}; choose from {', '.join(INEQUALITIES)}")
    reports = _family_reports(exp, names)
    for r in reports:
        _say(f"{r['inequality']}: {r['violations']} violations")
    write_atomic(os.path.join(args.out, "family.json"),
                 _dump({"family": exp.name, "pairs": exp.pairs, "reports": reports}))
    violated = any(r["violations"] or (r.get("details") or {}).get("image_escapes") for r in reports)
    if args.expect_violation:
        return EXIT_OK if violated else EXIT_FAIL
    return EXIT_FAIL if violated else EXIT_OK


def cmd_certify(args, exp):
    K = exp.K if args.k is None else args.k
    if K < 0:
        raise ConfigError("K must be a natural number")
    cert = certify_rate(exp.rate_instance(), K, spec=exp.sample)
    write_atomic(os.path.join(args.out, "certificate.json"), cert.to_json() + "\n")
    write_atomic(os.path.join(args.out, "certificate.md"), cert.to_markdown())
    _say(f"{cert.instance_id}: {cert.verdict}")
    if cert.verdict == PASS:
        return EXIT_OK
    return EXIT_PRECONDITION if cert.verdict == PRECONDITION else EXIT_FAIL


COMMANDS = {"validate": cmd_validate, "run": cmd_run, "check-family": cmd_check_family, "certify": cmd_certify}


def build_parser():
    parser = argparse.ArgumentParser(prog="proxlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("validate", "sampled geometry checks for a space"),
                        ("run", "run the proximal point iteration and export a trace"),
                        ("check-family", "check joint and uniform inequalities of a family"),
                        ("certify", "certify the explicit convergence rate")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True,
                       help="experiment JSON file, or the name of a bundled config")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name in ("validate", "check-family"):
            p.add_argument("--expect-violation", action="store_true",
                           help="negative control: succeed only if a violation is found")
        if name == "check-family":
            p.add_argument("--inequalities", default=None,
                           help=f"comma-separated subset of {','.join(INEQUALITIES)}")
        if name == "certify":
            p.add_argument("--k", type=int, default=None, help="largest k in the rate table")
    sub.add_parser("list-configs", help="print the bundled config names")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list-configs":
        print("\n".join(bundled_configs()))
        return EXIT_OK
    try:
        exp = load_experiment(_resolve_config(args.config), seed=args.seed)
        return COMMANDS[args.command](args, exp)
    except ConfigError as exc:
        _say(f"config error: {exc}")
        return EXIT_USAGE
    except (PPAError, OverflowError) as exc:
        _say(f"error: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
