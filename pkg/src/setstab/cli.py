"""Command-line front end.

Every subcommand takes a built-in scenario (``--scenario``) or a JSON
scenario file (``--config``), writes a JSON report to ``--out`` (stdout
when omitted) and CSV data to ``--data-dir``. Exit codes: 0 when every
requested verdict holds (or a report is consistent), 1 when one fails,
2 when one is inconclusive, 3 on usage or input errors.

Flags can also be set through ``SETSTAB_<FLAG>`` environment variables
(``SETSTAB_SEED``, ``SETSTAB_T``, ``SETSTAB_DATA_DIR``, ...); a flag on
the command line wins.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import scenarios
from .core import InputError, Verdict, _jsonable
from .detectability import (check_alternative_condition, check_detectability, check_lemma4,
                            check_sufficient_conditions, theorem5_harness)
from .integrate import DEFAULT, integrate, integrate_closed_loop
from .limitsets import omega_limit_estimate, prolongational_limit_estimate
from .passivity import check_feedback_admissible, check_passivity, check_storage_monotone
from .scenarios import regression
from .stability import PROPERTIES, check_property

SCHEMA_VERSION = "1.0"
EXIT = {"holds": 0, "fails": 1, "inconclusive": 2}
USAGE = 3
ENV_PREFIX = "SETSTAB_"
COMMON = ("seed", "rtol", "atol", "T", "box", "samples", "out", "data_dir")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _floats(text, what):
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v != ""]
    except ValueError as exc:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from exc


def _parse_box(text, n):
    """``lo:hi,lo:hi,...`` or a single ``lo:hi`` applied to every axis."""
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    try:
        pairs = [tuple(float(v) for v in p.split(":")) for p in parts]
    except ValueError as exc:
        raise InputError(f"--box: cannot parse {text!r}") from exc
    if any(len(p) != 2 or not p[0] < p[1] for p in pairs):
        raise InputError("--box: each axis is lo:hi with lo < hi")
    if len(pairs) == 1:
        pairs = pairs * n
    if len(pairs) != n:
        raise InputError(f"--box: need 1 or {n} intervals")
    return tuple(pairs)


def _common(p):
    p.add_argument("--scenario", help="built-in scenario name")
    p.add_argument("--config", help="JSON scenario file")
    p.add_argument("--seed", type=int)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--T", type=float, help="integration horizon")
    p.add_argument("--box", help="sampling box, lo:hi per axis")
    p.add_argument("--samples", type=int)
    p.add_argument("--out", help="JSON report path (default stdout)")
    p.add_argument("--data-dir", dest="data_dir", help="directory for CSV output")


def build_parser():
    parser = _Parser(prog="setstab", description="Set-stability checks for passive systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    _common(p)
    p.add_argument("--x0", help="initial state, comma separated (default: scenario x0)")
    p.add_argument("--loop", choices=("closed", "open"), default="closed")

    p = sub.add_parser("check-passivity", help="passivity identities and feedback")
    _common(p)

    p = sub.add_parser("limit-set", help="omega or prolongational limit set cloud")
    _common(p)
    p.add_argument("--x0")
    p.add_argument("--kind", choices=("omega", "prolongational"), default="omega")
    p.add_argument("--loop", choices=("closed", "open"), default="closed")

    p = sub.add_parser("check-stability", help="one stability notion for Gamma")
    _common(p)
    p.add_argument("--property", choices=PROPERTIES, default="semi_asymptotically_stable")
    p.add_argument("--relative", choices=("none", "O", "V0"), default="none")
    p.add_argument("--loop", choices=("closed", "open"), default="closed")

    p = sub.add_parser("check-reduction", help="hypotheses and conclusion of a reduction")
    _common(p)
    p.add_argument("--theorem", choices=("attractivity", "sas", "stability", "cascade"))

    p = sub.add_parser("check-detectability", help="detectability notions and conditions")
    _common(p)
    p.add_argument("--kind", default="gamma_detect",
                   choices=("zero_state", "V_detect", "gamma_detect", "sufficient",
                            "alternative", "lemma4", "closed-loop"))
    p.add_argument("--global", dest="global_", action="store_true")

    p = sub.add_parser("scenario", help="list or regress built-in scenarios")
    p.add_argument("action", choices=("list", "run", "run-all"))
    p.add_argument("name", nargs="?")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config", help="also run this JSON scenario file")
    return parser


def _apply_env(args, environ):
    for name in COMMON:
        if getattr(args, name, "absent") is None:
            raw = environ.get(ENV_PREFIX + name.upper())
            if raw is None:
                continue
            try:
                conv = {"seed": int, "samples": int, "rtol": float, "atol": float,
                        "T": float}.get(name, str)
                setattr(args, name, conv(raw))
            except ValueError as exc:
                raise InputError(f"{ENV_PREFIX}{name.upper()}={raw!r}: {exc}") from exc
    if getattr(args, "seed", "absent") is None:
        args.seed = 0


def _scenario(args):
    if args.config:
        return scenarios.load_file(args.config)
    if args.scenario:
        return scenarios.load(args.scenario)
    raise InputError("give --scenario NAME or --config FILE")


def _cfg(args, sc):
    cfg = regression.config(sc, DEFAULT)
    kw = {}
    if args.rtol is not None:
        kw["rtol"] = args.rtol
    if args.atol is not None:
        kw["atol"] = args.atol
    if args.T is not None:
        kw["T"] = args.T
    return cfg.replace(**kw) if kw else cfg


def _with_overrides(sc, args):
    """Apply --box, --samples and --T to the scenario's settings."""
    changes = {}
    settings = dict(sc.settings)
    if args.T is not None:
        settings["horizon"] = args.T
    if args.samples is not None:
        settings["samples"] = args.samples
    changes["settings"] = settings
    if args.box is not None:
        changes["box"] = _parse_box(args.box, sc.n)
    return dataclasses.replace(sc, **changes)


def _x0(args, sc):
    if args.x0:
        x = np.array(_floats(args.x0, "--x0"))
        if x.shape != (sc.n,):
            raise InputError(f"--x0 needs {sc.n} entries")
        return x
    if sc.x0 is None:
        raise InputError(f"scenario {sc.name} has no default x0; pass --x0")
    return np.array(sc.x0)


def _data_path(args, name):
    if not args.data_dir:
        return None
    d = Path(args.data_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _field(sc, loop):
    return sc.closed_loop() if loop == "closed" else sc.open_loop()


def _outcome_of_report(rep):
    return {True: "holds", False: "fails", None: "inconclusive"}[rep.consistent]


def _worst(outcomes):
    if "fails" in outcomes:
        return "fails"
    if "inconclusive" in outcomes:
        return "inconclusive"
    return "holds"


# --------------------------------------------------------------------------
# subcommands: each returns (verdicts, reports, files, extra)
# --------------------------------------------------------------------------

def cmd_simulate(args, sc, cfg):
    x0 = _x0(args, sc)
    extra = {"x0": x0}
    verdicts = []
    if sc.ps is not None and args.loop == "closed" and sc.feedback is not None:
        tr = integrate_closed_loop(sc.ps, sc.feedback, x0, cfg, on_nan="flag")
        verdicts.append(check_storage_monotone(tr, solver_tol=cfg.rtol))
    else:
        tr = integrate(_field(sc, args.loop), x0, cfg, on_nan="flag")
        if sc.ps is not None:
            tr.storage = sc.ps.V.batch(tr.states)
    extra.update(final=tr.states[-1], t_end=float(tr.times[-1]), status=tr.status,
                 steps=tr.steps, backend=tr.backend,
                 dist_Gamma_final=float(sc.Gamma.dist(tr.states[-1])))
    if sc.O is not None:
        extra["dist_O_final"] = float(sc.O.dist(tr.states[-1]))
    files = []
    path = _data_path(args, f"{sc.name}_trajectory.csv")
    if path is not None:
        tr.to_csv(path)
        files.append(str(path))
    return verdicts, [], files, extra


def cmd_check_passivity(args, sc, cfg):
    if sc.ps is None:
        raise InputError(f"scenario {sc.name} has no passive structure")
    rng = np.random.default_rng(args.seed)
    n = args.samples or 10_000
    verdicts = [check_passivity(sc.ps, n, rng=rng, box=sc.box)]
    if sc.feedback is not None:
        X = rng.uniform(sc.box_array[:, 0], sc.box_array[:, 1], size=(n, sc.n))
        if sc.O is not None:
            X = np.vstack([X, np.atleast_2d(sc.O.sample_on(rng, max(1, n // 4)))])
        verdicts.append(check_feedback_admissible(sc.ps.sys, sc.feedback, X))
    return verdicts, [], [], {}


def cmd_limit_set(args, sc, cfg):
    x0 = _x0(args, sc)
    fld = _field(sc, args.loop)
    if args.kind == "omega":
        est = omega_limit_estimate(fld, x0, cfg)
    else:
        est = prolongational_limit_estimate(fld, x0, None, cfg,
                                            rng=np.random.default_rng(args.seed))
    extra = {"kind": args.kind, "points": len(est), "escaped": est.escaped,
             "max_dist_Gamma": est.max_distance_to(sc.Gamma), "notes": est.notes}
    if sc.O is not None:
        extra["max_dist_O"] = est.max_distance_to(sc.O)
    files = []
    path = _data_path(args, f"{sc.name}_{args.kind}_cloud.csv")
    if path is not None:
        est.to_csv(path)
        files.append(str(path))
    outcome = "holds" if not est.empty else "inconclusive"
    v = Verdict(f"{args.kind}_limit_set", outcome, params=est.params,
                notes=list(est.notes), details={"points": len(est)})
    return [v], [], files, extra


def cmd_check_stability(args, sc, cfg):
    rel = {"none": None, "O": sc.O, "V0": sc.V0}[args.relative]
    if args.relative != "none" and rel is None:
        raise InputError(f"scenario {sc.name} has no {args.relative} set")
    q = regression.query(sc, args.seed).with_prop(args.property, relative_to=rel)
    v = check_property(_field(sc, args.loop), sc.Gamma, q, cfg)
    return [v], [], [], {}


def cmd_check_reduction(args, sc, cfg):
    theorem = args.theorem or ("cascade" if sc.cascade is not None and sc.O is None
                               else sc.settings.get("reduction_theorem", "sas"))
    if theorem == "cascade":
        rep = regression.run_cascade(sc, cfg, args.seed)
    else:
        rep = regression.run_reduction(sc, cfg, args.seed, theorem=theorem)
    return [], [rep], [], {"theorem": theorem}


def cmd_check_detectability(args, sc, cfg):
    if sc.ps is None:
        raise InputError(f"scenario {sc.name} has no passive structure")
    st = sc.settings
    k = args.kind
    local = not args.global_
    if k in ("zero_state", "V_detect", "gamma_detect"):
        if sc.O is None:
            raise InputError(f"scenario {sc.name} has no O set")
        v = check_detectability(sc.ps, sc.Gamma, sc.O, k, local=local, cfg=cfg, box=sc.box,
                                radius=st.get("neighborhood", 0.1),
                                horizon=st.get("horizon", cfg.T), seed=args.seed,
                                q=regression.query(sc, args.seed))
        return [v], [], [], {}
    if k == "sufficient":
        v = check_sufficient_conditions(sc.ps, sc.Gamma, cfg.replace(T=st.get("horizon", cfg.T)),
                                        box=sc.box, S_prime=sc.S_prime,
                                        jplus_T=st.get("jplus_T", 20.0),
                                        gamma_is_V0=bool(st.get("gamma_is_V0", False)),
                                        seed=args.seed)
        return [v], [], [], {}
    if k == "alternative":
        v = check_alternative_condition(sc.ps, sc.Gamma, sc.O, sc.V0, cfg, local=local,
                                        q=regression.query(sc, args.seed), box=sc.box,
                                        seed=args.seed)
        return [v], [], [], {}
    if k == "lemma4":
        pts = regression.lemma4_cloud(sc, cfg, args.seed)
        files = []
        path = _data_path(args, f"{sc.name}_lemma4_cloud.csv")
        if path is not None:
            np.savetxt(path, pts, delimiter=",", fmt="%.17g",
                       header=",".join(f"x{i + 1}" for i in range(sc.n)), comments="")
            files.append(str(path))
        return [check_lemma4(sc.ps, pts)], [], files, {}
    if sc.feedback is None:
        raise InputError(f"scenario {sc.name} has no feedback")
    rep = theorem5_harness(sc.ps, sc.feedback, sc.Gamma, sc.O, cfg, global_=not local,
                           q=regression.query(sc, args.seed), box=sc.box, seed=args.seed)
    return [], [rep], [], {}


def cmd_scenario(args):
    if args.action == "list":
        rows = [{"name": n, "description": scenarios.load(n).description}
                for n in scenarios.names()]
        rows += [{"name": f.name, "description": scenarios.load_file(f).description}
                 for f in scenarios.data_files()]
        return {"scenarios": rows}, "holds"
    if args.action == "run":
        if not args.name:
            raise InputError("scenario run needs a NAME")
        todo = [scenarios.load(args.name)]
    else:
        todo = [scenarios.load(n) for n in scenarios.names()]
        todo += [scenarios.load_file(f) for f in scenarios.data_files()]
    if args.config:
        todo.append(scenarios.load_file(args.config))
    results = []
    for sc in todo:
        r = regression.run(sc, seed=args.seed)
        results.append(r)
        mark = "ok" if r.ok else "MISMATCH"
        print(f"{sc.name:20s} {mark:8s} {r.seconds:8.2f}s", file=sys.stderr)
        for k, (exp, got) in r.mismatches.items():
            print(f"    {k}: expected {exp}, observed {got}", file=sys.stderr)
    body = {"results": [r.to_dict() for r in results]}
    return body, "holds" if all(r.ok for r in results) else "fails"


COMMANDS = {"simulate": cmd_simulate, "check-passivity": cmd_check_passivity,
            "limit-set": cmd_limit_set, "check-stability": cmd_check_stability,
            "check-reduction": cmd_check_reduction,
            "check-detectability": cmd_check_detectability}


def _emit(report, out):
    text = json.dumps(_jsonable(report), indent=2, sort_keys=False)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


def run(argv=None, environ=None):
    """Parse ``argv``, run the command, return the exit code."""
    environ = os.environ if environ is None else environ
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_env(args, environ)
        if args.command == "scenario":
            body, outcome = cmd_scenario(args)
            report = {"schema_version": SCHEMA_VERSION, "command": "scenario " + args.action,
                      "seed": args.seed, "outcome": outcome, **body}
            _emit(report, args.out)
            return EXIT[outcome]
        sc = _with_overrides(_scenario(args), args)
        cfg = _cfg(args, sc)
        verdicts, reports, files, extra = COMMANDS[args.command](args, sc, cfg)
    except InputError as exc:
        print(f"setstab: error: {exc}", file=sys.stderr)
        return USAGE
    outcomes = [v.outcome for v in verdicts] + [_outcome_of_report(r) for r in reports]
    outcome = _worst(outcomes) if outcomes else "holds"
    report = {"schema_version": SCHEMA_VERSION, "command": args.command,
              "scenario": sc.name, "seed": args.seed,
              "config": {"rtol": cfg.rtol, "atol": cfg.atol, "T": cfg.T,
                         "box": [list(b) for b in sc.box], "settings": sc.settings},
              "outcome": outcome,
              "verdicts": [v.to_dict() for v in verdicts],
              "reports": [r.to_dict() for r in reports],
              "files": files, "extra": extra}
    _emit(report, args.out)
    return EXIT[outcome]


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
