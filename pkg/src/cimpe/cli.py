"""Command-line entry point.

    cimpe validate SPEC
    cimpe solve SPEC [--out report.json]
    cimpe verify SPEC [--samples N] [--seed S] [--deviations D] [--out report.json]
    cimpe example six [--out spec.json]

``SPEC`` is a path to a JSON game spec, or ``@six`` for the bundled example.
Exit codes: 0 ok, 2 input error, 3 existence failure, 4 belief-independence
failure without ``--assume-independence``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, bundled
from .game_model import SpecError, build_info_maps, loads_spec, validate_spec
from .induction import BeliefAssumptionError, EquilibriumSolution, ExistenceFailure, solve_cimpe
from .verifier import closed_form_costs, deviation_test, realize_control_laws, simulate, write_trajectory_csv

EXIT_OK, EXIT_INPUT, EXIT_EXISTENCE, EXIT_BELIEF = 0, 2, 3, 4

log = logging.getLogger("cimpe")


# --------------------------------------------------------------------------
# deterministic JSON


def _encode(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        if obj.ndim == 1:
            obj = obj.reshape(1, -1) if obj.size else obj.reshape(0, 0)
        return {"rows": int(obj.shape[0]), "cols": int(obj.shape[1]), "data": [float(x) for x in obj.reshape(-1)]}
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _quote(s: str) -> str:
    return json.dumps(s)


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float printed to 17 significant digits."""
    def walk(o: Any, level: int) -> str:
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None:
            return "null"
        if isinstance(o, bool):
            return "true" if o else "false"
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return _fmt_float(o)
        if isinstance(o, str):
            return _quote(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{_quote(k)}: {walk(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(walk(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + walk(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")
    return walk(_encode(obj), 0) + "\n"


# --------------------------------------------------------------------------


def _load(arg: str):
    if arg.startswith("@"):
        name = arg[1:]
        if name not in bundled.BUNDLED:
            raise SpecError(f"unknown bundled spec {name!r}; available: {sorted(bundled.BUNDLED)}")
        text = bundled.six_json()
    else:
        try:
            text = Path(arg).read_text(encoding="utf-8")
        except OSError as exc:
            raise SpecError(f"cannot read {arg}: {exc}") from exc
    spec, info = loads_spec(text)
    return spec, info, hashlib.sha256(text.encode("utf-8")).hexdigest()


def _stage_block(sol: EquilibriumSolution, laws) -> list[dict]:
    out = []
    for t in range(1, sol.spec.horizon):
        if t not in sol.stages:
            continue
        rec = sol[t]
        s = rec.solution
        out.append({
            "t": t,
            "common": [c.label() for c in sol.maps[t].common],
            "private1": [c.label() for c in sol.maps[t].private[0]],
            "private2": [c.label() for c in sol.maps[t].private[1]],
            "conditions": rec.report.to_dict(),
            "prescription": {"T1": s.T1, "T2": s.T2, "l1": s.l1, "l2": s.l2, "L1": s.L1, "L2": s.L2},
            "value": {"Phi1": s.Phi[0], "Phi2": s.Phi[1], "Xi1": s.Xi[0], "Xi2": s.Xi[1],
                      "Upsilon1": s.Upsilon[0], "Upsilon2": s.Upsilon[1]},
            "residuals": s.residuals,
            "laws": None if laws is None else {
                f"controller{i}": {"K": laws[i - 1][t].K, "J": laws[i - 1][t].J, "k": laws[i - 1][t].k}
                for i in (1, 2)
            },
        })
    return out


def solution_report(sol: EquilibriumSolution, laws=None) -> dict:
    return {
        "independence": sol.independence.to_dict() if sol.independence else None,
        "independence_overridden": sol.independence_overridden,
        "belief": [{"t": b.t, "sigma": b.sigma, "Q": b.Q} for b in sol.beliefs],
        "stages": _stage_block(sol, laws),
        "terminal_value": {"Phi1": sol.terminal.Phi[0], "Phi2": sol.terminal.Phi[1],
                           "Upsilon1": sol.terminal.Upsilon[0], "Upsilon2": sol.terminal.Upsilon[1]},
    }


def _emit(report: dict, out: str | None) -> None:
    text = dumps(report)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _base(command: str, digest: str, name: str, seed: int | None) -> dict:
    return {"tool": "cimpe", "version": __version__, "command": command,
            "spec": {"name": name, "sha256": digest}, "seed": seed}


def _solve_or_report(args, report: dict, spec, info):
    try:
        return solve_cimpe(spec, info, assume_independence=args.assume_independence,
                           trials=args.trials, seed=args.seed), None
    except BeliefAssumptionError as exc:
        print(f"cimpe: {exc}", file=sys.stderr)
        report["status"] = "belief-independence-failure"
        report["independence"] = exc.report.to_dict()
        return None, EXIT_BELIEF
    except ExistenceFailure as exc:
        print(f"cimpe: {exc}", file=sys.stderr)
        report["status"] = "existence-failure"
        report["failed_stage"] = exc.stage
        report["failed_conditions"] = exc.report.to_dict()
        if exc.partial is not None:
            report.update(solution_report(exc.partial))
        return None, EXIT_EXISTENCE


def cmd_validate(args) -> int:
    spec, info, digest = _load(args.spec)
    rep = validate_spec(spec, info)
    report = _base("validate", digest, spec.name, None)
    report["validation"] = rep.to_dict()
    status = EXIT_OK
    if rep.ok:
        maps = build_info_maps(spec, info)
        report["info"] = [
            {"t": st.t, "common": [c.label() for c in st.common],
             "private1": [c.label() for c in st.private[0]], "private2": [c.label() for c in st.private[1]]}
            for st in maps.stages
        ]
    else:
        for c in rep.failures():
            print(f"cimpe: check {c.name} failed: {c.detail}", file=sys.stderr)
        status = EXIT_INPUT
    report["status"] = "ok" if rep.ok else "invalid"
    _emit(report, args.out)
    return status


def cmd_solve(args) -> int:
    clock = time.perf_counter()
    spec, info, digest = _load(args.spec)
    report = _base("solve", digest, spec.name, args.seed)
    report["validation"] = validate_spec(spec, info).to_dict()
    sol, code = _solve_or_report(args, report, spec, info)
    if sol is not None:
        report["status"] = "ok"
        report.update(solution_report(sol, realize_control_laws(sol)))
        code = EXIT_OK
    report["timings"] = {"total_seconds": time.perf_counter() - clock}
    _emit(report, args.out)
    return code


def cmd_verify(args) -> int:
    clock = time.perf_counter()
    spec, info, digest = _load(args.spec)
    report = _base("verify", digest, spec.name, args.seed)
    report["validation"] = validate_spec(spec, info).to_dict()
    sol, code = _solve_or_report(args, report, spec, info)
    if sol is None:
        report["timings"] = {"total_seconds": time.perf_counter() - clock}
        _emit(report, args.out)
        return code
    laws = realize_control_laws(sol)
    report["status"] = "ok"
    report.update(solution_report(sol, laws))
    t0 = time.perf_counter()
    exact = closed_form_costs(spec, sol.maps, laws)
    res = simulate(spec, sol.maps, laws, n=args.samples, seed=args.seed, workers=args.workers, record=bool(args.trajectories))
    est, traj = res if args.trajectories else (res, None)
    if traj is not None:
        write_trajectory_csv(args.trajectories, spec, traj, max_samples=args.trajectory_samples)
    t1 = time.perf_counter()
    z = [abs(est.mean[i] - exact[i]) / est.stderr[i] if est.stderr[i] > 0 else 0.0 for i in (0, 1)]
    report["costs"] = {
        "closed_form": list(exact),
        "monte_carlo": est.to_dict(),
        "z_scores": z,
        "within_3_stderr": all(v <= 3.0 for v in z),
    }
    devs = [deviation_test(spec, sol.maps, laws, i, n_directions=args.deviations, seed=args.seed) for i in (1, 2)]
    report["deviations"] = [d.to_dict() for d in devs]
    report["timings"] = {"simulate_seconds": t1 - t0, "total_seconds": time.perf_counter() - clock}
    _emit(report, args.out)
    return EXIT_OK


def cmd_example(args) -> int:
    if args.name != "six":
        raise SpecError(f"unknown example {args.name!r}")
    text = bundled.six_json() + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cimpe", description="Equilibria of linear-Gaussian games with asymmetric information.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("spec", help="game spec JSON path, or @six for the bundled example")
        sp.add_argument("--out", help="write the report here instead of standard output")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="seed for the independence check and the simulation")
            sp.add_argument("--assume-independence", action="store_true",
                            help="continue when the belief-independence check fails")
            sp.add_argument("--trials", type=int, default=16, help="random profiles for the independence check")

    sp = sub.add_parser("validate", help="check a game spec")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="compute the equilibrium")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="solve, then check by simulation and deviation tests")
    common(sp)
    sp.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo sample size")
    sp.add_argument("--deviations", type=int, default=200, help="random perturbation directions per controller")
    sp.add_argument("--workers", type=int, default=1, help="threads for sampling (results do not depend on it)")
    sp.add_argument("--trajectories", help="CSV file for simulated trajectories")
    sp.add_argument("--trajectory-samples", type=int, default=1000, help="samples written to the CSV")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("example", help="print a bundled game spec")
    sp.add_argument("name", choices=["six"])
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_example)
    return p


def _configure_logging() -> None:
    level = os.environ.get("CIMPE_LOG", "off").strip().lower()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("cimpe: %(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel({"debug": logging.DEBUG, "info": logging.INFO}.get(level, logging.CRITICAL + 1))


def run(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"cimpe: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"cimpe: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())
