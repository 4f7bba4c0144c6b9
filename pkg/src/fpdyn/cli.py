"""Command-line front end.

Subcommands: simulate, orbit, stability, scan, taufind, sigma-check,
check.  Exit codes: 0 success, 2 parameter error, 3 existence/domain
error, 4 invariant failure.  Identical configuration (including the
seed) produces byte-identical output files; all floating output uses 12
significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
from pathlib import Path

from .errors import (
    AmbiguousFlowError,
    DomainError,
    ExistenceError,
    FpdynError,
    InvariantFailure,
    ModelFitError,
    ParameterError,
    SearchError,
    StructuralError,
)
from .flow import SimConfig, itinerary_json, simulate, trajectory_csv_lines
from .game import GOLDEN_MEAN, game_from_json, make_shapley, zero_sum_certificate
from .orbits import anticlockwise_orbit, clockwise_orbit, find_tau, j_orbit, scan_rows, stability_matrix
from .returnmap import random_state

_EXIT_PARAMETER = 2
_EXIT_DOMAIN = 3
_EXIT_INVARIANT = 4


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _fmt_vec(v) -> str:
    return "(" + ", ".join(_fmt(x) for x in v) + ")"


def _out_dir(args) -> Path:
    if getattr(args, "out", None):
        d = Path(args.out)
    elif os.environ.get("FPDYN_OUT"):
        d = Path(os.environ["FPDYN_OUT"])
    else:
        d = Path.cwd()
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load_game(args):
    if getattr(args, "game", None):
        return game_from_json(Path(args.game).read_text())
    if getattr(args, "beta", None) is None:
        raise ParameterError("provide --beta or --game FILE")
    return make_shapley(args.beta)


def _cmd_simulate(args) -> int:
    game = _load_game(args)
    if args.init:
        parts = args.init.split(":")
        if len(parts) != 2:
            raise ParameterError("--init must look like 'pA1,pA2,pA3:pB1,pB2,pB3'")
        from .game import SimplexPoint, StateP

        pa = SimplexPoint(tuple(float(x) for x in parts[0].split(",")))
        pb = SimplexPoint(tuple(float(x) for x in parts[1].split(",")))
        start = StateP(pA=pa, pB=pb)
    else:
        start = random_state(random.Random(args.seed))
    cfg = SimConfig(
        max_events=args.events,
        max_time=args.max_time if args.max_time is not None else math.inf,
        time_scale=args.time_scale,
        codim2_policy=args.codim2_policy,
    )
    traj = simulate(game, start, cfg)
    out = _out_dir(args)
    itin_path = out / "itinerary.json"
    itin_path.write_text(itinerary_json(traj) + "\n")
    if args.format == "csv":
        traj_path = out / "trajectory.csv"
        traj_path.write_text("\n".join(trajectory_csv_lines(traj)) + "\n")
    else:
        traj_path = out / "trajectory.json"
        lines = list(trajectory_csv_lines(traj))
        header = lines[0].split(",")
        rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
        traj_path.write_text(json.dumps(rows) + "\n")
    print(f"events: {len(traj.events)}  segments: {len(traj.segments)}  stop: {traj.stop_reason}")
    print(f"wrote {traj_path} and {itin_path}")
    return 0


def _cmd_orbit(args) -> int:
    builders = {
        "clockwise": clockwise_orbit,
        "anticlockwise": anticlockwise_orbit,
        "j": j_orbit,
    }
    orbit = builders[args.kind](args.beta)
    root_name = {"clockwise": "nu", "anticlockwise": "mu", "j": "X*"}[args.kind]
    print(f"kind: {orbit.kind}")
    print(f"beta: {_fmt(orbit.beta)}")
    print(f"{root_name}: {_fmt(orbit.root)}")
    print(f"n: {_fmt_vec(orbit.section_n)}")
    print(f"m: {_fmt_vec(orbit.section_m)}")
    print(f"t1, t2: {_fmt(orbit.durations[0])}, {_fmt(orbit.durations[1])}")
    print(f"diameter: {_fmt(orbit.diameter)}")
    if orbit.diameter_ratios is not None:
        print(f"diameter ratios: {_fmt_vec(orbit.diameter_ratios)}")
    if args.out:
        out = _out_dir(args)
        path = out / f"orbit_{args.kind}.csv"
        lines = ["segment,vA1,vA2,vA3,vB1,vB2,vB3,duration_s"]
        for k, seg in enumerate(orbit.full_path):
            vals = list(seg.start.vA) + list(seg.start.vB) + [seg.duration_s]
            lines.append(str(k) + "," + ",".join(_fmt(v) for v in vals))
        path.write_text("\n".join(lines) + "\n")
        print(f"wrote {path}")
    return 0


def _cmd_stability(args) -> int:
    rep = stability_matrix(args.beta)
    print(f"orbit: {rep.kind}")
    print(f"beta: {_fmt(rep.beta)}")
    print("matrix:")
    for row in rep.matrix:
        print("  " + "  ".join(_fmt(x) for x in row))
    print("eigenvalues:")
    for lam in rep.eigenvalues:
        print(f"  {_fmt(lam.real)} {'+' if lam.imag >= 0 else '-'} {_fmt(abs(lam.imag))}j"
              f"  (|.| = {_fmt(abs(lam))})")
    print(f"classification: {rep.classification}")
    return 0


def _cmd_scan(args) -> int:
    out = _out_dir(args)
    path = out / "scan.csv"
    path.write_text("\n".join(scan_rows(args.beta_from, args.beta_to, args.steps)) + "\n")
    print(f"wrote {path} ({args.steps} grid points)")
    return 0


def _cmd_taufind(args) -> int:
    tau = find_tau(bracket=(args.lo, args.hi), tol=args.tol)
    print(f"tau = {_fmt(tau)}")
    print(f"(eigenvalue of the one-third return map crosses -1; "
          f"golden mean sigma = {_fmt(GOLDEN_MEAN)})")
    return 0


def _cmd_sigma_check(args) -> int:
    out = _out_dir(args)
    path = out / "sigma_check.csv"
    lines = ["beta,residual"]
    best_beta, best_res = None, math.inf
    for k in range(args.steps):
        beta = -0.995 + (1.995 - 1e-9) * k / (args.steps - 1)
        res = zero_sum_certificate(beta)
        lines.append(f"{_fmt(beta)},{_fmt(res)}")
        if res < best_res:
            best_beta, best_res = beta, res
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path}")
    print(f"grid minimum at beta = {_fmt(best_beta)} (residual {_fmt(best_res)})")
    print(f"residual at the golden mean: {_fmt(zero_sum_certificate(GOLDEN_MEAN))}")
    return 0


def _cmd_check(args) -> int:
    from .checks import run_checks

    failures = 0
    for name, ok, detail in run_checks(quick=args.quick):
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failures += 1
    if failures:
        print(f"{failures} invariant check(s) failed")
        return _EXIT_INVARIANT
    print("all invariant checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fpdyn",
        description="Exact simulator and bifurcation toolkit for continuous-time "
        "fictitious play in the one-parameter 3x3 family",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one exact trajectory")
    sim.add_argument("--beta", type=float)
    sim.add_argument("--game", help="JSON game spec file")
    sim.add_argument("--seed", type=int, default=0, help="seed for the random start")
    sim.add_argument("--init", help="explicit start 'pA1,pA2,pA3:pB1,pB2,pB3'")
    sim.add_argument("--events", type=int, default=300)
    sim.add_argument("--max-time", type=float, default=None)
    sim.add_argument("--time-scale", choices=("s", "rho"), default="s")
    sim.add_argument("--codim2-policy", choices=("follow_j", "abort", "perturb"),
                     default="follow_j")
    sim.add_argument("--format", choices=("csv", "json"), default="csv")
    sim.add_argument("--out")
    sim.set_defaults(fn=_cmd_simulate)

    orb = sub.add_parser("orbit", help="construct a symmetric periodic orbit")
    orb.add_argument("--kind", choices=("clockwise", "anticlockwise", "j"), required=True)
    orb.add_argument("--beta", type=float, required=True)
    orb.add_argument("--out")
    orb.set_defaults(fn=_cmd_orbit)

    st = sub.add_parser("stability", help="return-map linearization and eigenvalues")
    st.add_argument("--beta", type=float, required=True)
    st.set_defaults(fn=_cmd_stability)

    sc = sub.add_parser("scan", help="orbit existence/stability over a parameter grid")
    sc.add_argument("--beta-from", type=float, required=True)
    sc.add_argument("--beta-to", type=float, required=True)
    sc.add_argument("--steps", type=int, required=True)
    sc.add_argument("--out")
    sc.set_defaults(fn=_cmd_scan)

    tf = sub.add_parser("taufind", help="locate the eigenvalue crossing of -1")
    tf.add_argument("--lo", type=float, default=GOLDEN_MEAN + 0.01)
    tf.add_argument("--hi", type=float, default=0.99)
    tf.add_argument("--tol", type=float, default=1e-6)
    tf.set_defaults(fn=_cmd_taufind)

    sg = sub.add_parser("sigma-check", help="zero-sum residual curve over the parameter")
    sg.add_argument("--steps", type=int, default=400)
    sg.add_argument("--out")
    sg.set_defaults(fn=_cmd_sigma_check)

    ck = sub.add_parser("check", help="run the full invariant suite")
    ck.add_argument("--quick", action="store_true", help="reduced sample sizes")
    ck.set_defaults(fn=_cmd_check)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except (ParameterError, StructuralError) as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return _EXIT_PARAMETER
    except (ExistenceError, DomainError, AmbiguousFlowError, ModelFitError, SearchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_DOMAIN
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return _EXIT_INVARIANT
    except FpdynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
