"""Command-line front end: read potentials or Birkhoff vectors, emit CSV/JSON."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .actions import ActionError, action_sequence, actions_to_csv, ratios
from .birkhoff import BirkhoffVector
from .deformation import FlowDomainError, damping_sequence, flow_exact, flow_numeric, verify_norm_bound
from .floquet import SpectrumError, gap_lengths, periodic_spectrum, spectrum_to_csv
from .potentials import Potential, gardner_bracket, l2_gradients_fd, l2_norm
from .regularity import FitError, theorem2_experiment

COMPUTE_ERRORS = (SpectrumError, ActionError, FlowDomainError, FitError)


class UsageError(Exception):
    pass


def _threads() -> int:
    raw = os.environ.get("GAPFLOW_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"GAPFLOW_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise UsageError("GAPFLOW_THREADS must be at least 1")
    return n


def _read(path: str | None) -> str:
    if path is None:
        raise UsageError("--input is required for this command")
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")


def _load_potential(args) -> Potential:
    try:
        return Potential.from_json(_read(args.input))
    except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid potential JSON: {exc}")


def _load_birkhoff(args) -> BirkhoffVector:
    try:
        return BirkhoffVector.from_json(_read(args.input))
    except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid Birkhoff JSON: {exc}")


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _spectrum(args, q):
    return periodic_spectrum(q, args.modes, steps=args.steps, tol_eig=args.tol_eig, tol_gap=args.tol_gap)


def cmd_spectrum(args):
    q = _load_potential(args)
    s = _spectrum(args, q)
    if args.format == "csv":
        return spectrum_to_csv(s)
    return _dump(
        {
            "q_id": s.q_id,
            "steps": s.steps,
            "eigenvalues": s.eigenvalues.tolist(),
            "gammas": gap_lengths(s).gammas.tolist(),
        }
    )


def cmd_gaps(args):
    q = _load_potential(args)
    gam = gap_lengths(_spectrum(args, q)).gammas
    if args.format == "csv":
        return _table(["k", "gamma"], [(k, float(g)) for k, g in enumerate(gam, 1)])
    return _dump({"gammas": gam.tolist()})


def _actions(args):
    q = _load_potential(args)
    s = _spectrum(args, q)
    return gap_lengths(s).gammas, action_sequence(q, s, args.nodes)


def cmd_actions(args):
    gam, act = _actions(args)
    if args.format == "csv":
        return actions_to_csv(gam, act)
    r = ratios(gam, act)
    return _dump(
        {
            "gammas": gam.tolist(),
            "actions": act.tolist(),
            "ratios": [None if np.isnan(v) else float(v) for v in r],
        }
    )


def cmd_ratio(args):
    gam, act = _actions(args)
    closed = np.flatnonzero(gam <= 0)
    if closed.size:
        raise ActionError(f"ratio undefined at closed gap n={closed[0] + 1}")
    r = ratios(gam, act)
    if args.format == "csv":
        return _table(["n", "ratio"], [(n, float(v)) for n, v in enumerate(r, 1)])
    return _dump({"ratios": r.tolist()})


def cmd_moduli(args):
    _, act = _actions(args)
    mod = np.sqrt(2 * act)
    if args.format == "csv":
        return _table(["n", "modulus"], [(n, float(v)) for n, v in enumerate(mod, 1)])
    return _dump({"moduli": mod.tolist()})


def cmd_brackets(args):
    q = _load_potential(args)
    K = args.modes

    def F(p):
        s = periodic_spectrum(p, K, steps=args.steps, tol_eig=args.tol_eig, tol_gap=args.tol_gap)
        return action_sequence(p, s, args.nodes)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        grads = l2_gradients_fd(F, q, args.h, args.grad_modes, map_fn=pool.map)
    rows = []
    for m in range(1, K + 1):
        for n in range(m + 1, K + 1):
            b = gardner_bracket(grads[m - 1], grads[n - 1])
            scale = l2_norm(grads[m - 1]) * l2_norm(grads[n - 1])
            rows.append((m, n, b, b / scale if scale > 0 else None))
    if args.format == "csv":
        return _table(["m", "n", "bracket", "relative"], rows)
    return _dump([{"m": m, "n": n, "bracket": b, "relative": r} for m, n, b, r in rows])


def cmd_flow(args):
    z = _load_birkhoff(args)
    if args.k is None or args.t is None:
        raise UsageError("flow needs --k and --t")
    out = flow_numeric(z, args.k, args.t, args.flow_steps) if args.numeric else flow_exact(z, args.k, args.t)
    if args.format == "csv":
        return _table(["k", "x", "y"], [(k, float(x), float(y)) for k, (x, y) in enumerate(out.pairs, 1)])
    return out.to_json() + "\n"


def cmd_damp(args):
    z = _load_birkhoff(args)
    report = damping_sequence(z, args.alpha, args.epsilon)
    check = verify_norm_bound(report, z)
    if not check:
        raise ActionError(f"damping bound violated at stage {check.failed_stage}: {check.reason}")
    if args.format == "csv":
        return _table(
            ["n", "threshold", "damped", "norm_sq"],
            [(s.n, s.threshold, int(s.damped), s.weighted_norm_sq) for s in report.stages],
        )
    return report.to_json() + "\n"


def cmd_regularity(args):
    report = theorem2_experiment(args.beta, args.amplitude, args.modes, args.seed, args.steps, args.nodes)
    if args.format == "csv":
        return _table(
            ["n", "gamma", "modulus", "included"],
            [(n, g, m, int(n in report.included)) for n, (g, m) in enumerate(zip(report.gammas, report.moduli), 1)],
        )
    return report.to_json() + "\n"


COMMANDS = {
    "spectrum": cmd_spectrum,
    "gaps": cmd_gaps,
    "actions": cmd_actions,
    "ratio": cmd_ratio,
    "moduli": cmd_moduli,
    "brackets": cmd_brackets,
    "flow": cmd_flow,
    "damp": cmd_damp,
    "regularity": cmd_regularity,
}


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", help="input JSON file ('-' for stdin)")
    common.add_argument("--output", "-o", help="output file (default stdout)")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--modes", "-K", type=_positive(int), default=8)
    common.add_argument("--steps", type=_positive(int), default=1024)
    common.add_argument("--nodes", type=_positive(int), default=64)
    common.add_argument("--tol-eig", type=_positive(float), default=1e-10)
    common.add_argument("--tol-gap", type=_positive(float), default=1e-9)
    common.add_argument("--alpha", type=float, default=-0.5)
    common.add_argument("--epsilon", type=_positive(float), default=0.1)
    common.add_argument("--beta", type=float, default=1.5)
    common.add_argument("--amplitude", type=float, default=0.05)
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="gapflow", description="Hill spectra, KdV actions and Birkhoff-coordinate flows.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "brackets":
            p.add_argument("--h", type=_positive(float), default=1e-4, help="finite-difference step")
            p.add_argument("--grad-modes", type=_positive(int), default=6)
        if name == "flow":
            p.add_argument("--k", type=_positive(int))
            p.add_argument("--t", type=float)
            p.add_argument("--numeric", action="store_true")
            p.add_argument("--flow-steps", type=_positive(int), default=256)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = COMMANDS[args.command](args)
    except COMPUTE_ERRORS as exc:
        print(f"gapflow {args.command}: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ValueError) as exc:
        print(f"gapflow {args.command}: {exc}", file=sys.stderr)
        return 2
    if args.output:
        try:
            with open(args.output, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"gapflow {args.command}: cannot write {args.output}: {exc}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
