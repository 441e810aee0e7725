"""Command-line front end: ``trajlind {check,run,sweep,stats,gadget}``.

Exit codes: 0 success, 1 input error, 2 constraint violation, 3 numerical
failure. Reports are JSON (CSV for sweeps), floats written with 17
significant digits, and every output embeds a run manifest.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import numbers
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import matcore as mc
from .errors import ConstraintViolation, NumericalFailure, TrajlindError
from .gadgets import build_jump_gadget, default_alphas, resource_ledger
from .lindblad import check_constraint, load_model, require_admissible
from .oracle import MODES, McConfig, exact_propagator, jump_channel, mc_channel_estimate
from .trajectory import allocate_budget, distribution_report, tail_bound, truncation_order

EXIT_OK, EXIT_INPUT, EXIT_CONSTRAINT, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ENV = "TRAJLIND_SEED"


# -- serialization ------------------------------------------------------------


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits; NaN and infinities become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, numbers.Integral):
        return str(int(obj))
    if isinstance(obj, numbers.Real):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {to_json(v, indent, _level + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def manifest(command: str, model_path: str | None, params: dict) -> dict:
    return {
        "command": command,
        "model": model_path,
        "params": params,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _parse_floats(text: str, name: str) -> list[float]:
    items = [s for s in text.split(",") if s.strip()]
    if not items:
        raise argparse.ArgumentTypeError(f"{name} is empty")
    try:
        return [float(s) for s in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{name}: {exc}") from exc


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _alpha_h(model, override: float | None) -> float:
    if override is not None:
        return override
    return mc.op_norm(model.hamiltonian) or 1.0


# -- commands -------------------------------------------------------------------


def cmd_check(args) -> int:
    model = load_model(args.model)
    rep = check_constraint(model, args.tol)
    body = rep.to_dict()
    body["manifest"] = manifest("check", args.model, {"tol": args.tol})
    _emit(to_json(body) + "\n", args.out)
    return EXIT_OK if rep.admissible else EXIT_CONSTRAINT


def cmd_run(args) -> int:
    model = load_model(args.model)
    gamma = require_admissible(model, args.tol)
    budget = allocate_budget(gamma, args.time, args.epsilon)
    eps_h = args.injected_epsilon_h if args.mode == "error-injected" else 0.0
    cfg = McConfig(args.samples, args.seed, args.mode, eps_h, args.workers)
    res = mc_channel_estimate(model, args.time, budget, cfg)
    if not np.all(np.isfinite(res.mean_channel)):
        raise NumericalFailure("mean channel has non-finite entries")
    lo, hi = mc.diamond_distance_bounds(res.mean_channel, exact_propagator(model, args.time))
    ledger = None
    if gamma > 0:
        ledger = resource_ledger(gamma, args.time, args.epsilon, _alpha_h(model, args.alpha_h),
                                 default_alphas(model), model.m, 1).to_dict()
    body = {
        "budget": {"r": budget.r, "epsilon": budget.epsilon, "epsilon_H": budget.epsilon_h,
                   "tail_bound": tail_bound(gamma, args.time, budget.r) if gamma > 0 else 0.0},
        "gamma": gamma,
        "distance": {"lower": lo, "upper": hi},
        "mc_sigma": res.mc_sigma,
        "restart_count": res.restart_count,
        "jump_histogram": {str(n): f for n, f in res.jump_histogram.items()},
        "ledger": ledger,
        "manifest": manifest("run", args.model, {
            "time": args.time, "epsilon": args.epsilon, "samples": args.samples, "seed": args.seed,
            "mode": args.mode, "injected_epsilon_h": eps_h, "workers": args.workers}),
    }
    _emit(to_json(body) + "\n", args.out)
    return EXIT_OK


SWEEP_COLUMNS = ["T", "epsilon", "r", "jump_queries", "hamiltonian_queries", "gate_count", "tail_bound"]


def cmd_sweep(args) -> int:
    model = load_model(args.model)
    gamma = require_admissible(model, args.tol)
    alphas = default_alphas(model)
    alpha_h = _alpha_h(model, args.alpha_h)
    buf = io.StringIO()
    man = manifest("sweep", args.model, {"time_list": args.time_list, "epsilon_list": args.epsilon_list})
    buf.write("# manifest: " + json.dumps(man, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for t in args.time_list:
        for eps in args.epsilon_list:
            r = truncation_order(gamma, t, eps)
            if gamma > 0:
                led = resource_ledger(gamma, t, eps, alpha_h, alphas, model.m, 1)
                q = [format_float(led.jump_queries), format_float(led.hamiltonian_queries),
                     format_float(led.gate_count), format_float(tail_bound(gamma, t, r))]
            else:
                q = ["", "", "", format_float(0.0)]
            writer.writerow([format_float(t), format_float(eps), r] + q)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_stats(args) -> int:
    rep = distribution_report(args.gamma, args.time, args.samples, args.seed, args.epsilon)
    body = rep.to_dict()
    body["manifest"] = manifest("stats", None, {
        "gamma": args.gamma, "time": args.time, "samples": args.samples,
        "seed": args.seed, "epsilon": args.epsilon})
    _emit(to_json(body) + "\n", args.out)
    return EXIT_OK


def cmd_gadget(args) -> int:
    model = load_model(args.model)
    alphas = args.alphas
    gadget = build_jump_gadget(model, alphas, args.tol)
    target = jump_channel(model)
    channel = gadget.system_channel()
    body = {
        "p0_raw": gadget.p0,
        "p0_padded": gadget.p0_padded,
        "theta": gadget.theta,
        "t": gadget.iterations,
        "padded_weight": gadget.padded_weight,
        "index_dim": gadget.index_dim,
        "choi_distance": mc.choi_distance(channel, target),
        "trace_preservation_residual": mc.trace_preservation_residual(channel),
        "unitarity_residuals": gadget.unitarity_residuals(),
        "manifest": manifest("gadget", args.model, {"alphas": alphas, "tol": args.tol}),
    }
    _emit(to_json(body) + "\n", args.out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trajlind", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"trajlind {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", required=True, help="model JSON file")
            sp.add_argument("--tol", type=float, default=1e-8, help="admissibility tolerance")
        sp.add_argument("--out", help="output path (default: stdout)")

    c = sub.add_parser("check", help="test the admissibility constraint")
    common(c)
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("run", help="Monte Carlo channel estimate against the exact propagator")
    common(r)
    r.add_argument("--time", type=float, required=True)
    r.add_argument("--epsilon", type=float, required=True)
    r.add_argument("--samples", type=_positive_int, default=10_000)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--mode", choices=MODES, default="exact-unitary")
    r.add_argument("--injected-epsilon-h", type=float, default=0.0)
    r.add_argument("--workers", type=_positive_int, default=1)
    r.add_argument("--alpha-h", type=float, default=None, help="Hamiltonian block-encoding scale")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="resource ledger over (T, epsilon) pairs as CSV")
    common(s)
    s.add_argument("--time-list", type=lambda t: _parse_floats(t, "time list"), required=True)
    s.add_argument("--epsilon-list", type=lambda t: _parse_floats(t, "epsilon list"), required=True)
    s.add_argument("--alpha-h", type=float, default=None)
    s.set_defaults(func=cmd_sweep)

    st = sub.add_parser("stats", help="holding-time and jump-count distribution tests")
    common(st, model=False)
    st.add_argument("--gamma", type=float, required=True)
    st.add_argument("--time", type=float, required=True)
    st.add_argument("--samples", type=_positive_int, default=100_000)
    st.add_argument("--seed", type=int, default=None)
    st.add_argument("--epsilon", type=float, default=1e-3)
    st.set_defaults(func=cmd_stats)

    g = sub.add_parser("gadget", help="build the jump gadget and report its accuracy")
    common(g)
    g.add_argument("--alphas", type=lambda t: _parse_floats(t, "alphas"), default=None)
    g.set_defaults(func=cmd_gadget)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage errors are input errors here
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except ConstraintViolation as exc:
        print(f"trajlind: constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except json.JSONDecodeError as exc:
        print(f"trajlind: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"trajlind: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TrajlindError, ValueError, OSError, argparse.ArgumentTypeError) as exc:
        print(f"trajlind: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
