"""``batchgrad`` command line.

Exit codes: 0 success, 2 usage error or configuration refusal, 1 runtime
or file error.  Output goes under ``--out`` or, failing that, the
``BATCHGRAD_OUT`` environment variable (default ``./batchgrad_out``).
"""

from __future__ import annotations

import argparse
import json
import math
import sys


from ..diagnostics import check_d1_d2, check_rs_conclusions, make_rs_process, rs_guard
from ..directions import DirectionSpec, predicted_bias, predicted_sigma_sq
from ..noise import NoiseModel, rng_stream
from ..objectives import compute_jstar_oracle, make_objective
from ..optimizer import ConditionRefused
from ..schedules import Schedule, verify_conditions
from .config import FIGURES, load_config, preset
from .runner import default_out_root, emit_figure_data, run_experiment

EXIT_OK, EXIT_RUNTIME, EXIT_REFUSED = 0, 1, 2


class UsageError(ValueError):
    pass


def _value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if text.lower() in ("none", "null"):
        return None
    return text


def parse_kv(items) -> dict:
    """``["a=1", "b=x"]`` or ``"a=1,b=x"`` to a dict with numeric coercion."""
    if isinstance(items, str):
        items = [s for s in items.split(",") if s]
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _value(v.strip())
    return out


def parse_named_spec(text: str):
    """``"name:k=v,k=v"`` to ``(name, params)``."""
    name, _, rest = text.partition(":")
    return name.strip(), parse_kv(rest) if rest else {}


def _emit(payload, args) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=float)
    if getattr(args, "json_out", None):
        with open(args.json_out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# --- subcommands ------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.repetitions is not None:
        cfg.repetitions = args.repetitions
    if args.override_conditions:
        cfg.override_conditions = True
    if args.workers is not None:
        cfg.workers = args.workers
    manifest = run_experiment(cfg, out_dir=args.out, progress=_progress(args))
    print(f"{len(manifest['runs'])} runs written to {manifest['directory']}")
    if args.merge:
        print(emit_figure_data(manifest))
    return EXIT_OK


def cmd_figure(args) -> int:
    cfg = preset(args.figure, args.scale, master_seed=args.seed or 0,
                 repetitions=args.repetitions or 3)
    if args.horizon is not None:
        cfg.horizon = args.horizon
    cfg.override_conditions = bool(args.override_conditions)
    cfg.workers = args.workers or 1
    manifest = run_experiment(cfg, out_dir=args.out, progress=_progress(args))
    merged = emit_figure_data(manifest, args.figure)
    statuses = [r["status"] for r in manifest["runs"]]
    print(f"{len(statuses)} traces in {manifest['directory']} "
          f"({statuses.count('completed')} completed)")
    print(f"merged table: {merged}")
    return EXIT_OK


def _progress(args):
    if not getattr(args, "verbose", False):
        return None
    return lambda run_id, status: print(f"  {run_id}: {status}", file=sys.stderr)


def cmd_verify_schedule(args) -> int:
    params = parse_kv(args.params)
    m = params.pop("m", None)
    snr = params.pop("snr", None)
    horizon = int(params.pop("horizon", 1_000_000))
    if m is None:
        m = math.sqrt(NoiseModel.from_snr(snr).m_sq) if snr is not None else 1e-5
    unknown = set(params) - {"alpha0", "c0", "tau", "p", "q"}
    if unknown:
        raise UsageError(f"unknown schedule parameters {sorted(unknown)}")
    report = verify_conditions(Schedule(**params), m_constant=float(m), horizon=horizon)
    print(report.summary())
    if args.json or args.json_out:
        _emit(report.to_dict(), args)
    return EXIT_OK


def cmd_oracle(args) -> int:
    name, params = parse_named_spec(args.objective)
    obj = make_objective({"name": name, **params})
    value = compute_jstar_oracle(obj, tol=args.tol)
    print(repr(value))
    return EXIT_OK


def _diagnose_rs(kind: str, params: dict, args) -> dict:
    length = int(params.get("T", 10_000))
    paths = int(params.get("paths", 1000))
    proc = make_rs_process(kind, length, seed=int(args.seed or 0), n_paths=paths)
    guard = rs_guard(proc, seed=int(args.seed or 0))
    out = {"kind": kind, "T": length, "paths": paths, "guard": guard}
    if paths >= 1000:
        out["conclusions"] = check_rs_conclusions(proc)
    return out


def cmd_diagnose(args) -> int:
    """``O4:rho=0.1,d=50,snr=50,c=0.01,samples=20000,points=3`` or ``rs:contracting``."""
    if args.option_spec.startswith("rs:"):
        kind, _, rest = args.option_spec[3:].partition(",")
        _emit(_diagnose_rs(kind, parse_kv(rest), args), args)
        return EXIT_OK
    option, params = parse_named_spec(args.option_spec)
    d = int(params.pop("d", 50))
    snr = params.pop("snr", None)
    c_t = params.pop("c", 0.01 if option.endswith("A") else None)
    samples = int(params.pop("samples", 20_000))
    points = int(params.pop("points", 3))
    spec = DirectionSpec(option, n_coords=int(params.pop("n", 1)),
                         rate_rho=float(params.pop("rho", 1.0)),
                         noise=NoiseModel.from_snr(snr))
    obj_params = {"name": "quadratic_logsumexp", "d": d, "cond_number": 10.0, "seed": 0}
    obj_params.update({k[4:]: v for k, v in params.items() if k.startswith("obj.")})
    unknown = [k for k in params if not k.startswith("obj.")]
    if unknown:
        raise UsageError(f"unknown diagnose parameters {unknown}")
    obj = make_objective(obj_params)
    spec.check_dim(obj.dim)
    rng = rng_stream(int(args.seed or 0), 1)
    thetas = [rng.standard_normal(d) for _ in range(points)]
    report = check_d1_d2(spec, obj, thetas, c_t, n_samples=samples, rng=rng)
    report["predicted_sigma_sq"] = predicted_sigma_sq(option, d, spec.n_coords, spec.rate_rho,
                                                      spec.noise.m_sq, c_t)
    report["predicted_bias"] = predicted_bias(option, d, 0.5 * obj.lipschitz_2L, c_t or 0.0)
    report["direction"] = spec.to_dict()
    report["objective"] = obj.spec()
    report["c_t"] = c_t
    _emit(report, args)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--out", default=None,
                        help=f"output root (default: $BATCHGRAD_OUT or {default_out_root()!r})")
    common.add_argument("--override-conditions", action="store_true",
                        help="run even when step-size conditions fail")
    common.add_argument("--repetitions", type=_positive_int, default=None)
    common.add_argument("--workers", type=_positive_int, default=None,
                        help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="batchgrad", description="Batch-updating stochastic approximation experiments.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("run", parents=[common], help="run a JSON experiment config")
    p.add_argument("config")
    p.add_argument("--merge", action="store_true", help="also write the merged long CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("figure", parents=[common], help="run a figure preset and merge its data")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p.add_argument("--horizon", type=_positive_int, default=None,
                   help="override the preset iteration count")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("diagnose", parents=[common],
                       help="Monte-Carlo bias/variance check of a search direction, or rs:<kind>")
    p.add_argument("option_spec")
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("verify-schedule", help="summability verdicts for a schedule")
    p.add_argument("params", nargs="*", help="key=value among alpha0 c0 tau p q m snr horizon")
    p.add_argument("--json", action="store_true")
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_verify_schedule)

    p = sub.add_parser("oracle", help="reference minimum J* of an objective")
    p.add_argument("objective", help="e.g. quadratic_logsumexp:d=100,cond_number=100,seed=7")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    try:
        return args.func(args)
    except ConditionRefused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, TypeError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
