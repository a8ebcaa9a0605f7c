"""Command-line entry point.

Usage::

    memres run <command> [options]

Commands: kernel-check, resolvent-probe, smoothing-fit, rd-run, rd-sweep,
hj-run, exponents.  Options can also come from ``--config FILE`` (a JSON
object whose keys are option names with dashes or underscores); explicit
flags win.  Without ``--out`` the main report goes to stdout.  With
``--out DIR`` every artifact is written to DIR next to ``config.json``,
which records the resolved configuration and its hash.

Kernel literals::

    hookean[:k=K]
    power:alpha=A                       g = t^(A-1)/Gamma(A)
    maxwell:c=C[,k=K]                   g = K e^(C t)
    sum:[{"k":K,"alpha":A,"c":C},...]   general sum, c defaults to 0

Exit codes: 0 success, 2 configuration or domain error, 3 numerical
accuracy failure, 4 blow-up detected with ``--fail-on-blowup``.  Errors are
also printed to stderr as a JSON object.  The sweep worker count is read
from the MEMRES_WORKERS environment variable (default 1); results do not
depend on it.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConfigError, MemresError
from .exponents import hj_wellposed_params, ns_wellposed_params, rd_wellposed_params
from .kernel import check_hypotheses, parse_kernel
from .mild import MildProblem, NonlinearitySpec, solve_mild
from .resolvent import SCHEMA_HEADER, fit_smoothing_rate, scalar_resolvent_volterra, talbot_inverse
from .spectral import build_operator

EXIT_BLOWUP = 4
WORKERS_ENV = "MEMRES_WORKERS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("ConfigError", message)
        sys.exit(2)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--out", help="output directory for artifacts")
    p.add_argument("--force", action="store_true", help="overwrite an output directory with a different config")
    p.add_argument("--seed", type=int, default=0)


def _add_operator(p: argparse.ArgumentParser, n_modes: int) -> None:
    p.add_argument("--dimension", type=int, default=1)
    p.add_argument("--length", type=float, default=1.0)
    p.add_argument("--n-modes", type=int, default=n_modes)


def _add_mild(p: argparse.ArgumentParser, rho: float) -> None:
    p.add_argument("--kernel", default="power:alpha=0.5")
    _add_operator(p, 32)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=rho)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--mode", type=int, default=1, help="index of the excited mode along each axis")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--threshold", type=float, default=1e8)
    p.add_argument("--small-t", action="store_true")
    p.add_argument("--fail-on-blowup", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memres", description="Resolvent families and mild solutions for equations with memory.")
    top = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    run = top.add_parser("run", help="run an experiment")
    sub = run.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.commands = sub.choices

    p = sub.add_parser("kernel-check", help="sector data and hypothesis verdicts")
    _add_common(p)
    p.add_argument("--kernel", help="kernel literal (required)")
    p.add_argument("--psi0", type=float, default=0.0)

    p = sub.add_parser("resolvent-probe", help="scalar resolvent table and cross-method check")
    _add_common(p)
    p.add_argument("--kernel", help="kernel literal (required)")
    p.add_argument("--mu", type=float, help="required")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--extrapolate", action="store_true")
    p.add_argument("--probe-times", type=_float_list, default=[0.1, 0.5, 1.0])

    p = sub.add_parser("smoothing-fit", help="fit the smoothing rate of S(t)")
    _add_common(p)
    p.add_argument("--kernel", help="kernel literal (required)")
    _add_operator(p, 4096)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--t-min", type=float, default=1e-3)
    p.add_argument("--t-max", type=float, default=1e-1)
    p.add_argument("--n-samples", type=int, default=16)

    p = sub.add_parser("rd-run", help="reaction-diffusion c0 |u|^(rho-1) u")
    _add_common(p)
    _add_mild(p, 2.0)

    p = sub.add_parser("hj-run", help="gradient nonlinearity c0 |grad u|^rho")
    _add_common(p)
    _add_mild(p, 1.5)

    p = sub.add_parser("rd-sweep", help="status and blow-up time over (rho, amplitude, q)")
    _add_common(p)
    p.add_argument("--kernel", default="power:alpha=0.5")
    _add_operator(p, 32)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--rho", type=_float_list, default=[2.0])
    p.add_argument("--amplitude", type=_float_list, default=[0.01, 50.0])
    p.add_argument("--q", type=_float_list, default=[2.0])
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--threshold", type=float, default=1e8)
    p.add_argument("--fail-on-blowup", action="store_true")

    p = sub.add_parser("exponents", help="admissibility and eps-window arithmetic")
    _add_common(p)
    p.add_argument("--app", choices=["rd", "ns", "hj"], help="required")
    p.add_argument("--N", type=int, help="required")
    p.add_argument("--q", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--zeta", type=float, help="required")
    p.add_argument("--p", type=float)
    p.add_argument("--s", type=float)
    return parser


_RUN_KEYS = {"config", "out", "force", "verb", "command"}
_REQUIRED = {
    "kernel-check": ("kernel",),
    "resolvent-probe": ("kernel", "mu"),
    "smoothing-fit": ("kernel",),
    "exponents": ("app", "N", "zeta"),
}


def _coerce(action: argparse.Action, value):
    """Apply an option's type and choices to a value read from a config file."""
    if action.type is _float_list:
        if isinstance(value, (int, float)):
            value = [value]
        if isinstance(value, list):
            try:
                value = [float(v) for v in value]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{action.dest} must be a list of numbers") from exc
        else:
            value = _float_list(str(value))
    elif isinstance(action, argparse._StoreTrueAction):
        if not isinstance(value, bool):
            raise ConfigError(f"{action.dest} must be true or false")
    elif action.type is not None and value is not None:
        try:
            if action.type is int and isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            value = action.type(value)
        except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"bad value {value!r} for {action.dest}") from exc
    if action.choices is not None and value not in action.choices:
        raise ConfigError(f"{action.dest} must be one of {list(action.choices)}, got {value!r}")
    return value


def _resolve(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        actions = {a.dest: a for a in parser.commands[args.command]._actions}
        explicit = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, val in file_cfg.items():
            name = key.replace("-", "_")
            if name not in actions or name in _RUN_KEYS or name == "help":
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            if name not in explicit:
                setattr(args, name, _coerce(actions[name], val))
    missing = [n for n in _REQUIRED.get(args.command, ()) if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"{args.command} needs {', '.join('--' + m for m in missing)}")
    return args


def _resolved_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _RUN_KEYS}


def config_hash(cfg: dict, command: str) -> str:
    blob = json.dumps({"command": command, **cfg}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# artifacts


class _Sink:
    """Collects named artifacts and writes them atomically."""

    def __init__(self, args: argparse.Namespace):
        self.out = Path(args.out) if args.out else None
        self.force = args.force
        self.cfg = _resolved_config(args)
        self.command = args.command
        self.hash = config_hash(self.cfg, self.command)
        self.files: dict[str, bytes] = {}
        if self.out is not None:
            self._check_dir()

    def _check_dir(self) -> None:
        existing = self.out / "config.json"
        if existing.exists() and not self.force:
            try:
                old = json.loads(existing.read_text()).get("config_hash")
            except (OSError, json.JSONDecodeError):
                old = None
            if old != self.hash:
                raise ConfigError(f"{self.out} holds results of a different config ({old}); use --force")

    def csv(self, name: str, header: list[str], rows) -> str:
        buf = io.StringIO()
        buf.write(f"{SCHEMA_HEADER}\n# config_hash={self.hash}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        self.files[name] = text.encode()
        return text

    def json(self, name: str, payload: dict) -> str:
        text = json.dumps({**payload, "config_hash": self.hash}, sort_keys=True, indent=2, default=_json_default) + "\n"
        self.files[name] = text.encode()
        return text

    def raw(self, name: str, data: bytes) -> None:
        self.files[name] = data

    def flush(self, primary: str) -> None:
        if self.out is None:
            sys.stdout.write(self.files[primary].decode())
            return
        self.out.mkdir(parents=True, exist_ok=True)
        config = {"command": self.command, "config": self.cfg, "config_hash": self.hash}
        self.files["config.json"] = (json.dumps(config, sort_keys=True, indent=2) + "\n").encode()
        for name, data in sorted(self.files.items()):
            _atomic_write(self.out / name, data)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)}")


# ---------------------------------------------------------------------------
# commands


def _cmd_kernel_check(args, sink: _Sink) -> int:
    kernel = parse_kernel(args.kernel)
    report = check_hypotheses(kernel, args.psi0)
    sink.json("report.json", {"kernel": kernel.to_dict(), **report.to_dict()})
    sink.flush("report.json")
    return 0


def _cmd_resolvent_probe(args, sink: _Sink) -> int:
    kernel = parse_kernel(args.kernel)
    table = scalar_resolvent_volterra(kernel, args.mu, args.h, args.T, extrapolate=args.extrapolate)
    rows = [(t, s, table.method, table.mu, table.kernel_id) for t, s in zip(table.times, table.values)]
    sink.csv("table.csv", ["t", "s_mu", "method", "mu", "kernel_id"], rows)
    probes = [t for t in args.probe_times if 0 < t <= args.T]
    agreement = []
    if probes:
        talbot = talbot_inverse(kernel, [args.mu], probes)[0][0]
        for t, v in zip(probes, talbot):
            vol = table.at(t)
            agreement.append({"t": t, "volterra": vol, "talbot": float(v), "abs_diff": abs(vol - float(v))})
    sink.json(
        "agreement.json",
        {"kernel_id": kernel.kernel_id, "mu": args.mu, "h": args.h, "error_estimate": table.error_estimate,
         "probes": agreement},
    )
    sink.flush("table.csv")
    return 0


def _cmd_smoothing_fit(args, sink: _Sink) -> int:
    kernel = parse_kernel(args.kernel)
    op = build_operator(dimension=args.dimension, lengths=args.length, n_modes=args.n_modes, delta=1.0)
    fit = fit_smoothing_rate(op, kernel, args.gamma, args.theta, args.t_min, args.t_max, args.n_samples)
    sink.csv(
        "fit.csv",
        ["t", "norm", "slope", "target"],
        [(t, n, fit.slope, fit.target) for t, n in zip(fit.times, fit.norms)],
    )
    sink.json("fit.json", {"kernel_id": kernel.kernel_id, "gamma": args.gamma, "theta": args.theta, **fit.to_dict()})
    sink.flush("fit.csv")
    return 0


def _mild_problem(args, kind: str, rho: float, amplitude: float) -> MildProblem:
    kernel = parse_kernel(args.kernel)
    op = build_operator(dimension=args.dimension, lengths=args.length, n_modes=args.n_modes, delta=1.0)
    mode = getattr(args, "mode", 1)
    if not 1 <= mode <= min(op.shape):
        raise ConfigError(f"mode {mode} outside 1..{min(op.shape)}")
    u0 = op.unit(*([mode] * op.dimension)) * amplitude
    nl = NonlinearitySpec(kind, args.c0, rho)
    return MildProblem(
        op, kernel, u0, nl, T=args.T, h=args.h, eps=args.eps, blowup_threshold=args.threshold,
        small_t=getattr(args, "small_t", False),
    )


def _cmd_mild_run(args, sink: _Sink, kind: str) -> int:
    problem = _mild_problem(args, kind, args.rho, args.amplitude)
    sol = solve_mild(problem)
    n1, ne, prof = sol.norms(1.0), sol.norms(1.0 + sol.eps), sol.weighted_profile()
    sink.csv(
        "solution.csv",
        ["t", "norm_X1", "norm_X1pe", "weighted_profile", "status"],
        [(t, a, b, c, sol.status) for t, a, b, c in zip(sol.times, n1, ne, prof)],
    )
    buf = io.BytesIO()
    np.save(buf, sol.coefficient_dump())
    sink.raw("coefficients.npy", buf.getvalue())
    sink.json(
        "status.json",
        {"status": sol.status, "tau_estimate": sol.tau_estimate, "failed_step": sol.failed_step, "flags": sol.flags},
    )
    sink.flush("solution.csv")
    if sol.status == "blowup" and args.fail_on_blowup:
        return EXIT_BLOWUP
    return 0


def _sweep_point(payload: tuple) -> dict:
    args_dict, rho, amplitude, q = payload
    args = argparse.Namespace(**args_dict)
    op_dim = args.dimension
    zeta = parse_kernel(args.kernel).zeta_g
    try:
        adm = rd_wellposed_params(op_dim, q, rho, zeta).admissible
    except MemresError:
        adm = False
    problem = _mild_problem(args, "power", rho, amplitude)
    sol = solve_mild(problem)
    return {"rho": rho, "amplitude": amplitude, "q": q, "admissible": adm, "status": sol.status,
            "tau_estimate": sol.tau_estimate}


def _cmd_rd_sweep(args, sink: _Sink) -> int:
    points = [(r, a, q) for r in args.rho for a in args.amplitude for q in args.q]
    base = {k: v for k, v in vars(args).items()}
    payloads = [(base, r, a, q) for r, a, q in points]
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    done_dir = sink.out / "points" if sink.out is not None else None
    results: list[dict | None] = [None] * len(points)
    if done_dir is not None and done_dir.exists():
        for i in range(len(points)):
            f = done_dir / f"{i:05d}-{sink.hash}.json"
            if f.exists():
                results[i] = json.loads(f.read_text())
    todo = [i for i, r in enumerate(results) if r is None]

    def record(i, res):
        results[i] = res
        if done_dir is not None:
            _atomic_write(done_dir / f"{i:05d}-{sink.hash}.json", json.dumps(res, sort_keys=True).encode())

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in zip(todo, pool.map(_sweep_point, [payloads[i] for i in todo])):
                record(i, res)
    else:
        for i in todo:
            record(i, _sweep_point(payloads[i]))
    header = ["rho", "amplitude", "q", "admissible", "status", "tau_estimate"]
    sink.csv("sweep.csv", header, [[r[k] for k in header] for r in results])
    sink.flush("sweep.csv")
    if args.fail_on_blowup and any(r["status"] == "blowup" for r in results):
        return EXIT_BLOWUP
    return 0


def _cmd_exponents(args, sink: _Sink) -> int:
    def need(*names):
        missing = [n for n in names if getattr(args, n) is None]
        if missing:
            raise ConfigError(f"--app {args.app} needs {', '.join('--' + m for m in missing)}")

    if args.app == "rd":
        need("q", "rho")
        params = rd_wellposed_params(args.N, args.q, args.rho, args.zeta)
    elif args.app == "ns":
        need("q")
        params = ns_wellposed_params(args.N, args.q, args.zeta)
    else:
        need("p", "s", "rho")
        params = hj_wellposed_params(args.N, args.p, args.s, args.rho, args.zeta)
    sink.json("exponents.json", params.to_dict())
    sink.flush("exponents.json")
    return 0


_COMMANDS = {
    "kernel-check": _cmd_kernel_check,
    "resolvent-probe": _cmd_resolvent_probe,
    "smoothing-fit": _cmd_smoothing_fit,
    "rd-run": lambda a, s: _cmd_mild_run(a, s, "power"),
    "hj-run": lambda a, s: _cmd_mild_run(a, s, "gradient"),
    "rd-sweep": _cmd_rd_sweep,
    "exponents": _cmd_exponents,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _resolve(parser, argv)
        sink = _Sink(args)
        return _COMMANDS[args.command](args, sink)
    except MemresError as exc:
        _emit_error(type(exc).__name__, str(exc))
        return exc.exit_code
    except OSError as exc:
        _emit_error("OSError", str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
