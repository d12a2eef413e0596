"""
Command-line front end.

    dqmesq run      --model spin_boson --regime high --method classical --out runs/sb
    dqmesq compare  --model spin_boson --regime high --methods classical,heom --gate 1e-8
    dqmesq scaling  --model spin_boson --sweep eps --values 0.1,0.05,0.025
    dqmesq decompose --kind drude --param lam=0.5 --param gamma=5 --temperature 1 --K 2
    dqmesq dump-circuit --model siam --regime low

Every subcommand also accepts ``--config job.json``; command-line flags take
precedence over the file. Outputs are a CSV (the data contract), a JSON
manifest and, unless ``--no-plot`` is given, a PNG figure next to the CSV.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import job_from_config, load, modeset_to_table, validate
from .errors import ConfigError, DqmeError, IncompatibleMethods
from .models import MODELS, describe_parameters
from .modes import SpectralDensity, decompose_spectral_density
from .propagate import spectral_abscissa
from .qsim import RegisterLayout, circuit_gates
from .runner import METHODS, compare_methods, run_method, scaling_study

log = logging.getLogger("dqmesq")

EXIT_OK, EXIT_ERROR, EXIT_GATE = 0, 2, 1


# -- output helpers --------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.17g" % x


def trajectory_csv(times, values: dict) -> str:
    """``t,<obs>`` table; complex columns split into ``_re``/``_im``."""
    header, cols = ["t"], [np.asarray(times, dtype=float)]
    for name, arr in values.items():
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            header += [f"{name}_re", f"{name}_im"]
            cols += [arr.real, arr.imag]
        else:
            header.append(name)
            cols.append(arr.astype(float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*cols):
        w.writerow([_fmt(float(x)) for x in row])
    return buf.getvalue()


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _versions() -> dict:
    return {"dqmesq": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def manifest(job, method: str, wall: float, extra: dict | None = None) -> dict:
    gen = job.generator
    out = {
        "model": job.name,
        "parameters": describe_parameters(job.parameters),
        "layout": gen.layout.describe(),
        "qubits": RegisterLayout.from_generator(gen).n_qubits,
        "method": method,
        "wall_time_s": wall,
        "versions": _versions(),
        "regime": job.regime,
        "observables": list(job.observables),
        "generated_modes": job.generated,
        "propagation": {"dt": job.prop.dt, "t_final": job.prop.t_final,
                        "stride": job.prop.stride, "method": job.prop.method},
        "lcu": {"eps": job.lcu.eps, "dt": job.lcu.dt, "backend": job.lcu.backend,
                "sampled": job.lcu.sampled, "seed": job.lcu.seed},
        "spectral_abscissa": spectral_abscissa(gen),
    }
    out.update(extra or {})
    return _jsonable(out)


def _dump_json(path: Path, obj):
    _write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


# -- argument handling -----------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _settings(args) -> dict:
    doc = load(args.config) if args.config else {}
    doc = dict(doc)
    if args.model:
        for k in ("system", "modes", "decomposer", "layout"):
            doc.pop(k, None)
        doc["model"] = args.model
    if getattr(args, "regime", None):
        doc["regime"] = args.regime
    if getattr(args, "set", None):
        ov = dict(doc.get("overrides", {}))
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}", field="overrides")
            k, v = item.split("=", 1)
            ov[k] = _parse_value(v)
        doc["overrides"] = ov
    if getattr(args, "t_final", None) is not None:
        doc["propagation"] = dict(doc.get("propagation", {}), t_final=args.t_final)
    if getattr(args, "eps", None) is not None:
        doc["lcu"] = dict(doc.get("lcu", {}), eps=args.eps)
    if args.seed is not None:
        doc["seed"] = args.seed
    if "model" not in doc and "system" not in doc:
        raise ConfigError("no job given: use --model or --config", field="model")
    return validate(doc)


def _outdir(args, doc) -> Path:
    return Path(args.out or doc.get("output", {}).get("dir", "dqmesq-out"))


def _plot_enabled(args, doc) -> bool:
    return not args.no_plot and doc.get("output", {}).get("plot", True)


def _stem(job, method):
    reg = f"_{job.regime}" if job.regime else ""
    return f"{job.name}{reg}_{method}"


# -- subcommands -----------------------------------------------------------

def cmd_run(args) -> int:
    doc = _settings(args)
    method = args.method or doc.get("method", "classical")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}", field="method")
    job = job_from_config(doc)
    res = run_method(job, method, seed=doc.get("seed"))
    out = _outdir(args, doc)
    stem = _stem(job, method)
    csv_path = out / f"{stem}.csv"
    _write(csv_path, trajectory_csv(res.times, res.values))
    files = {"csv": csv_path.name}
    if _plot_enabled(args, doc):
        from .plotting import plot_trajectory
        files["figure"] = plot_trajectory(res.times, res.values, out / f"{stem}.png",
                                          title=stem).name
    _dump_json(out / f"{stem}.manifest.json",
               manifest(job, method, res.wall_time_s, {"files": files, "info": res.info}))
    print(f"{csv_path} ({len(res.times)} rows, {res.wall_time_s:.2f} s)")
    return EXIT_OK


def cmd_compare(args) -> int:
    doc = _settings(args)
    methods = args.methods.split(",") if args.methods else doc.get("methods")
    if args.against:
        methods = ["classical", args.against]
    if not methods:
        raise ConfigError("compare needs --methods or 'methods' in the config", field="methods")
    gate = args.gate if args.gate is not None else doc.get("gate")
    job = job_from_config(doc)
    report, results = compare_methods(job, methods, gate=gate, seed=doc.get("seed"))
    out = _outdir(args, doc)
    stem = _stem(job, "compare")
    files = {}
    for res in results:
        p = out / f"{_stem(job, res.method)}.csv"
        _write(p, trajectory_csv(res.times, res.values))
        files[res.method] = p.name
    if _plot_enabled(args, doc):
        from .plotting import plot_comparison
        files["figure"] = plot_comparison(results, out / f"{stem}.png", title=stem).name
    total = sum(r.wall_time_s for r in results)
    _dump_json(out / f"{stem}.json", report)
    _dump_json(out / f"{stem}.manifest.json",
               manifest(job, ",".join(methods), total, {"files": files, "report": f"{stem}.json"}))
    for row in report["differences"]:
        print(f"{row['method']:>10s} vs {row['reference']:<10s} {row['observable']:<14s} "
              f"max_abs={row['max_abs']:.3e} rms={row['rms']:.3e}")
    if gate is not None and not report["passed"]:
        print(f"FAIL: max-abs difference {report['max_abs']:.3e} exceeds gate {gate:g}")
        return EXIT_GATE
    return EXIT_OK


def cmd_scaling(args) -> int:
    doc = _settings(args)
    sweep = dict(doc.get("sweep", {}))
    if args.sweep:
        sweep["parameter"] = args.sweep
    if args.values:
        sweep["values"] = [float(v) for v in args.values.split(",")]
    if args.backend:
        sweep["backend"] = args.backend
    if "parameter" not in sweep or "values" not in sweep:
        raise ConfigError("scaling needs --sweep and --values (or a 'sweep' block)", field="sweep")
    job = job_from_config(doc)
    t0 = time.perf_counter()
    report = scaling_study(job, sweep["parameter"], sweep["values"], sweep.get("backend"))
    wall = time.perf_counter() - t0
    out = _outdir(args, doc)
    stem = _stem(job, f"scaling_{sweep['parameter']}")
    lines = [f"{sweep['parameter']},max_abs_error"]
    lines += [f"{_fmt(v)},{_fmt(e)}" for v, e in zip(report["values"], report["errors"])]
    _write(out / f"{stem}.csv", "\n".join(lines) + "\n")
    files = {"csv": f"{stem}.csv", "report": f"{stem}.json"}
    if _plot_enabled(args, doc):
        from .plotting import plot_scaling
        files["figure"] = plot_scaling(report, out / f"{stem}.png").name
    _dump_json(out / f"{stem}.json", report)
    _dump_json(out / f"{stem}.manifest.json", manifest(job, "qsim", wall, {"files": files}))
    print(f"slope {report['slope']:.3f}; ratios " + ", ".join(f"{r:.2f}" for r in report["ratios"]))
    return EXIT_OK


def cmd_decompose(args) -> int:
    if args.model:
        from .models import paper_mode_table
        ms = paper_mode_table(args.model, args.regime)
        source = {"model": args.model, "regime": args.regime}
    else:
        if not args.kind:
            raise ConfigError("decompose needs --kind (or --model)", field="kind")
        params = {}
        for item in args.param or []:
            if "=" not in item:
                raise ConfigError(f"--param expects name=value, got {item!r}", field="param")
            k, v = item.split("=", 1)
            params[k] = float(v)
        try:
            J = SpectralDensity(args.kind, params, args.temperature)
        except ValueError as exc:
            raise ConfigError(str(exc), field="param") from None
        ms = decompose_spectral_density(J, args.K)
        source = {"kind": args.kind, "params": params, "temperature": args.temperature, "K": args.K}
    doc = {"source": source, "statistics": ms.statistics, "generated": ms.generated,
           "pairing": list(ms.pairing), "modes": modeset_to_table(ms)}
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        _write(Path(args.out) / "modes.json", text)
        lines = ["eta_re,eta_im,gamma_re,gamma_im,sigma"]
        lines += [",".join([_fmt(m["eta_re"]), _fmt(m["eta_im"]), _fmt(m["gamma_re"]),
                            _fmt(m["gamma_im"]), str(m["sigma"])]) for m in doc["modes"]]
        _write(Path(args.out) / "modes.csv", "\n".join(lines) + "\n")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_dump_circuit(args) -> int:
    doc = _settings(args)
    job = job_from_config(doc)
    layout = RegisterLayout.from_generator(job.generator)
    doc_out = {"qubits": layout.n_qubits, "registers": layout.qubit_map(),
               "gates": circuit_gates(job.generator, job.lcu, layout)}
    text = json.dumps(_jsonable(doc_out), indent=2) + "\n"
    if args.out:
        _write(Path(args.out) / f"{_stem(job, 'circuit')}.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dqmesq", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--model", choices=MODELS)
        sp.add_argument("--regime", choices=("low", "high"))
        sp.add_argument("--config", help="JSON job file")
        sp.add_argument("--seed", type=int, help="seed for the sampled-measurement mode")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="model parameter override (repeatable)")
        if out:
            sp.add_argument("--out", help="output directory")
            sp.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
        sp.add_argument("--t-final", type=float, dest="t_final")
        sp.add_argument("--eps", type=float, help="LCU expansion parameter")

    sp = sub.add_parser("run", help="propagate one job with one method")
    common(sp)
    sp.add_argument("--method", choices=METHODS)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="run several methods and report differences")
    common(sp)
    sp.add_argument("--methods", help="comma-separated, e.g. classical,heom")
    sp.add_argument("--method", help=argparse.SUPPRESS)
    sp.add_argument("--against", choices=METHODS, help="shorthand for --methods classical,<method>")
    sp.add_argument("--gate", type=float, help="exit nonzero when a max-abs difference exceeds this")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("scaling", help="LCU error scaling against the classical oracle")
    common(sp)
    sp.add_argument("--sweep", choices=("eps", "dt"))
    sp.add_argument("--values", help="comma-separated geometric sweep, at least three points")
    sp.add_argument("--backend", choices=("exact", "trotter"))
    sp.add_argument("--method", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_scaling)

    sp = sub.add_parser("decompose", help="exponential decomposition of a spectral density")
    sp.add_argument("--model", choices=MODELS, help="dump a built-in table instead")
    sp.add_argument("--regime", choices=("low", "high"))
    sp.add_argument("--kind", choices=("drude", "brownian", "lorentzian"))
    sp.add_argument("--param", action="append", metavar="NAME=VALUE")
    sp.add_argument("--temperature", type=float, default=1.0)
    sp.add_argument("--K", type=int, default=2)
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("dump-circuit", help="gate list of one LCU step")
    common(sp)
    sp.add_argument("--method", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_dump_circuit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except IncompatibleMethods as exc:
        print(f"incompatible methods: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except DqmeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
