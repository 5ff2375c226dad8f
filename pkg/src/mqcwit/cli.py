"""Command-line front end: ``mqcwit {simulate,mqc,witness,sweep,validate-config}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import runner
from .config import ConfigError, RunConfig, check_writable, config_hash, parse_config, serialize_config
from .dicke import DickeState
from .exact import FullDensityMatrix
from .params import SpinAxis
from .protocol import BACKEND_ALIASES, direct_mqc, resolve_backend
from .spectrum import MqcSpectrum
from .witness import witness_report

PRESETS = {
    "fig1b": ("fig1b",),
    "fig2": ("fig2-ising", "fig2-field"),
    "fig3": ("fig3a", "fig3b"),
}


def preset_text(name: str) -> str:
    return resources.files("mqcwit").joinpath("presets", f"{name}.json").read_text(encoding="utf-8")


def _configs(args) -> list[tuple[str, RunConfig]]:
    """(label, config) pairs from --config or --preset, with --backend applied."""
    if bool(args.config) == bool(args.preset):
        raise ConfigError("arguments", "give exactly one of --config or --preset")
    if args.config:
        items = [(Path(args.config).stem, Path(args.config).read_text(encoding="utf-8"))]
    else:
        suffix = "-ci" if args.ci else ""
        items = [(n + suffix, preset_text(n + suffix)) for n in PRESETS[args.preset]]
    out = []
    for label, text in items:
        cfg = parse_config(text, check_output=False)
        if args.backend and args.backend != "auto":
            cfg = parse_config(_with_backend(cfg, args.backend), check_output=False)
        out.append((label, cfg))
    return out


def _with_backend(cfg: RunConfig, backend: str) -> str:
    d = json.loads(serialize_config(cfg))
    d["protocol"]["backend"] = BACKEND_ALIASES.get(backend, backend)
    return json.dumps(d)


def _out_dir(args, label, cfg, multiple):
    if args.out is None:
        return Path(cfg.outputs.directory)
    return Path(args.out) / label if multiple else Path(args.out)


def _formats(args):
    return (args.format,) if args.format else None


def _execute(args, want_sweep: bool) -> int:
    configs = _configs(args)
    failed = 0
    for label, cfg in configs:
        if not want_sweep and cfg.sweep is not None:
            raise ConfigError("sweep", f"{label} defines a sweep; run it with the 'sweep' subcommand")
        out = _out_dir(args, label, cfg, len(configs) > 1)
        check_writable(out)
        res = runner.run(cfg, out, _formats(args), args.workers)
        for rec in res.errors:
            s = rec["summary"]
            print(f"error at point {s['point']} ({s['parameter']}={s['value']}): {rec['error']}", file=sys.stderr)
        failed += len(res.errors)
        print(f"{label}: {len(res.records)} point(s), hash {config_hash(cfg)} -> {out}")
        if cfg.sweep is None and not res.errors:
            s = res.records[0]["summary"]
            print(
                f"  backend={s['backend']} F_I/N={s['f_i_over_N']:.6g} "
                + (f"F_Q/N={s['qfi_over_N']:.6g} " if s["qfi_over_N"] is not None else "")
                + f"violations={s['n_violations']}"
            )
    return 1 if failed else 0


def cmd_simulate(args) -> int:
    return _execute(args, want_sweep=False)


def cmd_sweep(args) -> int:
    return _execute(args, want_sweep=True)


def cmd_validate(args) -> int:
    for label, cfg in _configs(args):
        check_writable(args.out or cfg.outputs.directory)
        points = cfg.points()
        engines = sorted({resolve_backend(p.params, p.rates, p.backend) for p in points})
        print(f"{label}: ok, {len(points)} point(s), backend {'/'.join(engines)}, hash {config_hash(cfg)}")
        if args.print:
            sys.stdout.write(serialize_config(cfg))
    return 0


def _load_state(path: Path):
    arr = np.load(path)
    if arr.ndim == 1:
        return DickeState(arr.size - 1, arr.astype(complex))
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        N = int(round(np.log2(arr.shape[0])))
        if 2**N != arr.shape[0]:
            raise ValueError("a density matrix must be 2^N x 2^N")
        return FullDensityMatrix(N, arr.astype(complex))
    raise ValueError("state file must hold N+1 Dicke amplitudes or a 2^N x 2^N density matrix")


def _parse_axis(text: str) -> SpinAxis:
    named = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}
    if text in named:
        return SpinAxis.normalized(named[text])
    return SpinAxis.normalized([float(v) for v in text.split(",")])


def _spectrum_rows(spec: MqcSpectrum, report):
    return [
        {
            "m": int(m),
            "intensity": float(spec.values[i]),
            "separable_bound": float(report.separable_bounds[i]),
            "violation": bool(report.violations[i]),
        }
        for i, m in enumerate(spec.orders)
    ]


def _emit(args, name, payload, columns, rows):
    fmt = args.format or "json"
    text = runner.json_text(payload) if fmt == "json" else runner.csv_text(columns, rows)
    if args.out:
        out = Path(args.out)
        check_writable(out)
        out.mkdir(parents=True, exist_ok=True)
        runner._write(out / f"{name}.{fmt}", text)
        print(f"wrote {out / f'{name}.{fmt}'}")
    else:
        sys.stdout.write(text)


def cmd_mqc(args) -> int:
    if args.state:
        state = _load_state(Path(args.state))
        spec = direct_mqc(state, _parse_axis(args.axis or "z"))
        report = witness_report(spec)
        payload = {"N": spec.N, "source": spec.source, **report.to_dict()}
    else:
        [(label, cfg)] = _configs(args)[:1]
        if cfg.sweep is not None:
            raise ConfigError("sweep", "mqc computes a single spectrum; drop the sweep or use 'sweep'")
        rec = runner.compute_point(cfg.points()[0], cfg.analysis)
        spec = MqcSpectrum(cfg.model.N, rec["spectrum"]["intensity"], "protocol" if cfg.analysis.echo else "direct")
        report = witness_report(spec)
        payload = {**report.to_dict(), "config_hash": config_hash(cfg), "code_version": runner.code_version()}
    cols = ("m", "intensity", "separable_bound", "violation")
    _emit(args, "spectrum", payload, cols, _spectrum_rows(spec, report))
    return 0


def _read_spectrum(path: Path, point: int = 0) -> MqcSpectrum:
    """Spectrum from a CSV/JSON table; multi-point run outputs are indexed by ``point``."""
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        d = json.loads(text)
        if "points" in d:
            d = d["points"][point]
        if "spectrum" in d:
            d = d["spectrum"]
        orders = d["orders"]
        values = d.get("intensity", d.get("intensities"))
    else:
        rows = list(csv.DictReader(line for line in text.splitlines() if not line.startswith("#")))
        if rows and "point" in rows[0]:
            rows = [r for r in rows if int(r["point"]) == point]
        orders = [int(r["m"]) for r in rows]
        values = [float(r["intensity"]) for r in rows]
    if not orders:
        raise ValueError(f"no spectrum rows found in {path}")
    N = max(abs(int(m)) for m in orders)
    if sorted(int(m) for m in orders) != list(range(-N, N + 1)):
        raise ValueError("spectrum must list every order m = -N..N exactly once")
    order = np.argsort(orders)
    return MqcSpectrum(N, np.asarray(values, dtype=float)[order])


def cmd_witness(args) -> int:
    spec = _read_spectrum(Path(args.spectrum), args.point)
    report = witness_report(spec, qfi=args.qfi)
    cols = ("m", "intensity", "separable_bound", "violation")
    _emit(args, "witness", report.to_dict(), cols, _spectrum_rows(spec, report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mqcwit", description="Multiple-quantum coherence entanglement witnesses.")
    sub = p.add_subparsers(dest="command", required=True)

    def source(sp, presets=True):
        sp.add_argument("--config", metavar="PATH", help="JSON run configuration")
        if presets:
            sp.add_argument("--preset", choices=sorted(PRESETS), help="shipped figure configuration")
            sp.add_argument("--ci", action="store_true", help="use the scaled-down preset variant")
        sp.add_argument("--backend", choices=("auto", "dicke", "sym", "exact"), default=None)

    def output(sp):
        sp.add_argument("--out", metavar="DIR", help="output directory (default: from the config)")
        sp.add_argument("--format", choices=("csv", "json"), help="restrict output to one format")

    sp = sub.add_parser("simulate", help="single run from a config or preset")
    source(sp)
    output(sp)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="parameter sweep over a process pool")
    source(sp)
    output(sp)
    sp.add_argument("--workers", type=int, default=None, help="pool size (default: MQC_WORKERS or 1)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("mqc", help="MQC spectrum from a protocol config or a saved state")
    source(sp)
    output(sp)
    sp.add_argument("--state", metavar="NPY", help="Dicke amplitudes (N+1) or a 2^N density matrix")
    sp.add_argument("--axis", help="rotation axis for --state: x, y, z or 'nx,ny,nz'")
    sp.set_defaults(func=cmd_mqc, preset=None, ci=False)

    sp = sub.add_parser("witness", help="witness report from a spectrum file (CSV or JSON)")
    sp.add_argument("--spectrum", required=True, metavar="PATH")
    sp.add_argument("--qfi", type=float, default=None, help="optional quantum Fisher information")
    sp.add_argument("--point", type=int, default=0, help="sweep point to read from a multi-point file")
    output(sp)
    sp.set_defaults(func=cmd_witness)

    sp = sub.add_parser("validate-config", help="check a config and print its hash")
    source(sp)
    sp.add_argument("--out", metavar="DIR", help="output directory to check for writability")
    sp.add_argument("--print", action="store_true", help="print the canonical serialization")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "mqc" and not args.state and not args.config and not args.preset:
        print("error: mqc needs --config, --preset or --state", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
