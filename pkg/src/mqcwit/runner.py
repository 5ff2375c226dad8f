"""Run configured simulations and write result files.

Each sweep point is an isolated computation, mapped over a process pool and
collected in input order; only the parent process writes files.
"""

from __future__ import annotations

import csv
import io
import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import PointSpec, RunConfig, config_hash, config_to_dict, engine_axis
from .params import NO_DECOHERENCE, SpinAxis
from .protocol import (
    ProtocolConfig,
    direct_mqc,
    entropies_of,
    extract_mqc,
    fisher_forms,
    maximize_on_sphere,
    optimize_axis,
    resolve_backend,
    run_echo_protocol,
    simulate,
    squeezing_parameter,
)
from .witness import witness_report

SUMMARY_COLUMNS = (
    "point",
    "parameter",
    "value",
    "N",
    "J",
    "Omega",
    "twist",
    "t",
    "Jt",
    "gamma_ud",
    "gamma_du",
    "gamma_el",
    "gamma_total",
    "N_gamma_t",
    "backend",
    "axis_x",
    "axis_y",
    "axis_z",
    "spectrum_source",
    "calibrated",
    "purity",
    "f_i",
    "f_i_over_N",
    "qfi",
    "qfi_over_N",
    "f_i_over_qfi",
    "depth_f_i",
    "depth_qfi",
    "squeezing_xi2",
    "N_over_xi2",
    "n_violations",
    "max_violation_ratio",
    "protocol_direct_max_diff",
    "imag_residue",
)
SPECTRUM_COLUMNS = (
    "point",
    "value",
    "m",
    "intensity",
    "intensity_direct",
    "separable_bound",
    "violation_ratio",
    "violation",
    "qfi_over_N",
)
ECHO_COLUMNS = ("point", "value", "phi", "fidelity")
ENTROPY_COLUMNS = ("point", "value", "n_traced", "von_neumann", "renyi2")


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        from . import __version__

        return __version__


# --- single point ----------------------------------------------------------------


def _resolve_axis(pt: PointSpec, forms, backend):
    """Engine-frame axis for the point."""
    twist = pt.params.twist
    if isinstance(pt.axis, SpinAxis):
        return engine_axis(pt.axis, twist)
    if pt.axis == "optimize":
        return maximize_on_sphere(forms.f_i)[0]
    # optimize-pure: the axis that is optimal for the same evolution without decoherence
    return optimize_axis(pt.params, NO_DECOHERENCE, pt.t).axis


def _scalar(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if np.isfinite(x) else None


def compute_point(pt: PointSpec, analysis) -> dict:
    """Simulate one point and evaluate every requested quantity."""
    params, rates, t = pt.params, pt.rates, pt.t
    backend = resolve_backend(params, rates, pt.backend)
    state = simulate(params, rates, t, backend)
    forms = fisher_forms(state, qfi=analysis.qfi)
    axis = _resolve_axis(pt, forms, backend)
    direct = direct_mqc(state, axis)

    echo = None
    spectrum = direct
    calibrated = True
    if analysis.echo:
        cfg = ProtocolConfig(params, rates, t, axis, pt.phi_samples, backend)
        echo = run_echo_protocol(cfg)
        calibrated = bool(echo.diagnostics["calibrated"])
        spectrum = extract_mqc(echo.phi, echo.fidelity, params.N, strict=calibrated)

    qfi = forms.f_q(axis) if analysis.qfi else None
    xi2 = None
    if analysis.squeezing:
        try:
            xi2 = squeezing_parameter(state)
        except ValueError:
            xi2 = None
    report = witness_report(spectrum, qfi=qfi, squeezing_xi2=xi2)

    N = params.N
    out_axis = engine_axis(axis, params.twist).n
    ratio = report.violation_ratio
    violated = report.violations
    summary = {
        "point": pt.index,
        "parameter": pt.parameter,
        "value": _value_json(pt.value),
        "N": N,
        "J": params.J,
        "Omega": params.Omega,
        "twist": params.twist,
        "t": t,
        "Jt": params.J * t,
        "gamma_ud": rates.gamma_ud,
        "gamma_du": rates.gamma_du,
        "gamma_el": rates.gamma_el,
        "gamma_total": rates.total,
        "N_gamma_t": N * rates.total * t,
        "backend": backend,
        "axis_x": out_axis[0],
        "axis_y": out_axis[1],
        "axis_z": out_axis[2],
        "spectrum_source": spectrum.source,
        "calibrated": calibrated,
        "purity": direct.purity,
        "f_i": report.f_i,
        "f_i_over_N": report.f_i / N,
        "qfi": qfi,
        "qfi_over_N": None if qfi is None else qfi / N,
        "f_i_over_qfi": None if not qfi else report.f_i / qfi,
        "depth_f_i": report.entanglement_depth,
        "depth_qfi": report.qfi_depth,
        "squeezing_xi2": xi2,
        "N_over_xi2": None if not xi2 else N / xi2,
        "n_violations": int(violated.sum()),
        "max_violation_ratio": float(ratio.max()),
        "protocol_direct_max_diff": float(np.abs(spectrum.values - direct.values).max()) if echo else None,
        "imag_residue": spectrum.diagnostics.get("imag_residue") if echo else None,
    }
    record = {
        "summary": {k: _scalar(v) if isinstance(v, (int, float, np.number, np.bool_)) else v for k, v in summary.items()},
        "spectrum": {
            "orders": spectrum.orders.tolist(),
            "intensity": spectrum.values.tolist(),
            "intensity_direct": direct.values.tolist(),
            "separable_bound": report.separable_bounds.tolist(),
            "violation_ratio": ratio.tolist(),
            "violation": violated.tolist(),
        },
        "validity": None if echo is None else echo.diagnostics["validity"],
    }
    if echo is not None:
        record["echo"] = {"phi": echo.phi.tolist(), "fidelity": echo.fidelity.tolist()}
    if analysis.entropies:
        record["entropies"] = []
        for k in analysis.entropies:
            e = entropies_of(state, k)
            record["entropies"].append({"n_traced": k, "von_neumann": e.von_neumann, "renyi2": e.renyi2})
    return record


def _value_json(v):
    if isinstance(v, SpinAxis):
        return list(v.n)
    return v


def _safe_point(args):
    pt, analysis = args
    try:
        return compute_point(pt, analysis)
    except Exception as exc:  # reported per point, the sweep carries on
        return {
            "error": f"{type(exc).__name__}: {exc}",
            "traceback": traceback.format_exc(),
            "summary": {"point": pt.index, "parameter": pt.parameter, "value": _value_json(pt.value)},
        }


# --- driving ----------------------------------------------------------------------


def worker_count(requested: int | None = None) -> int:
    """``requested``, else ``MQC_WORKERS``, else 1."""
    if requested is None:
        env = os.environ.get("MQC_WORKERS")
        requested = int(env) if env else 1
    if requested < 1:
        raise ValueError(f"workers must be >= 1, got {requested}")
    return requested


@dataclass
class RunResult:
    config: RunConfig
    records: list
    files: list

    @property
    def errors(self) -> list:
        return [r for r in self.records if "error" in r]


def compute_records(cfg: RunConfig, workers: int = 1) -> list[dict]:
    """Records for every point, in sweep order, whatever the worker count."""
    jobs = [(pt, cfg.analysis) for pt in cfg.points()]
    if workers == 1 or len(jobs) == 1:
        return [_safe_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_safe_point, jobs))


def run(cfg: RunConfig, out_dir=None, formats=None, workers: int | None = None) -> RunResult:
    """Compute every point of ``cfg`` and write the result files."""
    records = compute_records(cfg, worker_count(workers))
    files = write_results(cfg, records, out_dir, formats)
    return RunResult(cfg, records, files)


# --- output -----------------------------------------------------------------------


def format_number(x) -> str:
    """17 significant digits in positional notation; booleans as true/false; None empty."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        if not np.isfinite(x):
            return "nan" if np.isnan(x) else ("inf" if x > 0 else "-inf")
        return np.format_float_positional(x, precision=17, unique=False, fractional=False, trim="-")
    if isinstance(x, (list, tuple)):
        return " ".join(format_number(v) for v in x)
    return str(x)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_number(row.get(c)) for c in columns])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _provenance(cfg: RunConfig) -> dict:
    return {"config_hash": config_hash(cfg), "code_version": code_version()}


def tables(records) -> dict[str, tuple]:
    """Flat tables (columns, rows) built from point records."""
    summary, spectrum, echo, entropy = [], [], [], []
    for rec in records:
        s = rec["summary"]
        summary.append({**s, "error": rec.get("error")})
        if "error" in rec:
            continue
        sp = rec["spectrum"]
        for i, m in enumerate(sp["orders"]):
            spectrum.append(
                {
                    "point": s["point"],
                    "value": s["value"],
                    "m": m,
                    "intensity": sp["intensity"][i],
                    "intensity_direct": sp["intensity_direct"][i],
                    "separable_bound": sp["separable_bound"][i],
                    "violation_ratio": sp["violation_ratio"][i],
                    "violation": sp["violation"][i],
                    "qfi_over_N": s["qfi_over_N"],
                }
            )
        if "echo" in rec:
            for phi, f in zip(rec["echo"]["phi"], rec["echo"]["fidelity"]):
                echo.append({"point": s["point"], "value": s["value"], "phi": phi, "fidelity": f})
        for e in rec.get("entropies", []):
            entropy.append({"point": s["point"], "value": s["value"], **e})
    out = {"summary": (SUMMARY_COLUMNS + ("error",), summary), "spectrum": (SPECTRUM_COLUMNS, spectrum)}
    if echo:
        out["echo"] = (ECHO_COLUMNS, echo)
    if entropy:
        out["entropies"] = (ENTROPY_COLUMNS, entropy)
    return out


def write_results(cfg: RunConfig, records, out_dir=None, formats=None) -> list[Path]:
    """Write CSV tables and JSON reports; returns the paths written.

    Every CSV starts with ``# config_hash=...`` and ``# code_version=...``
    comment lines; every JSON carries the same keys.
    """
    out = Path(out_dir if out_dir is not None else cfg.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    formats = tuple(formats) if formats else cfg.outputs.formats
    prov = _provenance(cfg)
    header = "".join(f"# {k}={v}\n" for k, v in sorted(prov.items()))
    written = []
    if "csv" in formats:
        for name, (cols, rows) in tables(records).items():
            written.append(_write(out / f"{name}.csv", header + csv_text(cols, rows)))
    if "json" in formats:
        report = {**prov, "config": config_to_dict(cfg), "points": records}
        written.append(_write(out / "report.json", json_text(report)))
        if cfg.sweep is not None:
            pdir = out / "points"
            pdir.mkdir(exist_ok=True)
            for rec in records:
                i = rec["summary"]["point"]
                written.append(_write(pdir / f"point_{i:04d}.json", json_text({**prov, **rec})))
    return written
