"""Turn validated RunConfigs into simulations and persist their results."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import drives, effective, evolve, hilbert, qlm, trap
from ..units import khz, to_khz
from .config import RunConfig
from .presets import get_preset

FLOAT_FMT = "%.10g"
GHZ_WINDOW_FACTOR = 0.6  # of the predicted three-spin period
GHZ_FALLBACK_MS = 10.0
DEFAULT_T_FINAL_MS = 40.0


def _f(x):
    return FLOAT_FMT % x


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer)):
        return _json_safe(v.item())
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def dump_json(data):
    return json.dumps(_json_safe(data), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# physics setup ---------------------------------------------------------------


def trap_config(cfg):
    return trap.TrapConfig(cfg.n_ions, khz(cfg.omega_x_khz), khz(cfg.omega_z_khz), khz(cfg.omega_rec_khz))


def drive_set(cfg, eta_com, *, mirror=None):
    rabi_r = khz(cfg.omega_r_khz)
    rabi_b = khz(cfg.omega_b_khz) if cfg.omega_b_khz is not None else 2.0 * rabi_r / eta_com
    return drives.DriveSet(
        rabi_r, rabi_b, khz(cfg.delta_khz), mirror=cfg.mirror if mirror is None else mirror, q=cfg.q
    )


def _setup(cfg):
    """(series, layout, mode_names, drive, spectrum) for a dynamical drive model."""
    spectrum = trap.transverse_modes(trap_config(cfg))
    eta = spectrum.eta_com
    if cfg.is_single_mode:
        two = cfg.model == "single_mode_2drive"
        drive = drive_set(cfg, eta, mirror=two)
        layout = hilbert.SpaceLayout(cfg.n_ions, (cfg.trunc_com,))
        build = drives.single_mode_two_drive if two else drives.single_mode_one_drive
        return build(drive, eta, layout), layout, ("com",), drive, spectrum
    drive = drive_set(cfg, eta)
    cutoffs = (cfg.trunc_com,) + (cfg.trunc_other,) * (spectrum.n_modes - 1)
    layout = hilbert.SpaceLayout(cfg.n_ions, cutoffs)
    return drives.multi_mode_two_drive(drive, spectrum, layout), layout, spectrum.mode_names, drive, spectrum


def _couplings(cfg, drive, spectrum):
    if cfg.is_single_mode:
        return effective.effective_single_mode_drive(drive, spectrum.eta_com, 0, cfg.n_ions)
    return effective.effective_multi_mode(spectrum, drive)


def _safe_period(couplings):
    try:
        return effective.predicted_period(couplings)
    except Exception:
        return math.nan


def _policy(cfg, t_final, *, convergence=None):
    return evolve.PropagationPolicy(
        t_final=t_final,
        dt=cfg.dt_ns * 1e-9 if cfg.dt_ns is not None else None,
        record_interval=cfg.record_interval_us * 1e-6,
        convergence_check=cfg.convergence_check if convergence is None else convergence,
        steps_per_period=cfg.resolved_steps_per_period(),
    )


# models ----------------------------------------------------------------------


def _dynamics(cfg):
    series, layout, names, drive, spectrum = _setup(cfg)
    initial = hilbert.product_state(cfg.initial_spins, (0,) * layout.n_modes, layout)
    couplings = _couplings(cfg, drive, spectrum)
    t_final = (cfg.t_final_ms or DEFAULT_T_FINAL_MS) * 1e-3
    ts = evolve.propagate(series, initial, _policy(cfg, t_final), mode_names=names)
    window = cfg.average_window_ms * 1e-3 if cfg.average_window_ms is not None else None
    summary = _dynamics_summary(cfg, ts, layout, window)
    summary["predicted_period_ms"] = _safe_period(couplings) * 1e3
    return ts, summary


def _dynamics_summary(cfg, ts, layout, window):
    s = {
        "dimension": layout.dimension,
        "dt_ns": ts.dt * 1e9,
        "norm_drift": ts.norm_drift,
        "max_leak": ts.max_leak,
        "flags": list(ts.flags),
        "n_total_mean": evolve.time_average(ts, "n_total", window),
        "sz_initial": [float(v) for v in ts.sz[0]],
        "max_abs_sz_change": [float(v) for v in np.max(np.abs(ts.sz - ts.sz[0]), axis=0)],
    }
    for m, name in enumerate(ts.mode_names):
        s[f"n_{name}_mean"] = evolve.time_average(ts, f"n_{name}", window)
        s[f"leak_{name}_max"] = float(ts.leak[:, m].max())
    if s["n_total_mean"] is not None and len(ts.mode_names) > 1:
        s["n_non_com_mean"] = s["n_total_mean"] - s["n_com_mean"]
    if all(c in "↓dD" for c in cfg.initial_spins):
        s["period_ms"] = evolve.first_oscillation_period(ts.times, ts.sz[:, 0]) * 1e3
    if ts.dt_halving_change is not None:
        s["dt_halving_change"] = ts.dt_halving_change
    return s


def _ghz(cfg):
    series, layout, names, drive, spectrum = _setup(cfg)
    initial = hilbert.product_state(cfg.initial_spins, (0,) * layout.n_modes, layout)
    t3 = _safe_period(_couplings(cfg, drive, spectrum))
    if cfg.t_final_ms is not None:
        t_final = cfg.t_final_ms * 1e-3
    elif math.isfinite(t3):
        t_final = GHZ_WINDOW_FACTOR * t3
    else:
        t_final = GHZ_FALLBACK_MS * 1e-3
    ts = evolve.propagate(series, initial, _policy(cfg, t_final), target=evolve.ghz_state(cfg.n_ions), mode_names=names)
    k = int(np.argmax(ts.fidelity))
    summary = _dynamics_summary(cfg, ts, layout, None)
    summary.update(
        predicted_period_ms=t3 * 1e3,
        omega_r_khz=to_khz(drive.rabi_red),
        F_max=float(ts.fidelity[k]),
        t_max_ms=float(ts.times[k] * 1e3),
        t_first_above_0_95_ms=_first_crossing(ts.times, ts.fidelity, 0.95) * 1e3,
    )
    return ts, summary


def _first_crossing(times, values, level):
    above = np.flatnonzero(values >= level)
    return float(times[above[0]]) if above.size else math.nan


def _effective(cfg):
    spectrum = trap.transverse_modes(trap_config(cfg))
    drive = drive_set(cfg, spectrum.eta_com)
    couplings = effective.effective_multi_mode(spectrum, drive)
    t_final = (cfg.t_final_ms or DEFAULT_T_FINAL_MS) * 1e-3
    step = cfg.record_interval_us * 1e-6
    times = np.arange(round(t_final / step) + 1) * step
    sz = effective.effective_sz_trace(couplings, cfg.initial_spins, times)
    ts = evolve.TimeSeries(times, sz, np.zeros((len(times), 0)), np.zeros((len(times), 0)))
    summary = {
        "predicted_period_ms": _safe_period(couplings) * 1e3,
        "single_spin_khz": [to_khz(v) for v in couplings.single_spin],
        "j3_khz": to_khz(couplings.j3),
    }
    if all(c in "↓dD" for c in cfg.initial_spins):
        summary["period_ms"] = evolve.first_oscillation_period(times, sz[:, 0]) * 1e3
    return ts, summary


def _qlm(cfg):
    g = math.inf if cfg.g is None else cfg.g
    qc = qlm.QLMConfig(cfg.n_stag, J=cfg.J, mu=cfg.mu, g=g, boundary=cfg.boundary)
    times = np.linspace(0.0, cfg.t_max, cfg.n_times)
    p = qlm.string_to_meson(qc, times)
    gv = qlm.gauss_violation(qc, times)
    revival = qlm.first_revival_time(times, p.values)
    peak = qlm.first_revival_time(times, p.values, threshold=0.0)
    upto = times <= peak if math.isfinite(peak) else np.ones_like(times, dtype=bool)
    summary = {
        "n_ions": qc.n_ions,
        "g": cfg.g,
        "P0": float(p.values[0]),
        "P_max": float(p.values.max()),
        "first_revival": revival,
        "first_peak": peak,
        "P_first_peak": float(np.interp(peak, times, p.values)) if math.isfinite(peak) else None,
        "gauss_violation_max": float(gv.values.max()),
        "gauss_violation_max_to_first_peak": float(gv.values[upto].max()),
        "string_state": qlm.spin_pattern(qlm.string_state(qc.n_stag, qc.boundary)),
        "meson_state": qlm.spin_pattern(qlm.meson_state(qc.n_stag, qc.boundary)),
    }
    header = ["t", "P_string_to_meson", "gauss_violation"]
    rows = np.column_stack([times, p.values, gv.values])
    return _table_csv(header, rows), summary


def _gate(cfg):
    dec = qlm.decompose_three_spin_gate(cfg.alpha)
    return None, {
        "alpha": cfg.alpha,
        "residual_three_body": dec.residual_three_body,
        "residual_two_body": dec.residual_two_body,
        "residual": dec.residual,
        "residual_as_printed": dec.residual_as_printed,
        "budget": qlm.fidelity_budget(),
        "budget_rounded": round(qlm.fidelity_budget(), 3),
    }


# serialization ---------------------------------------------------------------


def series_header(ts):
    n_ions = ts.sz.shape[1]
    cols = ["t_ms"] + [f"sz_{i + 1}" for i in range(n_ions)]
    cols += [f"n_{m}" for m in ts.mode_names]
    if ts.fidelity is not None:
        cols.append("fidelity")
    cols += [f"leak_{m}" for m in ts.mode_names]
    return cols


def series_csv(ts):
    """CSV text: t_ms, sz_i, n_<mode> (descending frequency), fidelity, leak_<mode>."""
    parts = [ts.times[:, None] * 1e3, ts.sz, ts.phonons]
    if ts.fidelity is not None:
        parts.append(ts.fidelity[:, None])
    parts.append(ts.leak)
    return _table_csv(series_header(ts), np.hstack(parts))


def _table_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_f(v) for v in row])
    return buf.getvalue()


def execute(cfg: RunConfig):
    """Run one concrete config; returns (csv_text or None, summary dict)."""
    if cfg.model in ("single_mode_1drive", "single_mode_2drive", "multi_mode_2drive"):
        ts, summary = _dynamics(cfg)
        text = series_csv(ts)
    elif cfg.model == "ghz_scan":
        ts, summary = _ghz(cfg)
        text = series_csv(ts)
    elif cfg.model == "effective":
        ts, summary = _effective(cfg)
        text = series_csv(ts)
    elif cfg.model == "qlm":
        text, summary = _qlm(cfg)
    else:
        text, summary = _gate(cfg)
    summary = {"name": cfg.label, "model": cfg.model, **summary}
    return text, summary


def _write(out_dir, label, text, summary):
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    if text is not None:
        path = out_dir / f"{label}.csv"
        path.write_text(text, encoding="utf-8")
        files.append(path)
    path = out_dir / f"{label}.json"
    path.write_text(dump_json(summary), encoding="utf-8")
    files.append(path)
    return files


def _execute_and_write(cfg, out_dir):
    text, summary = execute(cfg)
    _write(Path(out_dir), cfg.label, text, summary)
    return summary


def run_config(cfg: RunConfig, out_dir, jobs=1):
    """Run a config (expanding any sweep) and write outputs into ``out_dir``.

    Returns the summary: a single run's dict, or for a sweep a dict with
    ``rows`` ordered lexicographically by parameter tuple.
    """
    out_dir = Path(out_dir)
    expanded = cfg.expand()
    if not cfg.sweep:
        return _execute_and_write(cfg, out_dir)
    summaries = _map(_execute_and_write, [c for _, c in expanded], out_dir, jobs)
    rows = [{"params": dict(params), **s} for (params, _), s in zip(expanded, summaries)]
    merged = {"name": cfg.label, "sweep": sorted(cfg.sweep), "rows": rows}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{cfg.label}_summary.json").write_text(dump_json(merged), encoding="utf-8")
    return merged


def _map(fn, configs, out_dir, jobs):
    if jobs <= 1 or len(configs) <= 1:
        return [fn(c, out_dir) for c in configs]
    with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
        futures = [pool.submit(fn, c, out_dir) for c in configs]
        return [f.result() for f in futures]


def run_preset(name, out_dir, jobs=1):
    """Run a named preset; tables are aggregated into ``<name>.json``."""
    preset = get_preset(name)
    out_dir = Path(out_dir)
    if len(preset.runs) == 1 and preset.table is None:
        return run_config(preset.runs[0][2], out_dir, jobs)
    configs = [c for _, _, c in preset.runs]
    summaries = _map(_execute_and_write, configs, out_dir, jobs)
    if preset.table is None:
        merged = {"name": name, "runs": summaries}
    else:
        merged = {}
        for (pkey, skey, _), s in zip(preset.runs, summaries):
            merged.setdefault(pkey, {})[skey] = s[preset.table]
            if "n_non_com_mean" in s:
                merged[pkey].setdefault("non_com", {})[skey] = s["n_non_com_mean"]
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{name}.json").write_text(dump_json(merged), encoding="utf-8")
    return merged

