"""
Figure presets: the parameter sets behind each published curve family.

Curves for M <= 3 default to tensor quadrature (order 48), which is both
faster and smoother than Monte Carlo at desk scale; passing a sample
count switches to Monte Carlo with that budget.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from config.settings import settings
from src.capacity import ENERGY, PHASE, Estimator
from src.channel import IMPERFECT, ChannelParams, PeakConstraint
from src.exceptions import ConfigurationError
from src.lowpower import (
    LowPowerSummary,
    bit_energy_point,
    peak_limited_energy_summary,
    peak_limited_oofpsk_summary,
)
from src.numerics import McConfig, gauss_laguerre
from utils.helpers import db_to_linear, log_message, write_csv

CSV_COLUMNS = ["snr_db", "nu", "capacity_nats", "capacity_bits", "spectral_eff_bpshz",
               "eb_n0_db", "std_err", "method"]
PEAK_SWEEP_COLUMNS = ["eta", "detector", "eb_n0_min_db", "s0", "c_dot0", "c_ddot0", "divergent"]
SUMMARY_COLUMNS = ["curve", "eb_n0_min_db", "snr_db_at_min", "spectral_eff_at_min"]

DEFAULT_FIGURE_ORDER = 48
DEFAULT_SNR_GRID_DB = [float(x) for x in np.arange(-40.0, 20.0 + 0.5, 1.0)]
DEFAULT_ETA_GRID = [float(x) for x in np.logspace(-1.0, 3.0, 41)]

GAUSSIAN = ChannelParams(d_mag_sq=1.0, gamma_sq=0.0)
NU_SET = [1.0, 0.1, 0.01, 0.001, 0.0001]
K_SET = [0.0, 0.25, 0.5, 1.0, 2.0, float("inf")]


@dataclass(frozen=True)
class CurveSpec:
    label: str
    channel: ChannelParams
    m: int
    detector: str
    csi: str = IMPERFECT
    nu: Optional[float] = None
    eta: Optional[float] = None

    def regime(self) -> PeakConstraint:
        if self.eta is not None:
            return PeakConstraint.fixed_peak(self.eta)
        return PeakConstraint.fixed_par()


@dataclass(frozen=True)
class FigurePreset:
    name: str
    description: str
    curves: List[CurveSpec] = field(default_factory=list)
    peak_sweep: bool = False


def _k_label(k: float) -> str:
    return "Kinf" if np.isinf(k) else f"K{k:g}"


def _build_presets() -> Dict[str, FigurePreset]:
    rician_half = ChannelParams.from_rician_k(0.5)
    rician_one = ChannelParams.from_rician_k(1.0)
    return {
        "fig1": FigurePreset("fig1", "Unfaded channel, energy detection, M=2, fixed duty factor",
                             [CurveSpec(f"nu{nu:g}", GAUSSIAN, 2, ENERGY, nu=nu) for nu in NU_SET]),
        "fig2": FigurePreset("fig2", "Rician K=0.5, energy detection without CSI, M=2",
                             [CurveSpec(f"nu{nu:g}", rician_half, 2, ENERGY, nu=nu) for nu in NU_SET]),
        "fig3": FigurePreset("fig3", "Unfaded channel, energy detection, M=2, fixed peak",
                             [CurveSpec(f"eta{eta:g}", GAUSSIAN, 2, ENERGY, eta=eta) for eta in (1, 2, 5, 10, 100)]),
        "fig4": FigurePreset("fig4", "OOFPSK without CSI, M=2, nu=1, varying K",
                             [CurveSpec(_k_label(k), ChannelParams.from_rician_k(k), 2, PHASE, nu=1.0)
                              for k in K_SET]),
        "fig5": FigurePreset("fig5", "OOFPSK without CSI, M=3, nu=1, varying K",
                             [CurveSpec(_k_label(k), ChannelParams.from_rician_k(k), 3, PHASE, nu=1.0)
                              for k in (0.25, 0.5, 1.0, 2.0)]),
        "fig6": FigurePreset("fig6", "OOFPSK without CSI, K=1, M=2, varying duty factor",
                             [CurveSpec(f"nu{nu:g}", rician_one, 2, PHASE, nu=nu) for nu in (1.0, 0.5, 0.1, 0.01)]),
        "fig7": FigurePreset("fig7", "OOFPSK without CSI, M=2, peak level eta=1, varying K",
                             [CurveSpec(_k_label(k), ChannelParams.from_rician_k(k), 2, PHASE, eta=1.0)
                              for k in K_SET]),
        "fig8": FigurePreset("fig8", "Minimum bit energy vs normalized peak power, K=1", peak_sweep=True),
        "fig9": FigurePreset("fig9", "Wideband slope vs normalized peak power, K=1", peak_sweep=True),
    }


PRESETS = _build_presets()


def figure_estimator(m: int, samples: Optional[int] = None, seed: Optional[int] = None,
                     quadrature_order: Optional[int] = None) -> Estimator:
    """Quadrature for M <= 3 unless a sample budget is given"""
    if samples is not None or m > settings.MAX_QUAD_TONES:
        return McConfig(
            sample_count=samples if samples is not None else 200_000,
            seed=settings.SEED if seed is None else seed,
        )
    return gauss_laguerre(quadrature_order or DEFAULT_FIGURE_ORDER)


def curve_rows(curve: CurveSpec, snr_grid_db: Sequence[float], est: Estimator,
               workers: int = 1, quiet: bool = True) -> List[Dict[str, Any]]:
    """CSV rows for one curve, in grid order"""
    grid = [s for s in sorted(snr_grid_db) if curve.eta is None or db_to_linear(s) <= curve.eta]
    regime = curve.regime()

    def row(snr_db):
        p = bit_energy_point(curve.channel, db_to_linear(snr_db), regime, curve.detector, curve.csi,
                             curve.m, curve.nu, est)
        return {
            "snr_db": snr_db, "nu": p.nu, "capacity_nats": p.capacity_nats,
            "capacity_bits": p.capacity_nats / np.log(2.0), "spectral_eff_bpshz": p.spectral_efficiency,
            "eb_n0_db": p.eb_n0_db, "std_err": p.std_error, "method": p.method,
        }

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(tqdm(pool.map(row, grid), total=len(grid), desc=curve.label, disable=quiet))


def grid_minimum(rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    finite = [r for r in rows if np.isfinite(r["eb_n0_db"])]
    if not finite:
        return {"eb_n0_min_db": float("inf"), "snr_db_at_min": float("nan"), "spectral_eff_at_min": 0.0}
    best = min(finite, key=lambda r: r["eb_n0_db"])
    return {"eb_n0_min_db": best["eb_n0_db"], "snr_db_at_min": best["snr_db"],
            "spectral_eff_at_min": best["spectral_eff_bpshz"]}


def peak_sweep_rows(eta_grid: Sequence[float]) -> List[Dict[str, Any]]:
    """Closed-form minimum bit energy and wideband slope against eta, K=1, no CSI"""
    ch = ChannelParams.from_rician_k(1.0)
    rows = []
    for detector, summarize in ((ENERGY, peak_limited_energy_summary), (PHASE, peak_limited_oofpsk_summary)):
        for eta in eta_grid:
            s: LowPowerSummary = summarize(ch, float(eta), IMPERFECT)
            rows.append({"eta": float(eta), "detector": detector, "eb_n0_min_db": s.eb_n0_min_db,
                         "s0": s.s0, "c_dot0": s.c_dot0, "c_ddot0": s.c_ddot0, "divergent": s.divergent})
    return rows


def run_figure(preset: str, overrides: Optional[Dict[str, Any]] = None, out: Optional[str] = None,
               metadata: Optional[Dict[str, Any]] = None, quiet: bool = True) -> List[str]:
    """Write one CSV per curve of a preset (plus a minima summary) and return the paths"""
    if preset not in PRESETS:
        raise ConfigurationError(f"Unknown figure preset: {preset}")
    overrides = overrides or {}
    out = out or settings.OUTPUT_DIR
    figure = PRESETS[preset]
    base_meta = dict(metadata or {})
    base_meta.update({"preset": preset, "description": figure.description})
    paths = []

    if figure.peak_sweep:
        eta_grid = overrides.get("eta_grid") or DEFAULT_ETA_GRID
        path = os.path.join(out, f"{preset}.csv")
        write_csv(peak_sweep_rows(eta_grid), path, PEAK_SWEEP_COLUMNS, dict(base_meta, eta_grid=list(eta_grid)))
        return [path]

    snr_grid = overrides.get("snr_grid_db") or DEFAULT_SNR_GRID_DB
    workers = overrides.get("workers") or settings.THREADS
    minima = []
    for curve in figure.curves:
        est = figure_estimator(curve.m, overrides.get("samples"), overrides.get("seed"),
                               overrides.get("quadrature_order"))
        log_message(f"{preset}/{curve.label}: {len(snr_grid)} SNR points")
        rows = curve_rows(curve, snr_grid, est, workers, quiet)
        path = os.path.join(out, f"{preset}_{curve.label}.csv")
        meta = dict(base_meta, curve=curve.label, m=curve.m, nu=curve.nu, eta=curve.eta,
                    detector=curve.detector, csi=curve.csi, d_mag_sq=curve.channel.d_mag_sq,
                    gamma_sq=curve.channel.gamma_sq, estimator=_describe(est))
        write_csv(rows, path, CSV_COLUMNS, meta)
        paths.append(path)
        minima.append(dict(grid_minimum(rows), curve=curve.label))

    summary_path = os.path.join(out, f"{preset}_summary.csv")
    write_csv(minima, summary_path, SUMMARY_COLUMNS, base_meta)
    paths.append(summary_path)
    return paths


def _describe(est: Estimator) -> Dict[str, Any]:
    if isinstance(est, McConfig):
        return {"kind": "mc", "samples": est.sample_count, "seed": est.seed, "batch_size": est.batch_size}
    return {"kind": est.kind, "order": est.order}
