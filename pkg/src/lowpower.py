"""
Low-power analytics: first and second derivatives of capacity at zero SNR,
bit energy at zero spectral efficiency, minimum bit energy, wideband slope
and bit-energy curves.

Bit energies are in the received normalization: Eb/N0 = E{|h|^2} SNR / C_bits.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from config.settings import settings
from src.capacity import (
    ENERGY,
    PHASE,
    Estimator,
    c_inf_energy_imperfect,
    c_inf_energy_perfect,
    compute_capacity,
)
from src.channel import (
    FIXED_PAR,
    FIXED_PEAK,
    IMPERFECT,
    PERFECT,
    ChannelParams,
    PeakConstraint,
    SignalingConfig,
)
from src.exceptions import ConfigurationError, DomainError, MinimizationError
from src.numerics import log_bessel_i0
from utils.helpers import linear_to_db, log_message

LN2 = float(np.log(2.0))
_PHASE_POINTS = 4096


@dataclass(frozen=True)
class LowPowerSummary:
    c_dot0: float
    c_ddot0: float
    eb_n0_at_zero_se_db: float
    eb_n0_min_db: float
    snr_at_min: float
    s0: float
    regime: PeakConstraint
    detector: str = ENERGY
    csi: str = IMPERFECT
    m: int = 1
    divergent: bool = False
    min_at_nonzero_se: bool = False
    boundary_minimum: bool = False


@dataclass(frozen=True)
class BitEnergyPoint:
    spectral_efficiency: float
    eb_n0_db: float
    snr: float
    nu: float
    capacity_nats: float
    std_error: float
    method: str
    flagged: bool = False


@dataclass
class BitEnergyCurve:
    points: List[BitEnergyPoint] = field(default_factory=list)

    def minimum(self) -> BitEnergyPoint:
        finite = [p for p in self.points if not p.flagged]
        if not finite:
            raise MinimizationError("Bit-energy curve has no evaluable point")
        return min(finite, key=lambda p: p.eb_n0_db)


def eb_n0_db(snr: float, capacity_nats: float, mean_power: float = 1.0) -> float:
    """Received bit energy in dB; +inf when nothing is conveyed"""
    if capacity_nats <= 0:
        return float("inf")
    return linear_to_db(mean_power * snr * LN2 / capacity_nats)


def spectral_efficiency(capacity_nats: float, m: int) -> float:
    """Bits/s/Hz for M tones in bandwidth M/T"""
    return capacity_nats / LN2 / m


def wideband_slope(c_dot0: float, c_ddot0: float, m: int) -> float:
    """(1/M) 2 C'(0)^2 / (-C''(0)); zero when C''(0) is -inf or C'(0) vanishes"""
    if c_dot0 == 0 or np.isneginf(c_ddot0):
        return 0.0
    if c_ddot0 == 0:
        return float("inf")
    return 2.0 * c_dot0 ** 2 / (-c_ddot0) / m


def _eb_at_zero_db(ch: ChannelParams, c_dot0: float) -> float:
    if c_dot0 <= 0:
        return float("inf")
    return linear_to_db(ch.mean_power() * LN2 / c_dot0)


# ---------------------------------------------------------------------------
# Minimum search
# ---------------------------------------------------------------------------

def minimum_bit_energy(eb_db: Callable[[float], float], snr_min: Optional[float] = None,
                       snr_max: Optional[float] = None,
                       points: Optional[int] = None) -> Tuple[float, float, bool]:
    """
    Minimize a bit-energy curve over SNR: a log grid, then golden-section
    refinement on log10(SNR) around the best grid point.

    Returns (eb_min_db, snr_at_min, at_boundary).
    """
    snr_min = settings.SNR_SEARCH_MIN if snr_min is None else snr_min
    snr_max = settings.SNR_SEARCH_MAX if snr_max is None else snr_max
    points = settings.SNR_SEARCH_POINTS if points is None else points

    log_grid = np.linspace(np.log10(snr_min), np.log10(snr_max), points)
    values = []
    for x in log_grid:
        try:
            values.append(eb_db(10.0 ** x))
        except (ArithmeticError, ValueError) as e:
            log_message(f"Bit energy not evaluable at SNR {10.0 ** x:.3g}: {e}", "WARNING")
            values.append(float("inf"))
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if not np.any(finite):
        raise MinimizationError("Bit-energy curve is not evaluable anywhere on the search grid")

    k = int(np.argmin(np.where(finite, values, np.inf)))
    if k == 0 or k == points - 1:
        log_message(f"Minimum bit energy at the search boundary (SNR {10.0 ** log_grid[k]:.3g})", "WARNING")
        return float(values[k]), float(10.0 ** log_grid[k]), True

    def objective(x):
        value = eb_db(10.0 ** x)
        return value if np.isfinite(value) else 1e300

    try:
        res = optimize.minimize_scalar(objective, bracket=(log_grid[k - 1], log_grid[k], log_grid[k + 1]),
                                       method="golden", tol=1e-3)
        if res.fun < values[k]:
            return float(res.fun), float(10.0 ** res.x), False
    except ValueError as e:
        log_message(f"Golden-section refinement failed, keeping grid minimum: {e}", "WARNING")
    return float(values[k]), float(10.0 ** log_grid[k]), False


def _capacity_eb_db(ch: ChannelParams, m: int, nu: float, detector: str, csi: str,
                    est: Estimator) -> Callable[[float], float]:
    def eb_db(snr):
        result = compute_capacity(ch, SignalingConfig(m, nu, snr), detector, csi, est)
        return eb_n0_db(snr, result.nats_per_symbol, ch.mean_power())
    return eb_db


# ---------------------------------------------------------------------------
# Fading moments
# ---------------------------------------------------------------------------

def expected_i0_of_fading_power(ch: ChannelParams, eta: float) -> Tuple[float, bool]:
    """
    log E{I0(2 eta |h|^2)} and a divergence flag.

    I0(2x) is the phase average of e^{2x cos(phi)}, and the moment
    generating function of the Rician power is closed form, so the
    expectation is a periodic integral over phi evaluated with the
    trapezoidal rule. It is infinite when 2 eta gamma^2 >= 1.
    """
    if 2.0 * eta * ch.gamma_sq >= 1.0:
        return float("inf"), True
    phi = 2.0 * np.pi * np.arange(_PHASE_POINTS) / _PHASE_POINTS
    t = 2.0 * eta * np.cos(phi)
    denom = 1.0 - t * ch.gamma_sq
    log_mgf = -np.log(denom) + t * ch.d_mag_sq / denom
    return float(special.logsumexp(log_mgf) - np.log(_PHASE_POINTS)), False


def _imperfect_peak_c_ddot0(ch: ChannelParams, eta: float, m: int) -> Tuple[float, bool]:
    """C''(0) under a fixed peak without CSI; -inf once eta gamma^2 >= 1"""
    x = eta * ch.gamma_sq
    if x >= 1.0:
        return float("-inf"), True
    q = 1.0 - x * x
    log_second_moment = (-np.log(q) + 2.0 * eta * x * ch.d_mag_sq / q
                         + log_bessel_i0(2.0 * eta * ch.d_mag_sq / q))
    return float(-np.expm1(log_second_moment) / (eta ** 2 * m)), False


def _perfect_peak_c_ddot0(ch: ChannelParams, eta: float, m: int) -> Tuple[float, bool]:
    log_moment, divergent = expected_i0_of_fading_power(ch, eta)
    if divergent:
        return float("-inf"), True
    with np.errstate(over="ignore"):
        return float(-np.expm1(log_moment) / (eta ** 2 * m)), False


def _check_eta(eta: float):
    if not np.isfinite(eta) or eta <= 0:
        raise DomainError(f"Peak level eta must be positive, got {eta}")


def _zero_se_summary(ch, c_dot0, c_ddot0, regime, detector, csi, m, divergent) -> LowPowerSummary:
    """Summary for curves whose minimum bit energy sits at zero spectral efficiency"""
    eb0 = _eb_at_zero_db(ch, c_dot0)
    return LowPowerSummary(
        c_dot0=float(c_dot0), c_ddot0=float(c_ddot0), eb_n0_at_zero_se_db=eb0,
        eb_n0_min_db=eb0, snr_at_min=0.0, s0=wideband_slope(c_dot0, c_ddot0, m),
        regime=regime, detector=detector, csi=csi, m=m, divergent=divergent,
    )


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def par_limited_summary(ch: ChannelParams, cfg: SignalingConfig, est: Estimator = None) -> LowPowerSummary:
    """Energy detection over the unfaded channel at a fixed duty factor"""
    if ch.gamma_sq != 0:
        raise DomainError("The fixed-PAR energy-detection summary covers the unfaded channel (gamma_sq = 0)")
    c_ddot0 = ch.d_mag_sq ** 2 * (1.0 / cfg.nu - 1.0 / cfg.m)
    eb_min, snr_min, boundary = minimum_bit_energy(_capacity_eb_db(ch, cfg.m, cfg.nu, ENERGY, IMPERFECT, est))
    log_message(f"Fixed-PAR energy detection M={cfg.m} nu={cfg.nu:g}: min Eb/N0 {eb_min:.3f} dB at SNR {snr_min:.3g}")
    return LowPowerSummary(
        c_dot0=0.0, c_ddot0=c_ddot0, eb_n0_at_zero_se_db=float("inf"),
        eb_n0_min_db=eb_min, snr_at_min=snr_min, s0=wideband_slope(0.0, c_ddot0, cfg.m),
        regime=PeakConstraint.fixed_par(), detector=ENERGY, csi=IMPERFECT, m=cfg.m,
        min_at_nonzero_se=True, boundary_minimum=boundary,
    )


def peak_limited_energy_summary(ch: ChannelParams, eta: float, mode: str = IMPERFECT,
                                m: int = 1, est: Estimator = None) -> LowPowerSummary:
    """
    Energy detection under a fixed peak (nu = SNR/eta). C'(0) is the M -> infinity
    capacity at unit duty factor and SNR eta, divided by eta.
    """
    _check_eta(eta)
    if mode == IMPERFECT:
        c_dot0 = c_inf_energy_imperfect(ch, 1.0, eta, est).nats_per_symbol / eta
        c_ddot0, divergent = _imperfect_peak_c_ddot0(ch, eta, m)
    elif mode == PERFECT:
        c_dot0 = c_inf_energy_perfect(ch, 1.0, eta, est).nats_per_symbol / eta
        c_ddot0, divergent = _perfect_peak_c_ddot0(ch, eta, m)
    else:
        raise ConfigurationError(f"Unknown CSI mode: {mode}")
    return _zero_se_summary(ch, c_dot0, c_ddot0, PeakConstraint.fixed_peak(eta), ENERGY, mode, m, divergent)


def par_limited_oofpsk_summary(ch: ChannelParams, m: int, nu: float, mode: str = IMPERFECT,
                               est: Estimator = None, search: bool = True) -> LowPowerSummary:
    """OOFPSK at a fixed duty factor; a negative slope triggers a numerical minimum search"""
    if not 0 < nu <= 1:
        raise DomainError(f"Duty factor must lie in (0, 1], got {nu}")
    regime = PeakConstraint.fixed_par()
    if mode == PERFECT:
        return _zero_se_summary(ch, ch.mean_power(), -ch.fourth_moment() / m, regime, PHASE, PERFECT, m, False)
    if mode != IMPERFECT:
        raise ConfigurationError(f"Unknown CSI mode: {mode}")

    c_dot0 = ch.d_mag_sq
    c_ddot0 = -ch.mean_power() ** 2 / m + ch.gamma_sq ** 2 / nu
    summary = _zero_se_summary(ch, c_dot0, c_ddot0, regime, PHASE, IMPERFECT, m, False)
    if c_dot0 > 0 and summary.s0 >= 0:
        return summary

    eb_min, snr_min, boundary = summary.eb_n0_min_db, 0.0, False
    if search:
        eb_min, snr_min, boundary = minimum_bit_energy(_capacity_eb_db(ch, m, nu, PHASE, IMPERFECT, est))
        log_message(f"OOFPSK K={ch.rician_k():g} M={m} nu={nu:g}: minimum {eb_min:.3f} dB at SNR {snr_min:.3g}")
    return LowPowerSummary(
        c_dot0=summary.c_dot0, c_ddot0=summary.c_ddot0, eb_n0_at_zero_se_db=summary.eb_n0_at_zero_se_db,
        eb_n0_min_db=eb_min, snr_at_min=snr_min, s0=summary.s0, regime=regime,
        detector=PHASE, csi=IMPERFECT, m=m, min_at_nonzero_se=True, boundary_minimum=boundary,
    )


def peak_limited_oofpsk_summary(ch: ChannelParams, eta: float, mode: str = IMPERFECT,
                                m: int = 1) -> LowPowerSummary:
    _check_eta(eta)
    if mode == PERFECT:
        c_dot0 = ch.mean_power()
        c_ddot0, divergent = _perfect_peak_c_ddot0(ch, eta, m)
    elif mode == IMPERFECT:
        c_dot0 = ch.mean_power() - np.log1p(ch.gamma_sq * eta) / eta
        c_ddot0, divergent = _imperfect_peak_c_ddot0(ch, eta, m)
    else:
        raise ConfigurationError(f"Unknown CSI mode: {mode}")
    return _zero_se_summary(ch, c_dot0, c_ddot0, PeakConstraint.fixed_peak(eta), PHASE, mode, m, divergent)


def low_power_summary(ch: ChannelParams, regime: PeakConstraint, detector: str, csi: str,
                      m: int, nu: Optional[float] = None, est: Estimator = None) -> LowPowerSummary:
    """Dispatch to the summary matching regime and detector"""
    if regime.kind == FIXED_PEAK and detector == ENERGY:
        return peak_limited_energy_summary(ch, regime.eta, csi, m, est)
    elif regime.kind == FIXED_PEAK and detector == PHASE:
        return peak_limited_oofpsk_summary(ch, regime.eta, csi, m)
    elif regime.kind == FIXED_PAR and detector == PHASE:
        return par_limited_oofpsk_summary(ch, m, nu, csi, est)
    elif regime.kind == FIXED_PAR and detector == ENERGY:
        if csi == PERFECT and not ch.is_unfaded():
            raise ConfigurationError("Fixed-PAR energy-detection summaries cover the unfaded channel only")
        return par_limited_summary(ch, SignalingConfig(m, nu, 0.0), est)
    else:
        raise ConfigurationError(f"Unknown regime/detector: {regime.kind}/{detector}")


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

def bit_energy_point(ch: ChannelParams, snr: float, regime: PeakConstraint, detector: str, csi: str,
                     m: int, nu: Optional[float] = None, est: Estimator = None) -> BitEnergyPoint:
    cfg = regime.signaling(m, snr, nu)
    result = compute_capacity(ch, cfg, detector, csi, est)
    c = result.nats_per_symbol
    return BitEnergyPoint(
        spectral_efficiency=spectral_efficiency(c, m),
        eb_n0_db=eb_n0_db(snr, c, ch.mean_power()),
        snr=snr, nu=cfg.nu, capacity_nats=c, std_error=result.std_error,
        method=result.method, flagged=c <= 0,
    )


def bit_energy_curve(ch: ChannelParams, sweep: Sequence[float], regime: PeakConstraint, detector: str = ENERGY,
                     csi: str = IMPERFECT, m: int = 2, nu: Optional[float] = None, est: Estimator = None,
                     workers: Optional[int] = None) -> BitEnergyCurve:
    """Capacity, spectral efficiency and bit energy at each SNR of a sorted positive grid"""
    grid = [float(s) for s in sweep]
    if not grid or any(s <= 0 for s in grid) or grid != sorted(grid):
        raise ConfigurationError("SNR grid must be positive and sorted")
    if regime.kind == FIXED_PEAK and grid[-1] > regime.eta:
        raise ConfigurationError(f"SNR grid exceeds the peak level eta={regime.eta}")

    def point(snr):
        return bit_energy_point(ch, snr, regime, detector, csi, m, nu, est)

    workers = settings.THREADS if workers is None else workers
    if workers <= 1:
        points = [point(snr) for snr in grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(point, grid))

    flagged = sum(p.flagged for p in points)
    if flagged:
        log_message(f"{flagged} grid points conveyed no information and were not divided", "WARNING")
    return BitEnergyCurve(points)
