"""
Capacity of On-Off FSK with energy detection and of On-Off FSK with
phase modulation (OOFPSK), for receivers with and without fading CSI.

Finite-M capacities are estimated by Monte Carlo over the exact
conditional laws or, for M <= 3, by tensor Gaussian quadrature. All four
share the mixture term

    gap = (1 - nu) E0{log mix} + nu E1{log mix},

the penalty relative to the M -> infinity limit, so the energy-detection
capacity is nu E1{log f} - gap and the OOFPSK capacity is the closed-form
limit minus the same gap.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import special

from config.settings import settings
from src.channel import (
    IMPERFECT,
    PERFECT,
    ChannelParams,
    SignalingConfig,
    log_f_imperfect,
    log_f_perfect,
    log_mixture,
)
from src.exceptions import ConfigurationError, DomainError
from src.numerics import (
    GAUSS_LAGUERRE,
    METHOD_QUADRATURE,
    Estimate,
    McConfig,
    QuadratureRule,
    complex_gaussian_rule,
    gauss_laguerre,
    log_bessel_i0,
    mc_expectation,
    mc_mean,
    noncentral_chisq,
    standard_complex_normal,
)
from utils.helpers import log_message

ENERGY = "energy"
PHASE = "phase"
DETECTORS = (ENERGY, PHASE)
GAP = "gap"

Estimator = Union[McConfig, QuadratureRule, None]

# Caps on the secondary rules built from a Gauss-Laguerre order
_ON_TONE_ORDER_CAP = 32
_FADING_ORDER_CAP = 24
_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class CapacityResult:
    """Capacity in nats per symbol with the estimate behind it"""
    nats_per_symbol: float
    estimate: Estimate
    channel: ChannelParams
    m: Optional[int]
    nu: float
    snr: float
    detector: str
    csi: str

    @property
    def bits_per_symbol(self) -> float:
        return self.nats_per_symbol / np.log(2.0)

    @property
    def std_error(self) -> float:
        return self.estimate.std_error

    @property
    def method(self) -> str:
        return self.estimate.method

    @property
    def config_echo(self) -> Tuple:
        """(channel, (M, nu, snr), (detector, csi)); M is None for the M -> infinity limit"""
        return self.channel, (self.m, self.nu, self.snr), (self.detector, self.csi)


@dataclass(frozen=True)
class OnOffScalarInput:
    """Two-mass-point amplitude: on_value with probability on_prob, zero otherwise"""
    on_value: float
    on_prob: float

    def __post_init__(self):
        if self.on_value < 0:
            raise DomainError(f"On amplitude must be nonnegative, got {self.on_value}")
        if not 0 < self.on_prob <= 1:
            raise DomainError(f"On probability must lie in (0, 1], got {self.on_prob}")

    @classmethod
    def from_signaling(cls, cfg: SignalingConfig) -> "OnOffScalarInput":
        return cls(float(np.sqrt(cfg.alpha_sq())), cfg.nu)

    def power(self) -> float:
        return self.on_prob * self.on_value ** 2


def input_entropy(m: int, nu: float) -> float:
    """H2(nu) + nu log M in nats"""
    return float(special.entr(nu) + special.entr(1.0 - nu) + nu * np.log(m))


def _resolve_estimator(est: Estimator, m: int) -> Union[McConfig, QuadratureRule]:
    if est is None:
        return McConfig()
    if isinstance(est, McConfig):
        return est
    if isinstance(est, QuadratureRule):
        if est.kind != GAUSS_LAGUERRE:
            raise ConfigurationError(f"Capacity quadrature needs a Gauss-Laguerre rule, got {est.kind}")
        if m > settings.MAX_QUAD_TONES:
            raise ConfigurationError(f"Tensor quadrature is limited to M <= {settings.MAX_QUAD_TONES}, got M={m}")
        return est
    raise ConfigurationError(f"Unknown estimator: {est!r}")


def _check_mode(detector: str, csi: str):
    if detector not in DETECTORS:
        raise ConfigurationError(f"Unknown detector: {detector}")
    if csi not in (PERFECT, IMPERFECT):
        raise ConfigurationError(f"Unknown CSI mode: {csi}")


def tone_log_likelihood(ch: ChannelParams, cfg: SignalingConfig, csi: str,
                        h_sq: Union[float, np.ndarray, None] = None) -> Callable[[np.ndarray], np.ndarray]:
    """r -> log f(r) for the given receiver; h_sq is the known fading power under perfect CSI"""
    if csi == PERFECT:
        h_mag = np.sqrt(h_sq)
        return lambda r: log_f_perfect(r, h_mag, cfg)
    return lambda r: log_f_imperfect(r, ch, cfg)


def phase_limit_term(ch: ChannelParams, cfg: SignalingConfig, csi: str) -> float:
    """OOFPSK capacity at M -> infinity: the part that does not depend on M"""
    value = ch.mean_power() * cfg.snr
    if csi == IMPERFECT:
        value -= cfg.nu * np.log1p(ch.gamma_sq * cfg.alpha_sq())
    return value


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _mc_draw(ch: ChannelParams, cfg: SignalingConfig, csi: str, quantity: str):
    """
    Per-sample values of the capacity integrand.

    Every call draws, in order, an (n, M) Exp(1) block, the on-tone
    complex normal and the fading complex normal, so a fixed seed gives
    common random numbers across SNR values and modes.
    """
    a = cfg.alpha_sq()
    sqrt_s = np.sqrt(ch.gamma_sq * a + 1.0)

    def draw(rng, n):
        r0 = rng.standard_exponential((n, cfg.m))
        w = standard_complex_normal(rng, n)
        g = standard_complex_normal(rng, n)

        if csi == PERFECT:
            h_sq = np.abs(np.sqrt(ch.d_mag_sq) + np.sqrt(ch.gamma_sq) * g) ** 2
            on = np.abs(np.sqrt(a * h_sq) + w) ** 2
            h_mag = np.sqrt(h_sq)
            lf0 = log_f_perfect(r0, h_mag[:, None], cfg)
            lf_on = log_f_perfect(on, h_mag, cfg)
        else:
            on = np.abs(np.sqrt(a * ch.d_mag_sq) + sqrt_s * w) ** 2
            lf0 = log_f_imperfect(r0, ch, cfg)
            lf_on = log_f_imperfect(on, ch, cfg)

        lf1 = lf0.copy()
        lf1[:, 0] = lf_on
        gap = (1.0 - cfg.nu) * log_mixture(lf0, cfg.nu) + cfg.nu * log_mixture(lf1, cfg.nu)
        if quantity == ENERGY:
            return cfg.nu * lf_on - gap
        return gap

    return draw


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def _tensor_indices(order: int, dims: int) -> np.ndarray:
    """Node indices of a dims-fold tensor rule, one row per grid point"""
    if dims == 0:
        return np.zeros((1, 0), dtype=int)
    grids = np.meshgrid(*([np.arange(order)] * dims), indexing="ij")
    return np.stack([grid.ravel() for grid in grids], axis=-1)


def _tensor_weights(weights: np.ndarray, idx: np.ndarray) -> np.ndarray:
    if idx.shape[1] == 0:
        return np.ones(1)
    return np.prod(weights[idx], axis=-1)


def _on_tone_nodes(lam: float, scale: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for R = |sqrt(lam) + sqrt(scale) w|^2, w ~ CN(0, 1)"""
    if lam == 0:
        rule = gauss_laguerre(order)
        return scale * rule.nodes, rule.weights
    z, w = complex_gaussian_rule(min(order, _ON_TONE_ORDER_CAP))
    return np.abs(np.sqrt(lam) + np.sqrt(scale) * z) ** 2, w


def fading_power_nodes(ch: ChannelParams, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes |h|^2 and weights for expectations over the Rician fading power"""
    if ch.gamma_sq == 0:
        return np.array([ch.d_mag_sq]), np.ones(1)
    if ch.d_mag_sq == 0:
        rule = gauss_laguerre(order)
        return ch.gamma_sq * rule.nodes, rule.weights
    z, w = complex_gaussian_rule(min(order, _FADING_ORDER_CAP))
    return np.abs(np.sqrt(ch.d_mag_sq) + np.sqrt(ch.gamma_sq) * z) ** 2, w


def _quadrature_orders(order: int, m: int, csi: str) -> Tuple[int, int, int]:
    """(off-tone, on-tone, fading) orders; the three-tone perfect-CSI grid is thinned"""
    off, on, fading = order, min(order, _ON_TONE_ORDER_CAP), min(order, _FADING_ORDER_CAP)
    if m == 3 and csi == PERFECT:
        off, on, fading = min(off, 32), min(on, 16), min(fading, 12)
    return off, on, fading


def _conditional_terms(log_f: Callable, off_rule: QuadratureRule, on_r: np.ndarray, on_w: np.ndarray,
                       m: int, nu: float) -> Tuple[float, float, float]:
    """E0{log mix}, E1{log mix} and E1{log f(on tone)} on tensor grids"""
    lf_nodes = np.asarray(log_f(off_rule.nodes))
    lf_on = np.asarray(log_f(on_r))

    null_idx = _tensor_indices(off_rule.order, m)
    null_w = _tensor_weights(off_rule.weights, null_idx)
    e0 = float(np.dot(null_w, log_mixture(lf_nodes[null_idx], nu)))

    off_idx = _tensor_indices(off_rule.order, m - 1)
    off_w = _tensor_weights(off_rule.weights, off_idx)
    lf_off = lf_nodes[off_idx]
    chunk = max(1, _CHUNK_ELEMENTS // (len(off_w) * m))
    e1 = 0.0
    for start in range(0, len(on_r), chunk):
        stop = min(start + chunk, len(on_r))
        block = np.concatenate([
            np.broadcast_to(lf_on[start:stop, None, None], (stop - start, len(off_w), 1)),
            np.broadcast_to(lf_off[None, :, :], (stop - start, len(off_w), m - 1)),
        ], axis=-1)
        e1 += float(on_w[start:stop] @ (log_mixture(block, nu) @ off_w))

    return e0, e1, float(np.dot(on_w, lf_on))


def _quadrature_terms(ch: ChannelParams, cfg: SignalingConfig, csi: str,
                      rule: QuadratureRule) -> Tuple[float, float]:
    """(gap, nu E1{log f}) averaged over the fading when the receiver knows it"""
    off_order, on_order, fading_order = _quadrature_orders(rule.order, cfg.m, csi)
    off_rule = rule if off_order == rule.order else gauss_laguerre(off_order)
    a = cfg.alpha_sq()
    nu = cfg.nu

    if csi == IMPERFECT:
        scale = ch.gamma_sq * a + 1.0
        on_r, on_w = _on_tone_nodes(a * ch.d_mag_sq, scale, on_order)
        e0, e1, e1f = _conditional_terms(tone_log_likelihood(ch, cfg, csi), off_rule, on_r, on_w, cfg.m, nu)
        return (1.0 - nu) * e0 + nu * e1, nu * e1f

    gap, on_term = 0.0, 0.0
    h_nodes, h_weights = fading_power_nodes(ch, fading_order)
    for h_sq, h_w in zip(h_nodes, h_weights):
        on_r, on_w = _on_tone_nodes(a * h_sq, 1.0, on_order)
        e0, e1, e1f = _conditional_terms(tone_log_likelihood(ch, cfg, csi, h_sq), off_rule, on_r, on_w, cfg.m, nu)
        gap += h_w * ((1.0 - nu) * e0 + nu * e1)
        on_term += h_w * nu * e1f
    return gap, on_term


# ---------------------------------------------------------------------------
# Finite-M capacities
# ---------------------------------------------------------------------------

def mixture_entropy_gap(ch: ChannelParams, cfg: SignalingConfig, csi: str = IMPERFECT,
                        est: Estimator = None) -> Estimate:
    """
    E0{(S_M/M) log(S_M/M)}: the finite-M penalty shared by both detectors.
    Evaluated in the change-of-measure form, which has finite variance.
    """
    _check_mode(ENERGY, csi)
    est = _resolve_estimator(est, cfg.m)
    if cfg.snr == 0:
        return Estimate.exact(0.0)
    if isinstance(est, QuadratureRule):
        gap, _ = _quadrature_terms(ch, cfg, csi, est)
        return Estimate.exact(gap, METHOD_QUADRATURE)
    return mc_mean(_mc_draw(ch, cfg, csi, GAP), est)


def compute_capacity(ch: ChannelParams, cfg: SignalingConfig, detector: str = ENERGY,
                     csi: str = IMPERFECT, est: Estimator = None) -> CapacityResult:
    """Capacity of the on-off input for the given detector and receiver CSI"""
    _check_mode(detector, csi)
    est = _resolve_estimator(est, cfg.m)

    if cfg.snr == 0:
        estimate = Estimate.exact(0.0)
    elif isinstance(est, QuadratureRule):
        gap, on_term = _quadrature_terms(ch, cfg, csi, est)
        value = on_term - gap if detector == ENERGY else phase_limit_term(ch, cfg, csi) - gap
        estimate = Estimate.exact(value, METHOD_QUADRATURE)
    elif detector == ENERGY:
        estimate = mc_mean(_mc_draw(ch, cfg, csi, ENERGY), est)
    else:
        gap = mc_mean(_mc_draw(ch, cfg, csi, GAP), est)
        estimate = Estimate(phase_limit_term(ch, cfg, csi) - gap.value, gap.std_error, gap.method)

    log_message(f"C[{detector}/{csi}] M={cfg.m} nu={cfg.nu:g} snr={cfg.snr:g}: "
                f"{estimate.value:.6g} +/- {estimate.std_error:.2g} nats ({estimate.method})", "DEBUG")
    return CapacityResult(estimate.value, estimate, ch, cfg.m, cfg.nu, cfg.snr, detector, csi)


def capacity_energy_imperfect(ch: ChannelParams, cfg: SignalingConfig, est: Estimator = None) -> CapacityResult:
    return compute_capacity(ch, cfg, ENERGY, IMPERFECT, est)


def capacity_energy_perfect(ch: ChannelParams, cfg: SignalingConfig, est: Estimator = None) -> CapacityResult:
    return compute_capacity(ch, cfg, ENERGY, PERFECT, est)


def capacity_oofpsk_imperfect(ch: ChannelParams, cfg: SignalingConfig, est: Estimator = None) -> CapacityResult:
    return compute_capacity(ch, cfg, PHASE, IMPERFECT, est)


def capacity_oofpsk_perfect(ch: ChannelParams, cfg: SignalingConfig, est: Estimator = None) -> CapacityResult:
    return compute_capacity(ch, cfg, PHASE, PERFECT, est)


# ---------------------------------------------------------------------------
# M -> infinity
# ---------------------------------------------------------------------------

def _limit_result(ch, nu, snr, detector, csi, estimate: Estimate) -> CapacityResult:
    return CapacityResult(estimate.value, estimate, ch, None, nu, snr, detector, csi)


def _check_limit_args(nu: float, snr: float):
    if not 0 < nu <= 1:
        raise DomainError(f"Duty factor must lie in (0, 1], got {nu}")
    if not np.isfinite(snr) or snr < 0:
        raise DomainError(f"SNR must be finite and nonnegative, got {snr}")


def _inner_order(est: Estimator) -> int:
    order = est.order if isinstance(est, QuadratureRule) else settings.QUAD_ORDER
    return min(order, _ON_TONE_ORDER_CAP)


def c_inf_energy_imperfect(ch: ChannelParams, nu: float, snr: float, est: Estimator = None) -> CapacityResult:
    """Energy detection without CSI as M -> infinity; the Bessel term is averaged over the on-tone law"""
    _check_limit_args(nu, snr)
    a = snr / nu
    scale = ch.gamma_sq * a + 1.0
    closed = ch.mean_power() * snr - nu * np.log1p(ch.gamma_sq * a) - 2.0 * snr * ch.d_mag_sq / scale

    if snr == 0 or ch.d_mag_sq == 0:
        return _limit_result(ch, nu, snr, ENERGY, IMPERFECT, Estimate.exact(closed))

    lam = a * ch.d_mag_sq

    def integrand(r):
        return log_bessel_i0(2.0 * np.sqrt(lam * r) / scale)

    if isinstance(est, McConfig):
        inner = mc_expectation(noncentral_chisq(lam, scale), integrand, est)
        estimate = Estimate(closed + nu * inner.value, nu * inner.std_error, inner.method)
    else:
        z, w = complex_gaussian_rule(_inner_order(est))
        r = np.abs(np.sqrt(lam) + np.sqrt(scale) * z) ** 2
        estimate = Estimate.exact(closed + nu * float(np.dot(w, integrand(r))), METHOD_QUADRATURE)
    return _limit_result(ch, nu, snr, ENERGY, IMPERFECT, estimate)


def c_inf_energy_perfect(ch: ChannelParams, nu: float, snr: float, est: Estimator = None) -> CapacityResult:
    """Energy detection with known |h| as M -> infinity: nu E_h E_R{log f}"""
    _check_limit_args(nu, snr)
    if snr == 0:
        return _limit_result(ch, nu, snr, ENERGY, PERFECT, Estimate.exact(0.0))
    a = snr / nu

    def integrand(h_sq, w):
        gain = a * h_sq
        r = np.abs(np.sqrt(gain) + w) ** 2
        return -gain + log_bessel_i0(2.0 * np.sqrt(gain * r))

    if isinstance(est, McConfig):
        def draw(rng, n):
            w = standard_complex_normal(rng, n)
            g = standard_complex_normal(rng, n)
            h_sq = np.abs(np.sqrt(ch.d_mag_sq) + np.sqrt(ch.gamma_sq) * g) ** 2
            return nu * integrand(h_sq, w)
        estimate = mc_mean(draw, est)
    else:
        order = _inner_order(est)
        z, w = complex_gaussian_rule(order)
        h_nodes, h_weights = fading_power_nodes(ch, min(order, _FADING_ORDER_CAP))
        inner = np.array([np.dot(w, integrand(h_sq, z)) for h_sq in h_nodes])
        estimate = Estimate.exact(nu * float(np.dot(h_weights, inner)), METHOD_QUADRATURE)
    return _limit_result(ch, nu, snr, ENERGY, PERFECT, estimate)


def c_inf_oofpsk_imperfect(ch: ChannelParams, nu: float, snr: float) -> CapacityResult:
    _check_limit_args(nu, snr)
    a = snr / nu
    value = ch.mean_power() * snr - nu * np.log1p(ch.gamma_sq * a)
    return _limit_result(ch, nu, snr, PHASE, IMPERFECT, Estimate.exact(value))


def c_inf_oofpsk_perfect(ch: ChannelParams, snr: float) -> CapacityResult:
    _check_limit_args(1.0, snr)
    return _limit_result(ch, 1.0, snr, PHASE, PERFECT, Estimate.exact(ch.mean_power() * snr))


def compute_capacity_limit(ch: ChannelParams, nu: float, snr: float, detector: str = ENERGY,
                           csi: str = IMPERFECT, est: Estimator = None) -> CapacityResult:
    """M -> infinity capacity for the given detector and receiver CSI"""
    _check_mode(detector, csi)
    if detector == ENERGY and csi == IMPERFECT:
        return c_inf_energy_imperfect(ch, nu, snr, est)
    elif detector == ENERGY and csi == PERFECT:
        return c_inf_energy_perfect(ch, nu, snr, est)
    elif csi == IMPERFECT:
        return c_inf_oofpsk_imperfect(ch, nu, snr)
    else:
        return c_inf_oofpsk_perfect(ch, snr)
