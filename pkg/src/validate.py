"""
Independent checks of the capacity engine: a correlator-level link
simulator estimating mutual information from raw channel draws, the
stationarity condition of the equiprobable input and convergence of
the finite-M mixture penalty.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config.settings import settings
from src.capacity import (
    ENERGY,
    PHASE,
    OnOffScalarInput,
    c_inf_oofpsk_imperfect,
    compute_capacity,
    mixture_entropy_gap,
    phase_limit_term,
)
from src.channel import (
    IMPERFECT,
    PERFECT,
    ChannelParams,
    SignalingConfig,
    log_f_imperfect,
    log_f_perfect,
    log_mixture,
)
from src.exceptions import ConfigurationError, DomainError, EstimationError
from src.numerics import METHOD_MC, Estimate, McConfig, batch_rng, mc_moments, mc_mean, standard_complex_normal, z_score
from utils.helpers import log_message

MODES: Dict[str, Tuple[str, str]] = {
    "energy-perfect": (ENERGY, PERFECT),
    "energy-imperfect": (ENERGY, IMPERFECT),
    "oofpsk-perfect": (PHASE, PERFECT),
    "oofpsk-imperfect": (PHASE, IMPERFECT),
}

INJECTED_BIAS = 0.05
_CAPACITY_SEED_OFFSET = 1_000_003


def _split_mode(mode: str) -> Tuple[str, str]:
    if mode not in MODES:
        raise ConfigurationError(f"Unknown validation mode: {mode}")
    return MODES[mode]


@dataclass
class LinkSample:
    """A batch of correlator-level channel uses; row k is one symbol"""
    x: np.ndarray
    theta: np.ndarray
    h: np.ndarray
    y: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class ValidationReport:
    mi_estimate: Estimate
    analytic_value: float
    z_score: float
    passed: bool
    mode: str = ""
    analytic_std_error: float = 0.0


class LinkSimulator:
    """Draws channel uses from the capacity-achieving on-off input"""

    def __init__(self, ch: ChannelParams, cfg: SignalingConfig, phase_modulated: bool = False):
        self.ch = ch
        self.cfg = cfg
        self.phase_modulated = phase_modulated
        self.source = OnOffScalarInput.from_signaling(cfg)

    def draw(self, rng: np.random.Generator, n: int) -> LinkSample:
        m = self.cfg.m
        on = rng.random(n) < self.source.on_prob
        tone = rng.integers(1, m + 1, size=n)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        g = standard_complex_normal(rng, n)
        noise = standard_complex_normal(rng, (n, m))

        x = np.where(on, tone, 0)
        if not self.phase_modulated:
            theta = np.zeros(n)
        h = np.sqrt(self.ch.d_mag_sq) + np.sqrt(self.ch.gamma_sq) * g

        y = noise.copy()
        rows = np.flatnonzero(on)
        y[rows, x[rows] - 1] += self.source.on_value * h[rows] * np.exp(1j * theta[rows])
        return LinkSample(x=x, theta=theta, h=h, y=y, r=np.abs(y) ** 2)

    def log_ratios(self, sample: LinkSample, detector: str, csi: str) -> np.ndarray:
        """log p(observation | input, side information) / p(observation | side information)"""
        cfg, ch = self.cfg, self.ch
        n = len(sample.x)
        if csi == PERFECT:
            h_mag = np.abs(sample.h)
            lf = log_f_perfect(sample.r, h_mag[:, None], cfg)
        else:
            lf = log_f_imperfect(sample.r, ch, cfg)
        log_mix = log_mixture(lf, cfg.nu)

        out = -log_mix
        rows = np.flatnonzero(sample.x > 0)
        cols = sample.x[rows] - 1
        if detector == ENERGY:
            out[rows] += lf[rows, cols]
        else:
            a = cfg.alpha_sq()
            y_on = sample.y[rows, cols]
            r_on = sample.r[rows, cols]
            phase = np.exp(1j * sample.theta[rows])
            if csi == PERFECT:
                mean = np.sqrt(a) * sample.h[rows] * phase
                out[rows] += r_on - np.abs(y_on - mean) ** 2
            else:
                s = ch.gamma_sq * a + 1.0
                mean = np.sqrt(a * ch.d_mag_sq) * phase
                out[rows] += r_on - np.log(s) - np.abs(y_on - mean) ** 2 / s
        if out.shape != (n,):
            raise EstimationError("Log-ratio batch has the wrong shape")
        return out


def simulate_mi(ch: ChannelParams, cfg: SignalingConfig, mode: str, n: int, seed: int,
                threshold: Optional[float] = None, inject_bias: float = 0.0,
                analytic: Optional[Estimate] = None) -> ValidationReport:
    """
    Mutual information from simulated channel uses, compared with the
    capacity module evaluated on an independent seed.
    """
    detector, csi = _split_mode(mode)
    threshold = settings.Z_THRESHOLD if threshold is None else threshold
    mc = McConfig(n, seed % 2 ** 64, min(settings.BATCH_SIZE, n))
    simulator = LinkSimulator(ch, cfg, phase_modulated=detector == PHASE)

    def draw(rng, size):
        return simulator.log_ratios(simulator.draw(rng, size), detector, csi) + inject_bias

    estimate = mc_mean(draw, mc)
    if analytic is None:
        analytic = compute_capacity(ch, cfg, detector, csi, mc.with_seed(seed + _CAPACITY_SEED_OFFSET)).estimate
    z = z_score(estimate, analytic.value, analytic.std_error)
    passed = bool(abs(z) <= threshold)
    log_message(f"simulate_mi[{mode}] M={cfg.m} nu={cfg.nu:g} snr={cfg.snr:g}: "
                f"{estimate.value:.6g} vs {analytic.value:.6g} (z={z:+.2f}) {'PASS' if passed else 'FAIL'}")
    return ValidationReport(estimate, analytic.value, z, passed, mode, analytic.std_error)


def per_tone_divergences(ch: ChannelParams, cfg: SignalingConfig, mode: str,
                         est: Optional[McConfig] = None) -> List[Estimate]:
    """
    D_i = D(p_{R|X=i} || p_R) for each tone. Tone i gets its own child stream
    and its own draws with the on-tone at position i, so the estimates are
    independent across tones.
    """
    detector, csi = _split_mode(mode)
    est = McConfig() if est is None else est
    if not isinstance(est, McConfig):
        raise ConfigurationError("Per-tone divergences are estimated by Monte Carlo")
    if cfg.snr == 0:
        return [Estimate.exact(0.0) for _ in range(cfg.m)]
    m, nu = cfg.m, cfg.nu
    a = cfg.alpha_sq()

    def tone_column(rng, n, i):
        r = rng.standard_exponential((n, m))
        w = standard_complex_normal(rng, n)
        g = standard_complex_normal(rng, n)
        if csi == PERFECT:
            h_sq = np.abs(np.sqrt(ch.d_mag_sq) + np.sqrt(ch.gamma_sq) * g) ** 2
            r[:, i] = np.abs(np.sqrt(a * h_sq) + w) ** 2
            lf = log_f_perfect(r, np.sqrt(h_sq)[:, None], cfg)
            closed = a * h_sq
        else:
            r[:, i] = np.abs(np.sqrt(a * ch.d_mag_sq) + np.sqrt(ch.gamma_sq * a + 1.0) * w) ** 2
            lf = log_f_imperfect(r, ch, cfg)
            closed = np.full(n, phase_limit_term(ch, cfg, IMPERFECT) / nu)
        log_mix = log_mixture(lf, nu)
        if detector == ENERGY:
            return lf[:, i] - log_mix
        return closed - log_mix

    def draw(rng, n):
        return np.stack([tone_column(tone_rng, n, i) for i, tone_rng in enumerate(rng.spawn(m))], axis=-1)

    mean, std_error = mc_moments(draw, est)
    return [Estimate(float(v), float(s), METHOD_MC) for v, s in zip(mean, std_error)]


def relative_spread(divergences: Sequence[Estimate]) -> float:
    """max_i |D_i - mean(D)| / mean(D)"""
    values = np.array([d.value for d in divergences])
    mean = values.mean()
    if abs(mean) < 1e-15:
        return 0.0
    return float(np.max(np.abs(values - mean)) / abs(mean))


def kkt_residual(ch: ChannelParams, cfg: SignalingConfig, mode: str, est: Optional[McConfig] = None) -> float:
    """Relative spread of the per-tone divergences; zero for a stationary equiprobable input"""
    if cfg.m == 1:
        return 0.0
    return relative_spread(per_tone_divergences(ch, cfg, mode, est))


def kkt_noise_floor(divergences: Sequence[Estimate], sigmas: float = 4.0) -> float:
    """Relative residual that MC noise alone can produce"""
    mean = np.mean([d.value for d in divergences])
    if abs(mean) < 1e-15:
        return 0.0
    return float(sigmas * max(d.std_error for d in divergences) / abs(mean))


def martingale_convergence_check(ch: ChannelParams, nu: float, snr: float, m_list: Sequence[int],
                                 est=None, csi: str = IMPERFECT) -> List[Tuple[int, float]]:
    """Mixture penalty E0{(S_M/M) log(S_M/M)} for each M; nonnegative and shrinking"""
    m_list = [int(m) for m in m_list]
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise DomainError("M values must be strictly increasing")
    sequence = []
    for m in m_list:
        gap = mixture_entropy_gap(ch, SignalingConfig(m, nu, snr), csi, est)
        log_message(f"chi_M M={m}: {gap.value:.6g} +/- {gap.std_error:.2g}", "DEBUG")
        sequence.append((m, gap.value))
    return sequence


def null_output_ks(ch: ChannelParams, cfg: SignalingConfig, n: int, seed: int) -> List[float]:
    """KS p-values per tone of silent-symbol energies against Exp(1)"""
    simulator = LinkSimulator(ch, cfg)
    sample = simulator.draw(batch_rng(seed, 0), n)
    null = sample.r[sample.x == 0]
    return [float(stats.kstest(null[:, j], "expon").pvalue) for j in range(cfg.m)]


def run_default_suite(samples: int = 200_000, seed: int = 2024, inject_bias: bool = False) -> List[Dict]:
    """Checks behind the `validate` command; each row carries its own verdict"""
    if samples < 1:
        raise ConfigurationError(f"samples must be positive, got {samples}")
    bias = INJECTED_BIAS if inject_bias else 0.0
    rayleigh = ChannelParams(d_mag_sq=0.0, gamma_sq=1.0)
    rician = ChannelParams.from_rician_k(1.0)
    rows = []

    mi_points = [
        ("energy-imperfect", rayleigh, SignalingConfig(2, 1.0, 1.0)),
        ("energy-perfect", rician, SignalingConfig(2, 0.5, 1.0)),
        ("oofpsk-imperfect", rician, SignalingConfig(2, 0.5, 1.0)),
        ("oofpsk-perfect", rician, SignalingConfig(2, 1.0, 0.5)),
    ]
    for k, (mode, ch, cfg) in enumerate(mi_points):
        report = simulate_mi(ch, cfg, mode, samples, seed + k, inject_bias=bias)
        rows.append({"check": f"simulate_mi/{mode}", "statistic": report.z_score,
                     "threshold": settings.Z_THRESHOLD, "passed": report.passed,
                     "detail": f"mi={report.mi_estimate.value:.6g} capacity={report.analytic_value:.6g}"})

    kkt_cfg = McConfig(samples, seed, min(settings.BATCH_SIZE, samples))
    for m in (2, 3):
        for mode in MODES:
            cfg = SignalingConfig(m, 0.5, 1.0)
            divergences = per_tone_divergences(rician, cfg, mode, kkt_cfg)
            residual = relative_spread(divergences)
            floor = max(kkt_noise_floor(divergences), 1e-12)
            rows.append({"check": f"kkt/{mode}/M={m}", "statistic": residual, "threshold": floor,
                         "passed": residual <= floor,
                         "detail": ";".join(f"{d.value:.6g}" for d in divergences)})

    gaps = [mixture_entropy_gap(rayleigh, SignalingConfig(m, 1.0, 1.0), IMPERFECT, kkt_cfg) for m in (2, 8, 32)]
    monotone = all(b.value <= a.value + 3 * np.hypot(a.std_error, b.std_error) for a, b in zip(gaps, gaps[1:]))
    rows.append({"check": "martingale/chi_M", "statistic": gaps[-1].value, "threshold": gaps[0].value,
                 "passed": monotone and gaps[-1].value >= -3 * gaps[-1].std_error,
                 "detail": ";".join(f"{g.value:.4g}" for g in gaps)})

    p_values = null_output_ks(rician, SignalingConfig(2, 0.5, 1.0), min(samples, 100_000), seed)
    rows.append({"check": "null-law/ks", "statistic": min(p_values), "threshold": 1e-3,
                 "passed": min(p_values) > 1e-3, "detail": ";".join(f"{p:.3g}" for p in p_values)})

    large_m = SignalingConfig(64, 1.0, 1.0)
    mi = simulate_mi(rician, large_m, "oofpsk-imperfect", samples, seed + 17, inject_bias=bias,
                     analytic=c_inf_oofpsk_imperfect(rician, 1.0, 1.0).estimate)
    limit = mi.analytic_value
    tolerance = 0.03 * limit + 4 * mi.mi_estimate.std_error
    rows.append({"check": "simulate_mi/oofpsk-imperfect/M=64", "statistic": mi.mi_estimate.value - limit,
                 "threshold": tolerance, "passed": abs(mi.mi_estimate.value - limit) <= tolerance,
                 "detail": f"limit={limit:.6g}"})
    return rows
