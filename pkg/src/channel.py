"""
Rician channel and on-off signaling parameters, with the conditional
output densities of the energy-detection and phase receivers in log domain.

Densities drop the common factor e^{-sum r_j}: every per-tone quantity here
is the ratio of the on-tone density to the Exp(1) noise-only density.
"""
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import special

from src.exceptions import DomainError
from src.numerics import ArrayLike, log_bessel_i0, standard_complex_normal

PERFECT = "perfect"
IMPERFECT = "imperfect"
CSI_MODES = (PERFECT, IMPERFECT)

FIXED_PAR = "fixed-par"
FIXED_PEAK = "fixed-peak"

# Above this the expm1 form of the mixture overflows
_MIXTURE_EXP_LIMIT = 600.0
_MIXTURE_FLOOR = 1e-3


def _check_nonnegative(name: str, value: float):
    if not np.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be finite and nonnegative, got {value}")


@dataclass(frozen=True)
class ChannelParams:
    """Rician fading h = d + sqrt(gamma_sq) w with w ~ CN(0, 1)"""
    d_mag_sq: float
    gamma_sq: float

    def __post_init__(self):
        _check_nonnegative("d_mag_sq", self.d_mag_sq)
        _check_nonnegative("gamma_sq", self.gamma_sq)
        if self.d_mag_sq + self.gamma_sq <= 0:
            raise DomainError("Channel must carry positive mean power")

    @classmethod
    def from_rician_k(cls, k: float, power: float = 1.0) -> "ChannelParams":
        """Split mean power between specular and diffuse parts with ratio K"""
        if k < 0 or np.isnan(k):
            raise DomainError(f"Rician factor must be nonnegative, got {k}")
        if power <= 0:
            raise DomainError(f"Channel power must be positive, got {power}")
        if np.isinf(k):
            return cls(d_mag_sq=float(power), gamma_sq=0.0)
        return cls(d_mag_sq=power * k / (1.0 + k), gamma_sq=power / (1.0 + k))

    def rician_k(self) -> float:
        if self.gamma_sq == 0:
            return float("inf")
        return self.d_mag_sq / self.gamma_sq

    def mean_power(self) -> float:
        return self.gamma_sq + self.d_mag_sq

    def fourth_moment(self) -> float:
        return 2 * self.gamma_sq ** 2 + 4 * self.gamma_sq * self.d_mag_sq + self.d_mag_sq ** 2

    def kurtosis(self) -> float:
        """E{|h|^4} / (E{|h|^2})^2 of the fading magnitude"""
        return self.fourth_moment() / self.mean_power() ** 2

    def is_unfaded(self) -> bool:
        return self.gamma_sq == 0


@dataclass(frozen=True)
class SignalingConfig:
    """M tones, duty factor nu and per-symbol SNR (linear)"""
    m: int
    nu: float
    snr: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"Number of tones must be a positive integer, got {self.m}")
        if not 0 < self.nu <= 1:
            raise DomainError(f"Duty factor must lie in (0, 1], got {self.nu}")
        _check_nonnegative("snr", self.snr)

    def alpha_sq(self) -> float:
        """Peak SNR of an on-symbol"""
        return self.snr / self.nu

    def par(self) -> float:
        return 1.0 / self.nu

    def with_snr(self, snr: float) -> "SignalingConfig":
        return SignalingConfig(self.m, self.nu, snr)


@dataclass(frozen=True)
class PeakConstraint:
    kind: str = FIXED_PAR
    eta: Optional[float] = None

    def __post_init__(self):
        if self.kind == FIXED_PAR:
            if self.eta is not None:
                raise DomainError("A fixed-PAR constraint takes no peak level")
        elif self.kind == FIXED_PEAK:
            if self.eta is None or not np.isfinite(self.eta) or self.eta <= 0:
                raise DomainError(f"Peak level eta must be positive, got {self.eta}")
        else:
            raise DomainError(f"Unknown peak constraint: {self.kind}")

    @classmethod
    def fixed_par(cls) -> "PeakConstraint":
        return cls(FIXED_PAR)

    @classmethod
    def fixed_peak(cls, eta: float) -> "PeakConstraint":
        return cls(FIXED_PEAK, float(eta))

    def duty_factor(self, snr: float, nu: Optional[float] = None) -> float:
        """nu itself under fixed PAR, snr/eta under a fixed peak"""
        if self.kind == FIXED_PAR:
            if nu is None:
                raise DomainError("Fixed-PAR regime needs a duty factor")
            return nu
        duty = snr / self.eta
        if not 0 < duty <= 1:
            raise DomainError(f"SNR {snr} is not admissible under peak level {self.eta}")
        return duty

    def signaling(self, m: int, snr: float, nu: Optional[float] = None) -> SignalingConfig:
        return SignalingConfig(m, self.duty_factor(snr, nu), snr)


@dataclass(frozen=True)
class EnergyVector:
    """Correlator output energies R_i = |Y_i|^2"""
    r: Tuple[float, ...]

    def __post_init__(self):
        arr = np.asarray(self.r, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("Energy vector must be a nonempty list")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DomainError(f"Energies must be finite and nonnegative, got {self.r}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.r, dtype=float)

    def __len__(self):
        return len(self.r)


def _energies(r: ArrayLike) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("Energies must be finite and nonnegative")
    return arr


def _scalar_or_array(value: np.ndarray, *inputs) -> ArrayLike:
    if all(np.ndim(x) == 0 for x in inputs):
        return float(value)
    return value


def log_f_perfect(r_i: ArrayLike, h_mag: ArrayLike, cfg: SignalingConfig) -> ArrayLike:
    """Log likelihood ratio of an on-tone energy when |h| is known"""
    r = _energies(r_i)
    h = np.asarray(h_mag, dtype=float)
    if not np.all(np.isfinite(h)) or np.any(h < 0):
        raise DomainError("Fading magnitude must be finite and nonnegative")
    gain = cfg.alpha_sq() * h ** 2
    value = -gain + log_bessel_i0(2.0 * np.sqrt(gain * r))
    return _scalar_or_array(np.asarray(value), r_i, h_mag)


def log_f_imperfect(r_i: ArrayLike, ch: ChannelParams, cfg: SignalingConfig) -> ArrayLike:
    """Log likelihood ratio of an on-tone energy when only the fading law is known"""
    r = _energies(r_i)
    a = cfg.alpha_sq()
    s = ch.gamma_sq * a + 1.0
    value = (-np.log1p(ch.gamma_sq * a)
             + a * (ch.gamma_sq * r - ch.d_mag_sq) / s
             + log_bessel_i0(2.0 * np.sqrt(a * ch.d_mag_sq * r) / s))
    return _scalar_or_array(np.asarray(value), r_i)


def log_mixture(per_tone_log_f: np.ndarray, nu: float) -> ArrayLike:
    """
    log[(1 - nu) + (nu/M) sum_i exp(log_f_i)] along the last axis.

    The expm1/log1p form is exact when every log_f_i is zero and keeps
    relative precision at low SNR; log-sum-exp takes over when the
    mixture overflows or becomes small.
    """
    log_f = np.asarray(per_tone_log_f, dtype=float)
    m = log_f.shape[-1]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        t = nu * np.mean(np.expm1(log_f), axis=-1)
        out = np.log1p(t)
    unstable = ~np.isfinite(t) | (np.max(log_f, axis=-1) > _MIXTURE_EXP_LIMIT) | (1.0 + t < _MIXTURE_FLOOR)
    if np.any(unstable):
        rows = log_f[unstable] if log_f.ndim > 1 else log_f[None, :]
        a = np.concatenate([np.zeros(rows.shape[:-1] + (1,)), rows], axis=-1)
        b = np.concatenate([[1.0 - nu], np.full(m, nu / m)])
        fallback = special.logsumexp(a, axis=-1, b=b)
        if log_f.ndim > 1:
            out[unstable] = fallback
        else:
            out = fallback[0]
    if np.ndim(out) == 0:
        return float(out)
    return out


def log_mixture_density(r: Union[EnergyVector, ArrayLike, None], per_tone_log_f, nu: float) -> ArrayLike:
    """Log of the output mixture density ratio for an energy vector r"""
    if not 0 < nu <= 1:
        raise DomainError(f"Duty factor must lie in (0, 1], got {nu}")
    log_f = np.asarray(per_tone_log_f, dtype=float)
    if r is not None:
        energies = r.as_array() if isinstance(r, EnergyVector) else _energies(r)
        if energies.shape[-1] != log_f.shape[-1]:
            raise DomainError("Energy vector and per-tone log-likelihoods differ in length")
    return log_mixture(log_f, nu)


def log_output_density(r: ArrayLike, per_tone_log_f, nu: float) -> ArrayLike:
    """Full log p_R with the e^{-sum r} factor reinstated"""
    energies = r.as_array() if isinstance(r, EnergyVector) else _energies(r)
    return -np.sum(energies, axis=-1) + log_mixture_density(energies, per_tone_log_f, nu)


def on_tone_moments(ch: ChannelParams, cfg: SignalingConfig) -> Tuple[float, float]:
    """
    (scale, noncentrality) of the on-tone energy without receiver CSI:
    R / scale is unit noncentral with the returned noncentrality.
    """
    a = cfg.alpha_sq()
    scale = ch.gamma_sq * a + 1.0
    return scale, a * ch.d_mag_sq / scale


def draw_outputs(x: int, side: Union[float, np.ndarray, ChannelParams], cfg: SignalingConfig,
                 mode: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    n energy vectors given input x (0 for silence, i for tone i).

    Always draws an (n, M) block of standard exponentials followed by n
    standard complex normals, whatever the input, so one seed yields common
    random numbers across symbols and SNR values.
    """
    if int(x) != x or not 0 <= x <= cfg.m:
        raise DomainError(f"Input symbol must lie in 0..{cfg.m}, got {x}")
    r = rng.standard_exponential((n, cfg.m))
    w = standard_complex_normal(rng, n)
    if x == 0:
        return r

    a = cfg.alpha_sq()
    if mode == PERFECT:
        h_mag = np.asarray(side, dtype=float)
        on = np.abs(np.sqrt(a) * h_mag + w) ** 2
    elif mode == IMPERFECT:
        ch = side
        on = np.abs(np.sqrt(a * ch.d_mag_sq) + np.sqrt(ch.gamma_sq * a + 1.0) * w) ** 2
    else:
        raise DomainError(f"Unknown CSI mode: {mode}")
    r[:, x - 1] = on
    return r


def sample_output_given_input(x: int, h_mag_or_params, cfg: SignalingConfig, mode: str,
                              rng: np.random.Generator) -> EnergyVector:
    r = draw_outputs(x, h_mag_or_params, cfg, mode, 1, rng)[0]
    return EnergyVector(tuple(float(v) for v in r))
