"""
Numerical primitives shared by the capacity engine: log-domain Bessel
evaluation, Gaussian quadrature rules, seeded batch Monte Carlo and
finite-difference stencils.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy import special

from config.settings import settings
from src.exceptions import ConfigurationError, DomainError, EstimationError

ArrayLike = Union[float, np.ndarray]

METHOD_MC = "mc"
METHOD_QUADRATURE = "quadrature"
METHOD_CLOSED_FORM = "closed-form"

GAUSS_LAGUERRE = "gauss-laguerre"
GAUSS_HERMITE = "gauss-hermite"

MAX_QUADRATURE_ORDER = 256
_SERIES_CUTOFF = 2.0
_SERIES_TERMS = 30


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo budget and seed"""
    sample_count: int = field(default_factory=lambda: settings.SAMPLES)
    seed: int = field(default_factory=lambda: settings.SEED)
    batch_size: int = field(default_factory=lambda: settings.BATCH_SIZE)

    def __post_init__(self):
        if int(self.sample_count) != self.sample_count or self.sample_count < 1:
            raise ConfigurationError(f"sample_count must be a positive integer, got {self.sample_count}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be a positive integer, got {self.batch_size}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def with_seed(self, seed: int) -> "McConfig":
        return McConfig(self.sample_count, seed % 2 ** 64, self.batch_size)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    kind: str
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.kind not in (GAUSS_LAGUERRE, GAUSS_HERMITE):
            raise ConfigurationError(f"Unknown quadrature kind: {self.kind}")
        if len(self.nodes) != self.order or len(self.weights) != self.order:
            raise ConfigurationError("Quadrature nodes and weights must both have length order")

    def integrate(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        """Sum of weights times g at the nodes"""
        return float(np.dot(self.weights, g(self.nodes)))


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    method: str

    def __post_init__(self):
        if self.method not in (METHOD_MC, METHOD_QUADRATURE, METHOD_CLOSED_FORM):
            raise ConfigurationError(f"Unknown estimation method: {self.method}")
        if self.std_error < 0:
            raise ConfigurationError("std_error must be nonnegative")
        if self.method != METHOD_MC and self.std_error != 0:
            raise ConfigurationError(f"{self.method} estimates carry no standard error")

    @classmethod
    def exact(cls, value: float, method: str = METHOD_CLOSED_FORM) -> "Estimate":
        return cls(float(value), 0.0, method)


def combine_std_error(a: float, b: float) -> float:
    return float(np.hypot(a, b))


def z_score(estimate: Estimate, reference: float, reference_std: float = 0.0) -> float:
    """Standardized difference between an estimate and a reference value"""
    sigma = max(combine_std_error(estimate.std_error, reference_std), 1e-12)
    return (estimate.value - reference) / sigma


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def log_bessel_i0(x: ArrayLike) -> ArrayLike:
    """log I0(x) for x >= 0, without overflow for large x"""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"log_bessel_i0 requires finite nonnegative arguments, got {x}")

    out = np.empty_like(arr)
    small = arr < _SERIES_CUTOFF

    # Series through log1p keeps relative precision near zero
    if np.any(small):
        y = (arr[small] / 2.0) ** 2
        term = np.ones_like(y)
        total = np.zeros_like(y)
        for k in range(1, _SERIES_TERMS + 1):
            term = term * y / (k * k)
            total += term
        out[small] = np.log1p(total)

    large = ~small
    if np.any(large):
        out[large] = np.log(special.i0e(arr[large])) + arr[large]

    if np.ndim(x) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def _check_order(order: int):
    if int(order) != order or not 1 <= order <= MAX_QUADRATURE_ORDER:
        raise ConfigurationError(f"Quadrature order must be in [1, {MAX_QUADRATURE_ORDER}], got {order}")


def gauss_laguerre(order: int) -> QuadratureRule:
    """Gauss-Laguerre rule for integrals against e^{-x} on [0, inf)"""
    _check_order(order)
    nodes, weights = special.roots_laguerre(int(order))
    return QuadratureRule(GAUSS_LAGUERRE, int(order), np.asarray(nodes), np.asarray(weights))


def gauss_hermite(order: int) -> QuadratureRule:
    """Gauss-Hermite rule for integrals against e^{-x^2} on the real line"""
    _check_order(order)
    nodes, weights = special.roots_hermite(int(order))
    return QuadratureRule(GAUSS_HERMITE, int(order), np.asarray(nodes), np.asarray(weights))


def complex_gaussian_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tensor Gauss-Hermite nodes and weights for E{g(w)} with w ~ CN(0, 1).
    Real and imaginary parts are N(0, 1/2), whose density is e^{-x^2}/sqrt(pi).
    """
    rule = gauss_hermite(order)
    re, im = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    w = np.outer(rule.weights, rule.weights) / np.pi
    return (re + 1j * im).ravel(), w.ravel()


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sampler:
    """Distribution tag plus parameters; draws are built from standard variates"""
    tag: str
    params: Tuple[float, ...]

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.tag == "exp1-iid-vector":
            (m,) = self.params
            return rng.standard_exponential((n, int(m)))
        elif self.tag == "rician-magnitude":
            d_mag_sq, gamma_sq = self.params
            w = standard_complex_normal(rng, n)
            return np.abs(np.sqrt(d_mag_sq) + np.sqrt(gamma_sq) * w)
        elif self.tag == "noncentral-chisq":
            lam, scale = self.params
            w = standard_complex_normal(rng, n)
            return np.abs(np.sqrt(lam) + np.sqrt(scale) * w) ** 2
        else:
            raise ConfigurationError(f"Unknown sampler: {self.tag}")


def exp1_iid_vector(m: int) -> Sampler:
    if m < 1:
        raise DomainError(f"Vector length must be positive, got {m}")
    return Sampler("exp1-iid-vector", (int(m),))


def rician_magnitude(d_mag_sq: float, gamma_sq: float) -> Sampler:
    """|h| for h = d + sqrt(gamma_sq) w, w ~ CN(0, 1)"""
    if d_mag_sq < 0 or gamma_sq < 0:
        raise DomainError("Rician parameters must be nonnegative")
    return Sampler("rician-magnitude", (float(d_mag_sq), float(gamma_sq)))


def noncentral_chisq(lam: float, scale: float) -> Sampler:
    """R = |sqrt(lam) + sqrt(scale) w|^2, so E{R} = lam + scale"""
    if lam < 0 or scale <= 0:
        raise DomainError("noncentral-chisq needs lam >= 0 and scale > 0")
    return Sampler("noncentral-chisq", (float(lam), float(scale)))


def standard_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex normal with unit variance"""
    if np.isscalar(shape):
        shape = (int(shape),)
    parts = rng.standard_normal(tuple(shape) + (2,)) * np.sqrt(0.5)
    return parts[..., 0] + 1j * parts[..., 1]


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def batch_rng(seed: int, batch_index: int) -> np.random.Generator:
    """Generator for one batch, independent of how batches are scheduled"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(batch_index,)))


def _batch_moments(draw: Callable, cfg: McConfig, index: int, start: int, size: int):
    values = np.asarray(draw(batch_rng(cfg.seed, index), size), dtype=float)
    if values.shape[0] != size:
        raise ConfigurationError(f"Draw returned {values.shape[0]} values for a batch of {size}")
    finite = np.isfinite(values)
    if not np.all(finite):
        bad = np.flatnonzero(~finite.reshape(size, -1).all(axis=1))[0]
        raise EstimationError("Non-finite Monte Carlo sample", sample_index=start + int(bad))
    mean = values.mean(axis=0)
    m2 = ((values - mean) ** 2).sum(axis=0)
    return size, mean, m2


def mc_moments(draw: Callable[[np.random.Generator, int], np.ndarray],
               cfg: McConfig, workers: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched sample mean and standard error of draw(rng, n).

    draw returns either n values or an (n, k) array; the moments are
    returned per column. Batch k always uses the seed stream (seed, k) and
    partial moments are merged in batch order, so the result does not
    depend on the worker count.
    """
    n_total = int(cfg.sample_count)
    starts = list(range(0, n_total, cfg.batch_size))
    sizes = [min(cfg.batch_size, n_total - s) for s in starts]
    workers = settings.THREADS if workers is None else workers
    workers = max(1, min(int(workers), len(starts)))

    def run(k):
        return _batch_moments(draw, cfg, k, starts[k], sizes[k])

    if workers == 1:
        parts = [run(k) for k in range(len(starts))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(starts))))

    count, mean, m2 = parts[0]
    for n_b, mean_b, m2_b in parts[1:]:
        delta = mean_b - mean
        total = count + n_b
        mean = mean + delta * n_b / total
        m2 = m2 + m2_b + delta ** 2 * count * n_b / total
        count = total

    if count > 1:
        std_error = np.sqrt(m2 / (count - 1) / count)
    else:
        std_error = np.full_like(np.asarray(mean, dtype=float), np.inf)
    return np.asarray(mean, dtype=float), np.asarray(std_error, dtype=float)


def mc_mean(draw: Callable[[np.random.Generator, int], np.ndarray],
            cfg: McConfig, workers: Optional[int] = None) -> Estimate:
    mean, std_error = mc_moments(draw, cfg, workers)
    return Estimate(mean.item(), std_error.item(), METHOD_MC)


def mc_expectation(sampler: Sampler, integrand: Callable[[np.ndarray], np.ndarray],
                   cfg: McConfig) -> Estimate:
    """E{integrand(X)} for X from sampler; integrand maps a batch of draws to one value per draw"""
    def draw(rng, n):
        values = np.asarray(integrand(sampler.draw(rng, n)), dtype=float)
        if values.size != n:
            raise ConfigurationError("Integrand must return one value per sample")
        return values.reshape(n)

    return mc_mean(draw, cfg)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

_STENCILS: Dict[Tuple[bool, int], Tuple[Tuple[float, ...], Tuple[float, ...]]] = {
    # (one_sided, order): (offsets in units of h, coefficients)
    (False, 1): ((-1.0, 1.0), (-0.5, 0.5)),
    (False, 2): ((-1.0, 0.0, 1.0), (1.0, -2.0, 1.0)),
    (True, 1): ((0.0, 1.0, 2.0), (-1.5, 2.0, -0.5)),
    (True, 2): ((0.0, 1.0, 2.0, 3.0), (2.0, -5.0, 4.0, -1.0)),
}


def central_difference(f: Callable[[float], float], x0: float, h: float, order: int,
                       one_sided: Optional[bool] = None) -> float:
    """
    First or second derivative of f at x0.

    One-sided forward stencils (second-order accurate) are used when
    one_sided is set, or by default when x0 - 2h falls below zero.
    """
    if h <= 0:
        raise DomainError(f"Step must be positive, got {h}")
    if order not in (1, 2):
        raise ConfigurationError(f"Derivative order must be 1 or 2, got {order}")
    if one_sided is None:
        one_sided = x0 - 2 * h < 0

    offsets, coefficients = _STENCILS[(bool(one_sided), order)]
    total = 0.0
    for offset, coefficient in zip(offsets, coefficients):
        value = float(f(x0 + offset * h))
        if not np.isfinite(value):
            raise EstimationError(f"Non-finite function value at {x0 + offset * h}")
        total += coefficient * value
    return total / h ** order
