"""Closed-form SIR coverage expressions and the interference quadrature kernel.

All thresholds are linear power ratios here; dB conversion belongs to the CLI
boundary. Every coverage function returns a probability in [0, 1].
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy import integrate

from . import channel, geometry
from .errors import NumericalError, ParameterError

INTERFERENCE_ABS_TOL = 1e-9


@dataclass(frozen=True)
class CoverageQuery:
    """One evaluation point for the coverage closed forms (SI units, linear T)."""

    threshold: float
    alpha: float = 4.0
    n_elements: int = 16
    lambda_bs: float = 2.5e-5
    lambda_ris: float = 5e-2
    m_elements: int = 100
    beta: float = 0.9
    p_s: float = 2.0
    mu: float = 1.0
    epsilon_floor: float = 1.0
    phase_bits: int | str = channel.IDEAL_PHASES

    def __post_init__(self):
        if not self.threshold > 0:
            raise ParameterError(f"threshold must be positive, got {self.threshold!r}")
        if not self.alpha > 2:
            raise ParameterError(f"alpha must exceed 2, got {self.alpha!r}")
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise ParameterError(f"n_elements must be a positive integer, got {self.n_elements!r}")
        for name in ("lambda_bs", "lambda_ris", "p_s", "mu", "beta", "epsilon_floor"):
            v = getattr(self, name)
            if not v > 0:
                raise ParameterError(f"{name} must be positive, got {v!r}")

    def reflection_model(self) -> channel.ReflectionModel:
        return channel.ReflectionModel(
            m_elements=self.m_elements,
            beta_attenuation=self.beta,
            phase_bits=self.phase_bits,
        )


@dataclass(frozen=True)
class InterferenceIntegral:
    """Value of the interference factor plus the quadrature error achieved."""

    value: float
    abs_tolerance: float


def _tail_integral(lower: float, alpha: float, rho: float = 1.0) -> tuple[float, float]:
    """``int_lower^inf rho**a / (rho**a + u**(a/2)) du`` with an algebraic stretch.

    Maps the semi-infinite range through ``u = lower + t / (1 - t)``; the
    integrand decays like ``u**(-a/2)`` so the transform leaves at worst an
    integrable endpoint weight at ``t = 1``.
    """
    rho_a = rho**alpha

    def transformed(t):
        u = lower + t / (1.0 - t)
        return rho_a / (rho_a + u ** (0.5 * alpha)) / (1.0 - t) ** 2

    # for alpha < 4 the stretched integrand keeps an integrable endpoint
    # weight; we ask for more than needed, silence QUADPACK's advisory, and
    # let our explicit abserr gate decide whether the result is usable
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, abserr = integrate.quad(
            transformed, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=300
        )
    return value, abserr


def interference_factor(
    T: float, alpha: float, method: str = "auto"
) -> InterferenceIntegral:
    """``T**(2/a) * int_{T**(-2/a)}^inf du / (1 + u**(a/2))``.

    ``method='auto'`` takes the arctangent closed form at ``alpha == 4`` and
    adaptive quadrature otherwise; ``method='quadrature'`` forces the general
    path (useful for cross-checking the closed form).
    """
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T!r}")
    if not alpha > 2:
        raise ParameterError(f"alpha must exceed 2, got {alpha!r}")
    if method not in ("auto", "quadrature"):
        raise ParameterError(f"unknown method {method!r}")
    if method == "auto" and alpha == 4.0:
        value = math.sqrt(T) * math.atan(math.sqrt(T))
        return InterferenceIntegral(value=value, abs_tolerance=4e-16 * max(1.0, value))
    lower = T ** (-2.0 / alpha)
    raw, abserr = _tail_integral(lower, alpha)
    scale = T ** (2.0 / alpha)
    if abserr * scale > INTERFERENCE_ABS_TOL:
        raise NumericalError(
            "interference_factor quadrature did not reach the requested tolerance",
            achieved_tolerance=abserr * scale,
        )
    return InterferenceIntegral(value=scale * raw, abs_tolerance=abserr * scale)


def _rho_interference_factor(T: float, alpha: float, rho: float) -> float:
    """The path-B variant ``T**(2/a) * int rho**a / (rho**a + u**(a/2)) du``."""
    if rho == 1.0:
        return interference_factor(T, alpha).value
    if alpha == 4.0:
        lower = T**-0.5
        return math.sqrt(T) * rho**2 * math.atan(rho**2 / lower)
    lower = T ** (-2.0 / alpha)
    raw, _ = _tail_integral(lower, alpha, rho=rho)
    return T ** (2.0 / alpha) * raw


# ---------------------------------------------------------------------------
# baseline and path-A coverage
# ---------------------------------------------------------------------------

def coverage_baseline(q: CoverageQuery) -> float:
    """Single-beam coverage ``1 / (1 + I(T, a) / sqrt(N))``."""
    i_factor = interference_factor(q.threshold, q.alpha).value
    return 1.0 / (1.0 + i_factor / math.sqrt(q.n_elements))


def coverage_baseline_general(q: CoverageQuery) -> float:
    """Pre-substitution baseline form with explicit converted intensities.

    Mathematically identical to :func:`coverage_baseline`; exists so the
    power/density independence can be asserted on the un-simplified ratio.
    """
    beam = channel.BeamModel(q.n_elements, channel.SINGLE_BEAM)
    lam_bs_t = channel.power_density_convert(q.lambda_bs, q.p_s, q.mu, q.alpha)
    lam_i_t = channel.power_density_convert(
        channel.interferer_intensity(q.lambda_bs, beam), q.p_s, q.mu, q.alpha
    )
    i_factor = interference_factor(q.threshold, q.alpha).value
    num = lam_bs_t.converted_intensity
    return num / (num + lam_i_t.converted_intensity * i_factor)


def coverage_path_a(q: CoverageQuery) -> float:
    """Split-beam direct-path coverage ``1 / (1 + sqrt(2/N) * I(T, a))``."""
    i_factor = interference_factor(q.threshold, q.alpha).value
    return 1.0 / (1.0 + math.sqrt(2.0 / q.n_elements) * i_factor)


# ---------------------------------------------------------------------------
# path-B coverage (reflected path)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathBIntensities:
    """Converted intensities feeding the reflected-path approximations.

    Carries the floor distance explicitly: the reflector intensity embeds the
    inverse-square distance moment, which is only finite because of it.
    """

    lambda_bs_tilde: float
    lambda_i_tilde: float
    lambda_ris_tilde: float
    rho: float
    epsilon_floor: float


def path_b_intensities(q: CoverageQuery) -> PathBIntensities:
    beam = channel.BeamModel(q.n_elements, channel.SPLIT_BEAM)
    half_power = beam.per_beam_power(q.p_s)
    lam_bs_t = channel.power_density_convert(q.lambda_bs, half_power, q.mu, q.alpha)
    lam_is = channel.interferer_intensity(q.lambda_bs, beam)
    lam_i_t = channel.power_density_convert(lam_is, half_power, q.mu, q.alpha)
    raw_moment = channel.reflected_power_raw_moment(
        q.lambda_bs, q.lambda_ris, q.reflection_model(), q.p_s, q.mu, q.alpha,
        q.epsilon_floor,
    )
    lam_ris_t = raw_moment * q.lambda_ris
    rho = math.sqrt(lam_bs_t.converted_intensity / lam_ris_t)
    return PathBIntensities(
        lambda_bs_tilde=lam_bs_t.converted_intensity,
        lambda_i_tilde=lam_i_t.converted_intensity,
        lambda_ris_tilde=lam_ris_t,
        rho=rho,
        epsilon_floor=q.epsilon_floor,
    )


def coverage_path_b_approx1(q: CoverageQuery) -> float:
    """Reflected-path coverage under the proportional-distance approximation.

    Treats the reflector distance as a fixed fraction ``rho`` of the serving
    distance, which tightens as the reflector density grows.
    """
    conv = path_b_intensities(q)
    i_rho = _rho_interference_factor(q.threshold, q.alpha, conv.rho)
    denom = conv.lambda_ris_tilde + conv.lambda_i_tilde / conv.rho**2 * i_rho
    return conv.lambda_ris_tilde / denom


def coverage_path_b_approx2(q: CoverageQuery) -> float:
    """Lower-bound reflected-path coverage for dense reflector deployments."""
    conv = path_b_intensities(q)
    i_factor = interference_factor(q.threshold, q.alpha).value
    return conv.lambda_ris_tilde / (
        conv.lambda_ris_tilde + conv.lambda_i_tilde * i_factor
    )


def coverage_path_b_restated(q: CoverageQuery) -> float:
    """Algebraic restatement of the lower bound in raw deployment parameters.

    Splits the bound into a reflector term ``lambda_ris * M**(4/a) * F1`` and
    an interference term ``sqrt(2/N) * lambda_bs * F2``; must agree with
    :func:`coverage_path_b_approx2` to floating-point accuracy.
    """
    eff = channel.quantization_efficiency(q.phase_bits)
    f1 = (
        (q.beta * eff / q.mu) ** (2.0 / q.alpha)
        * channel.fade_fractional_moment(1.0, q.alpha)
        * geometry.expected_inv_r1_squared(q.lambda_bs, q.lambda_ris, q.epsilon_floor)
    )
    f2 = interference_factor(q.threshold, q.alpha).value
    signal = q.lambda_ris * q.m_elements ** (4.0 / q.alpha) * f1
    interference = math.sqrt(2.0 / q.n_elements) * q.lambda_bs * f2
    return signal / (signal + interference)


def coverage_selection(q: CoverageQuery, approx: int = 2) -> float:
    """Independence combination of the two path coverages.

    There is no closed form for the max-of-two-paths SIR; this combines the
    per-path probabilities as if the paths were independent, so treat it as a
    labeled reference only. The simulator's empirical estimate is the ground
    truth.
    """
    if approx not in (1, 2):
        raise ParameterError(f"approx must be 1 or 2, got {approx!r}")
    cov_a = coverage_path_a(q)
    cov_b = coverage_path_b_approx1(q) if approx == 1 else coverage_path_b_approx2(q)
    return 1.0 - (1.0 - cov_a) * (1.0 - cov_b)
