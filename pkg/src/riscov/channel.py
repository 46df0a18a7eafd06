"""Fading, path loss, beam thinning and the phased-array reflection model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import geometry
from .errors import DomainError, ParameterError

WAVE_SPEED = 299792458.0

SINGLE_BEAM = "single_beam"
SPLIT_BEAM = "split_beam"


@dataclass(frozen=True)
class FadingModel:
    """Exponential small-scale power gain with mean ``1 / rate_mu``."""

    rate_mu: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.rate_mu) or self.rate_mu <= 0:
            raise ParameterError(f"rate_mu must be positive, got {self.rate_mu!r}")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate_mu


def sample_fade(model: FadingModel, rng: np.random.Generator, size=None):
    """Exponential gain draw(s); deterministic given the stream."""
    return rng.exponential(scale=model.mean, size=size)


@dataclass(frozen=True)
class BeamModel:
    """Planar-array beam: one full-power beam, or two half-power beams."""

    n_elements: int
    mode: str = SINGLE_BEAM

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise ParameterError(f"n_elements must be a positive integer, got {self.n_elements!r}")
        if self.mode not in (SINGLE_BEAM, SPLIT_BEAM):
            raise ParameterError(f"unknown beam mode {self.mode!r}")

    @property
    def beamwidth(self) -> float:
        if self.mode == SINGLE_BEAM:
            return 2.0 * math.pi / math.sqrt(self.n_elements)
        return 2.0 * math.sqrt(2.0) * math.pi / math.sqrt(self.n_elements)

    @property
    def retention_probability(self) -> float:
        """Fraction of interferers whose random main lobe covers the user."""
        if self.mode == SINGLE_BEAM:
            return 1.0 / math.sqrt(self.n_elements)
        return math.sqrt(2.0 / self.n_elements)

    def per_beam_power(self, p_s: float) -> float:
        return p_s if self.mode == SINGLE_BEAM else 0.5 * p_s


def interferer_intensity(lambda_bs: float, beam: BeamModel) -> float:
    """Effective interferer density after random-orientation thinning."""
    if not np.isfinite(lambda_bs) or lambda_bs <= 0:
        raise ParameterError(f"lambda_bs must be positive, got {lambda_bs!r}")
    return lambda_bs * beam.retention_probability


def path_loss(distance, alpha: float):
    """Large-scale attenuation ``distance**-alpha``; no near-field clamp."""
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise DomainError("path_loss requires a strictly positive distance")
    if alpha <= 2:
        raise ParameterError(f"alpha must exceed 2, got {alpha!r}")
    out = distance ** (-alpha)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ConvertedIntensity:
    """Unit-power equivalent of a transmitter process (mapping theorem).

    ``power`` is the fade-normalized transmit power actually folded into the
    conversion, so ``converted_intensity == power**(2/alpha) * original_intensity``.
    """

    original_intensity: float
    power: float
    alpha: float
    converted_intensity: float


def power_density_convert(
    intensity: float, power: float, mu: float, alpha: float
) -> ConvertedIntensity:
    """Swap (transmit power, intensity) for (unit power, scaled intensity)."""
    for name, v in (("intensity", intensity), ("power", power), ("mu", mu), ("alpha", alpha)):
        if not np.isfinite(v) or v <= 0:
            raise ParameterError(f"{name} must be positive, got {v!r}")
    effective = power / mu
    converted = effective ** (2.0 / alpha) * intensity
    return ConvertedIntensity(
        original_intensity=intensity, power=effective, alpha=alpha,
        converted_intensity=converted,
    )


# ---------------------------------------------------------------------------
# phased-array reflection
# ---------------------------------------------------------------------------

IDEAL_PHASES = "ideal"


def _check_phase_bits(phase_bits) -> None:
    if phase_bits == IDEAL_PHASES:
        return
    if int(phase_bits) != phase_bits or phase_bits < 1:
        raise ParameterError(f"phase_bits must be 'ideal' or an integer >= 1, got {phase_bits!r}")


def quantize_phases(phases, phase_bits):
    """Round each phase to the nearest multiple of ``2*pi / 2**bits`` on [0, 2pi)."""
    _check_phase_bits(phase_bits)
    phases = np.asarray(phases, dtype=float)
    if phase_bits == IDEAL_PHASES:
        return phases
    step = 2.0 * math.pi / (1 << int(phase_bits))
    return np.mod(np.round(phases / step) * step, 2.0 * math.pi)


def array_factor_from_phases(target_phases, phase_bits=IDEAL_PHASES) -> complex:
    """Coherent sum after compensating each element's phase.

    With ideal compensation every residual vanishes, so the amplitude is
    exactly the element count; with b-bit compensation the rounding residuals
    survive in the sum.
    """
    target_phases = np.asarray(target_phases, dtype=float)
    if target_phases.size < 1:
        raise ParameterError("need at least one element")
    if phase_bits == IDEAL_PHASES:
        return complex(target_phases.size, 0.0)
    applied = quantize_phases(target_phases, phase_bits)
    residual = applied - target_phases
    return complex(np.sum(np.exp(1j * residual)))


@dataclass(frozen=True)
class ArrayGeometry:
    """Linear reflector layout used to derive per-element compensation phases."""

    element_spacing: float
    angle: float
    reference_distance: float
    carrier_frequency: float = 28e9
    wave_speed: float = WAVE_SPEED


def array_factor(delays, geometry_spec: ArrayGeometry, phase_bits=IDEAL_PHASES) -> complex:
    """Reflected-amplitude gain of an M-element line of passive reflectors.

    ``delays`` are the per-element impinging time offsets (seconds). The
    required compensation is the offset plus the ``m * spacing * cos(angle)``
    propagation term, expressed as a carrier phase and optionally quantized.
    """
    delays = np.asarray(delays, dtype=float)
    m = np.arange(1, delays.size + 1)
    tau = m * geometry_spec.element_spacing * math.cos(geometry_spec.angle) / geometry_spec.wave_speed
    phases = 2.0 * math.pi * geometry_spec.carrier_frequency * (tau + delays)
    return array_factor_from_phases(np.mod(phases, 2.0 * math.pi), phase_bits)


def quantization_efficiency(phase_bits) -> float:
    """Mean power efficiency of b-bit phase rounding relative to ideal phasing.

    Residuals are uniform on ``[-pi/2**b, pi/2**b)``, giving the classic
    ``sinc**2`` loss; kept independent of the element count so peak power
    retains its exact square-law scaling.
    """
    _check_phase_bits(phase_bits)
    if phase_bits == IDEAL_PHASES:
        return 1.0
    half_step = math.pi / (1 << int(phase_bits))
    return (math.sin(half_step) / half_step) ** 2


@dataclass(frozen=True)
class ReflectionModel:
    """Passive reflector bank: element count, attenuation, phase resolution."""

    m_elements: int
    beta_attenuation: float = 0.9
    phase_bits: int | str = IDEAL_PHASES
    element_spacing: float = 0.005

    def __post_init__(self):
        if int(self.m_elements) != self.m_elements or self.m_elements < 1:
            raise ParameterError(f"m_elements must be a positive integer, got {self.m_elements!r}")
        if not 0.0 < self.beta_attenuation <= 1.0:
            raise ParameterError(f"beta_attenuation must lie in (0, 1], got {self.beta_attenuation!r}")
        _check_phase_bits(self.phase_bits)


def reflection_gain(model: ReflectionModel, fade_f1: float, r1: float, alpha: float) -> float:
    """Reflected power per unit of per-beam transmit power: ``M**2 * beta * f1 * r1**-alpha``.

    This is the power-free core of the reflection chain; the simulator uses it
    directly so transmit power never enters (and hence exactly cancels in) any
    simulated ratio.
    """
    if r1 <= 0:
        raise ParameterError(f"r1 must be positive, got {r1!r}")
    eff = quantization_efficiency(model.phase_bits)
    return model.m_elements**2 * model.beta_attenuation * eff * fade_f1 * path_loss(r1, alpha)


def peak_reflection_power(
    model: ReflectionModel, p_s: float, fade_f1: float, r1: float, alpha: float
) -> float:
    """Peak power reflected toward the user by the engaged reflector bank."""
    return 0.5 * p_s * reflection_gain(model, fade_f1, r1, alpha)


def fade_fractional_moment(mu: float, alpha: float) -> float:
    """``E[f**(2/alpha)]`` for an exponential(mu) gain: ``mu**(-2/a) * Gamma(2/a + 1)``."""
    if mu <= 0 or alpha <= 0:
        raise ParameterError("mu and alpha must be positive")
    return float(mu ** (-2.0 / alpha) * special.gamma(2.0 / alpha + 1.0))


def reflected_power_raw_moment(
    lambda_bs: float,
    lambda_ris: float,
    model: ReflectionModel,
    p_s: float,
    mu: float,
    alpha: float,
    epsilon_floor: float = 1.0,
) -> float:
    """``E[(P_reflected / mu)**(2/alpha)]`` entering the converted reflector intensity."""
    if p_s <= 0 or mu <= 0:
        raise ParameterError("p_s and mu must be positive")
    if alpha <= 2:
        raise ParameterError(f"alpha must exceed 2, got {alpha!r}")
    eff = quantization_efficiency(model.phase_bits)
    prefactor = (
        model.m_elements**2 * model.beta_attenuation * eff * p_s / (2.0 * mu**2)
    ) ** (2.0 / alpha)
    inv_sq = geometry.expected_inv_r1_squared(lambda_bs, lambda_ris, epsilon_floor)
    return float(prefactor * special.gamma(2.0 / alpha + 1.0) * inv_sq)


def mean_reflected_power(
    lambda_bs: float,
    lambda_ris: float,
    model: ReflectionModel,
    p_s: float,
    mu: float,
    alpha: float,
    epsilon_floor: float = 1.0,
) -> float:
    """Average peak reflected power ``M**2 beta P_s / (2 mu) * E[r1**-alpha]``."""
    if p_s <= 0 or mu <= 0:
        raise ParameterError("p_s and mu must be positive")
    if alpha <= 2:
        raise ParameterError(f"alpha must exceed 2, got {alpha!r}")
    eff = quantization_efficiency(model.phase_bits)
    inv_alpha = geometry.expected_inv_r1_pow(alpha, lambda_bs, lambda_ris, epsilon_floor)
    return model.m_elements**2 * model.beta_attenuation * eff * p_s / (2.0 * mu) * inv_alpha
