"""Poisson point process sampling and analytic distance distributions.

Everything here is expressed in SI units (meters, points per square meter).
The nearest-neighbor distance of a homogeneous PPP of intensity ``lam`` is
Rayleigh-distributed with density ``2*pi*lam*r*exp(-pi*lam*r**2)``; the
distributions of the serving-link distance, the reflector-link distance and
the base-to-reflector distance are all built from that single fact plus the
law of cosines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import (
    DomainError,
    EmptyScenarioError,
    NumericalError,
    ParameterError,
    SingularPointError,
)

# Mass discarded when truncating a semi-infinite Rayleigh-weighted integral:
# the outer integration limit is the 1 - TAIL_MASS quantile.
TAIL_MASS = 1e-6

# Expected point count of a sampling window; keeps far-field interference
# truncation below 0.1% of the mean for path-loss exponents >= 3.
WINDOW_TARGET_POINTS = 2000.0

MAX_EMPTY_REDRAWS = 100


def _check_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not np.isfinite(value) or value <= 0:
            raise ParameterError(f"{name} must be positive and finite, got {value!r}")


def rayleigh_tail_radius(intensity: float, tail: float = TAIL_MASS) -> float:
    """Radius below which a nearest-neighbor distance falls with prob. 1 - tail."""
    _check_positive(intensity=intensity)
    return math.sqrt(-math.log(tail) / (math.pi * intensity))


def window_radius(intensity: float) -> float:
    """Sampling disc radius for a process of the given intensity.

    The larger of 10x the mean nearest-neighbor distance ``1/(2*sqrt(lam))``
    and the radius giving an expected ``WINDOW_TARGET_POINTS`` points.
    """
    _check_positive(intensity=intensity)
    by_mean_distance = 10.0 * 0.5 / math.sqrt(intensity)
    by_point_count = math.sqrt(WINDOW_TARGET_POINTS / (math.pi * intensity))
    return max(by_mean_distance, by_point_count)


@dataclass(frozen=True, eq=False)
class PointSet:
    """One realization of a planar point process on a disc around the origin.

    ``points`` is an (n, 2) float array; every point lies within
    ``window_radius`` of the origin. Origin distances are precomputed once;
    they are the quantity every consumer needs.
    """

    points: np.ndarray
    intensity: float
    window_radius: float

    def __post_init__(self):
        _check_positive(intensity=self.intensity, window_radius=self.window_radius)
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        radii = np.hypot(pts[:, 0], pts[:, 1])
        object.__setattr__(self, "_origin_radii", radii)
        # 1 ulp of slack for points sampled exactly on the rim
        if len(pts) and radii.max() > self.window_radius * (1 + 1e-12):
            raise ParameterError("point outside the sampling window")

    def __len__(self) -> int:
        return len(self.points)

    def radii(self, origin=None) -> np.ndarray:
        if origin is None:
            return self._origin_radii
        d = self.points - np.asarray(origin, dtype=float)
        return np.hypot(d[:, 0], d[:, 1])


def sample_ppp(intensity: float, window_radius: float, rng: np.random.Generator) -> PointSet:
    """Draw a homogeneous PPP on the disc of the given radius.

    The count is Poisson with mean ``intensity * pi * radius**2`` and the
    positions are uniform on the disc; fully determined by ``rng``'s state.
    """
    _check_positive(intensity=intensity, window_radius=window_radius)
    mean_count = intensity * math.pi * window_radius**2
    n = int(rng.poisson(mean_count))
    # uniform on the disc: radius via sqrt of a uniform, independent angle
    r = window_radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    pts = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
    return PointSet(points=pts, intensity=intensity, window_radius=window_radius)


def sample_ppp_nonempty(
    intensity: float,
    window_radius: float,
    rng: np.random.Generator,
    max_redraws: int = MAX_EMPTY_REDRAWS,
) -> PointSet:
    """Like :func:`sample_ppp` but redraws (bounded) on an empty realization."""
    for _ in range(max_redraws + 1):
        ps = sample_ppp(intensity, window_radius, rng)
        if len(ps):
            return ps
    raise EmptyScenarioError(
        f"point process still empty after {max_redraws} redraws "
        f"(intensity={intensity}, window_radius={window_radius}); enlarge the window"
    )


def nearest_point(point_set: PointSet, origin=None) -> tuple[int, float]:
    """Index and distance of the point closest to ``origin`` (default: UE at 0).

    Exact ties (measure zero) break toward the lowest insertion index, which
    is what ``argmin`` does.
    """
    if not len(point_set):
        raise EmptyScenarioError("nearest_point on an empty point set")
    radii = point_set.radii(origin)
    idx = int(np.argmin(radii))
    return idx, float(radii[idx])


def nearest_distance(point_set: PointSet, origin=None) -> float:
    return nearest_point(point_set, origin)[1]


# ---------------------------------------------------------------------------
# closed-form nearest-neighbor densities
# ---------------------------------------------------------------------------

def _rayleigh_pdf(r, intensity: float):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("distance must be nonnegative")
    out = 2.0 * math.pi * intensity * r * np.exp(-math.pi * intensity * r**2)
    return out if out.ndim else float(out)


def _rayleigh_cdf(r, intensity: float):
    r = np.asarray(r, dtype=float)
    out = 1.0 - np.exp(-math.pi * intensity * np.clip(r, 0.0, None) ** 2)
    return out if out.ndim else float(out)


def pdf_r0(r, lambda_bs: float):
    """Density of the distance to the nearest base station."""
    _check_positive(lambda_bs=lambda_bs)
    return _rayleigh_pdf(r, lambda_bs)


def pdf_r2(r, lambda_ris: float):
    """Density of the distance to the nearest reflector."""
    _check_positive(lambda_ris=lambda_ris)
    return _rayleigh_pdf(r, lambda_ris)


def pdf_r2_given_closer(r, lambda_ris: float, lambda_bs: float):
    """Density of the nearest-reflector distance given it beats the nearest base.

    Equals the nearest-neighbor law of the superposed process, intensity
    ``lambda_ris + lambda_bs``; for ``lambda_ris >> lambda_bs`` it collapses
    onto :func:`pdf_r2`.
    """
    _check_positive(lambda_ris=lambda_ris, lambda_bs=lambda_bs)
    return _rayleigh_pdf(r, lambda_ris + lambda_bs)


def prob_ris_closer(lambda_ris: float, lambda_bs: float) -> float:
    """Probability that the nearest reflector is closer than the nearest base."""
    _check_positive(lambda_ris=lambda_ris, lambda_bs=lambda_bs)
    return lambda_ris / (lambda_ris + lambda_bs)


# ---------------------------------------------------------------------------
# base-to-reflector distance r1
# ---------------------------------------------------------------------------
#
# With the serving base at distance r0 and the reflector at distance r2 from
# the origin, the angle between them is uniform, so the side r1 follows the
# arccos law below, supported on [|r0 - r2|, r0 + r2] with inverse-square-root
# singularities at both endpoints.

def _r1_support(r0: float, r2: float) -> tuple[float, float]:
    return abs(r0 - r2), r0 + r2


def pdf_r1_conditional(r1: float, r0: float, r2: float) -> float:
    """Density of the base-to-reflector distance for fixed ``r0`` and ``r2``."""
    _check_positive(r0=r0, r2=r2)
    lo, hi = _r1_support(r0, r2)
    if r1 < lo or r1 > hi:
        raise DomainError(f"r1={r1} outside the support [{lo}, {hi}]")
    cos_term = (r0**2 + r2**2 - r1**2) / (2.0 * r0 * r2)
    sin_sq = 1.0 - cos_term**2
    if sin_sq <= 0.0:
        raise SingularPointError(
            f"r1={r1} sits on a support endpoint; use an open quadrature rule"
        )
    return r1 / (math.pi * r0 * r2 * math.sqrt(sin_sq))


# Composite Gauss-Legendre rule with panels refined geometrically toward one
# endpoint; used for inner angle integrals whose integrand peaks there.
_PANEL_RATIOS = (0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.3, 0.6, 1.0)


@lru_cache(maxsize=None)
def _gauss_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _refined_panel_nodes(a: float, b: float, order: int = 32):
    """Nodes/weights covering [a, b] with panels clustered toward ``a``."""
    x, w = _gauss_nodes(order)
    edges = a + (b - a) * np.asarray(_PANEL_RATIOS)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)).ravel()
    weights = (0.5 * (hi - lo) * w[None, :]).ravel()
    return nodes, weights


def _pdf_r1_given_r0(r1: float, r0: float, lambda_ris: float, psi_max: float = math.pi) -> float:
    """Reflector-position integral of ``pdf_r1_conditional * pdf_r2``.

    Parametrized by the triangle angle at the base station, which turns the
    singular-endpoint r2 integral into a smooth one on [0, psi_max]:
    ``r2(psi)**2 = r0**2 + r1**2 - 2*r0*r1*cos(psi)``.
    """
    psi, w = _refined_panel_nodes(0.0, psi_max)
    r2_sq = r0**2 + r1**2 - 2.0 * r0 * r1 * np.cos(psi)
    vals = 2.0 * lambda_ris * r1 * np.exp(-math.pi * lambda_ris * r2_sq)
    return float(np.dot(w, vals))


def pdf_r1_marginal(
    r1: float,
    lambda_bs: float,
    lambda_ris: float,
    mode: str = "unconditional",
    epsrel: float = 1e-8,
) -> float:
    """Marginal density of the base-to-reflector distance.

    ``mode='unconditional'`` integrates the conditional law against the plain
    product of the two nearest-neighbor densities. ``mode='engaged'``
    additionally restricts to realizations with the reflector closer than the
    base (``r2 < r0``) and renormalizes.
    """
    _check_positive(lambda_bs=lambda_bs, lambda_ris=lambda_ris)
    if r1 <= 0:
        raise ParameterError(f"r1 must be positive, got {r1!r}")
    if mode not in ("unconditional", "engaged"):
        raise ParameterError(f"unknown mode {mode!r}")

    r0_max = rayleigh_tail_radius(lambda_bs)

    if mode == "unconditional":
        def outer(r0):
            return pdf_r0(r0, lambda_bs) * _pdf_r1_given_r0(r1, r0, lambda_ris)
    else:
        def outer(r0):
            # r2 < r0 caps the base-station angle at arccos(r1 / (2 r0))
            c = r1 / (2.0 * r0)
            if c >= 1.0:
                return 0.0
            psi_max = math.acos(c)
            return pdf_r0(r0, lambda_bs) * _pdf_r1_given_r0(r1, r0, lambda_ris, psi_max)

    value, abserr = integrate.quad(
        outer, 0.0, r0_max, epsabs=1e-14, epsrel=epsrel, limit=200
    )
    if value > 0 and abserr > max(1e-12, 1e-4 * value):
        raise NumericalError(
            f"pdf_r1_marginal quadrature did not converge at r1={r1}",
            achieved_tolerance=abserr,
        )
    if mode == "engaged":
        value /= prob_ris_closer(lambda_ris, lambda_bs)
    return value


def _conditional_mean_r1(r0, r2):
    """Mean of r1 for fixed (r0, r2): complete elliptic reduction of the angle integral."""
    s = r0 + r2
    m = 4.0 * r0 * r2 / s**2
    return (2.0 * s / math.pi) * special.ellipe(m)


@lru_cache(maxsize=256)
def expected_r1(lambda_bs: float, lambda_ris: float, rel_tol: float = 1e-3) -> float:
    """Mean base-to-reflector distance, by nested quadrature."""
    _check_positive(lambda_bs=lambda_bs, lambda_ris=lambda_ris)
    r0_max = rayleigh_tail_radius(lambda_bs)
    r2_max = rayleigh_tail_radius(lambda_ris)

    def inner(r2, r0):
        return pdf_r2(r2, lambda_ris) * _conditional_mean_r1(r0, r2)

    def outer(r0):
        val, _ = integrate.quad(
            inner, 0.0, r2_max, args=(r0,), epsabs=1e-13, epsrel=1e-9, limit=100
        )
        return pdf_r0(r0, lambda_bs) * val

    # outer tolerance stays coarser than the inner one: the integrand carries
    # the inner quadrature's noise floor
    value, abserr = integrate.quad(outer, 0.0, r0_max, epsabs=1e-12, epsrel=1e-6, limit=200)
    if value <= 0 or abserr > rel_tol * value:
        raise NumericalError(
            "expected_r1 quadrature did not converge", achieved_tolerance=abserr
        )
    return float(value)


def _conditional_inv_sq_moment(r0: float, r2: float, eps: float) -> float:
    """``E[r1**-2 * 1{r1 >= eps} | r0, r2]`` via the exact angle antiderivative.

    The angle integral ``(1/pi) * int d(phi) / (A - B cos(phi))`` from the
    capped angle to pi, with ``A = r0**2 + r2**2`` and ``B = 2 r0 r2``.
    """
    lo, hi = _r1_support(r0, r2)
    r_low = max(lo, eps)
    if r_low >= hi:
        return 0.0
    A = r0 * r0 + r2 * r2
    B = 2.0 * r0 * r2
    if r_low <= lo:
        # no cap: closed form 1 / |r0^2 - r2^2|
        return 1.0 / abs(r0 - r2) / (r0 + r2)
    cos_cap = (A - r_low * r_low) / B
    phi_lo = math.acos(max(-1.0, min(1.0, cos_cap)))
    t = math.tan(0.5 * phi_lo)
    if t <= 0.0:
        return 1.0 / abs(r0 - r2) / (r0 + r2)
    D = (r0 - r2) ** 2
    S = (r0 + r2) ** 2
    z = math.sqrt(D / S) / t
    if z < 1e-8:
        # arctan(z) ~ z; removable 0/0 at r0 == r2
        return 2.0 / (math.pi * S * t)
    return 2.0 * math.atan(z) / (math.pi * math.sqrt(D * S))


def _conditional_inv_pow_moment(r0: float, r2: float, power: float, eps: float) -> float:
    """``E[r1**-power * 1{r1 >= eps} | r0, r2]`` by the angle-refined panel rule."""
    lo, hi = _r1_support(r0, r2)
    r_low = max(lo, eps)
    if r_low >= hi:
        return 0.0
    A = r0 * r0 + r2 * r2
    B = 2.0 * r0 * r2
    if r_low <= lo:
        phi_lo = 0.0
    else:
        cos_cap = (A - r_low * r_low) / B
        phi_lo = math.acos(max(-1.0, min(1.0, cos_cap)))
    phi, w = _refined_panel_nodes(phi_lo, math.pi)
    vals = (A - B * np.cos(phi)) ** (-0.5 * power)
    return float(np.dot(w, vals)) / math.pi


def _inv_moment_double_quad(
    lambda_bs: float, lambda_ris: float, eps: float, inner_moment
) -> tuple[float, float]:
    """Outer (r0, r2) quadrature shared by the inverse-distance moments."""
    r0_max = rayleigh_tail_radius(lambda_bs)
    r2_max = rayleigh_tail_radius(lambda_ris)

    def inner(r2, r0):
        return pdf_r2(r2, lambda_ris) * inner_moment(r0, r2)

    def outer(r0):
        # the integrand ridges along |r0 - r2| ~ eps; flag those breakpoints
        pts = [p for p in (r0 - eps, r0, r0 + eps) if 0.0 < p < r2_max]
        val, _ = integrate.quad(
            inner, 0.0, r2_max, args=(r0,),
            points=pts or None, epsabs=1e-14, epsrel=1e-7, limit=200,
        )
        return pdf_r0(r0, lambda_bs) * val

    return integrate.quad(outer, 0.0, r0_max, epsabs=1e-14, epsrel=1e-7, limit=200)


@lru_cache(maxsize=256)
def expected_inv_r1_squared(
    lambda_bs: float, lambda_ris: float, epsilon_floor: float = 1.0
) -> float:
    """``E[r1**-2]`` with contributions below the floor distance discarded.

    The floor keeps the moment finite: without it the near-coincidence of the
    base and the reflector makes the integral diverge logarithmically.
    """
    _check_positive(
        lambda_bs=lambda_bs, lambda_ris=lambda_ris, epsilon_floor=epsilon_floor
    )
    value, abserr = _inv_moment_double_quad(
        lambda_bs, lambda_ris, epsilon_floor,
        lambda r0, r2: _conditional_inv_sq_moment(r0, r2, epsilon_floor),
    )
    if not np.isfinite(value) or value <= 0 or abserr > 1e-3 * value:
        raise NumericalError(
            "expected_inv_r1_squared quadrature did not converge",
            achieved_tolerance=abserr,
        )
    return float(value)


@lru_cache(maxsize=256)
def expected_inv_r1_pow(
    power: float, lambda_bs: float, lambda_ris: float, epsilon_floor: float = 1.0
) -> float:
    """``E[r1**-power]`` with the same floor convention as the square moment."""
    _check_positive(
        power=power, lambda_bs=lambda_bs, lambda_ris=lambda_ris,
        epsilon_floor=epsilon_floor,
    )
    value, abserr = _inv_moment_double_quad(
        lambda_bs, lambda_ris, epsilon_floor,
        lambda r0, r2: _conditional_inv_pow_moment(r0, r2, power, epsilon_floor),
    )
    if not np.isfinite(value) or value <= 0 or abserr > 1e-3 * value:
        raise NumericalError(
            "expected_inv_r1_pow quadrature did not converge",
            achieved_tolerance=abserr,
        )
    return float(value)


# ---------------------------------------------------------------------------
# distance-law façade
# ---------------------------------------------------------------------------

_LAW_KINDS = ("r0", "r2", "r2_given_closer", "r1_conditional", "r1_marginal")


@dataclass(frozen=True)
class DistanceLaw:
    """Uniform handle over the five analytic distance distributions.

    ``params`` carries the densities (per m^2) and, for the conditional law,
    the fixed distances. Unlike the scalar evaluators, ``pdf`` zero-extends
    outside the support so it can be applied to whole grids.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _LAW_KINDS:
            raise ParameterError(f"unknown distance-law kind {self.kind!r}")

    def support(self) -> tuple[float, float]:
        if self.kind == "r1_conditional":
            return _r1_support(self.params["r0"], self.params["r2"])
        return 0.0, math.inf

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        p = self.params
        if self.kind == "r0":
            out = np.where(r >= 0, _rayleigh_pdf(np.clip(r, 0, None), p["lambda_bs"]), 0.0)
        elif self.kind == "r2":
            out = np.where(r >= 0, _rayleigh_pdf(np.clip(r, 0, None), p["lambda_ris"]), 0.0)
        elif self.kind == "r2_given_closer":
            lam = p["lambda_ris"] + p["lambda_bs"]
            out = np.where(r >= 0, _rayleigh_pdf(np.clip(r, 0, None), lam), 0.0)
        elif self.kind == "r1_conditional":
            r0, r2 = p["r0"], p["r2"]
            lo, hi = _r1_support(r0, r2)
            cos_term = (r0**2 + r2**2 - r**2) / (2.0 * r0 * r2)
            sin_sq = 1.0 - cos_term**2
            inside = (r > lo) & (r < hi) & (sin_sq > 0)
            out = np.zeros_like(r)
            out[inside] = r[inside] / (math.pi * r0 * r2 * np.sqrt(sin_sq[inside]))
        else:  # r1_marginal
            mode = p.get("mode", "unconditional")
            out = np.array([
                pdf_r1_marginal(x, p["lambda_bs"], p["lambda_ris"], mode=mode)
                if x > 0 else 0.0
                for x in r
            ])
        return float(out[0]) if scalar else out

    def cdf(self, r):
        if self.kind == "r0":
            return _rayleigh_cdf(r, self.params["lambda_bs"])
        if self.kind == "r2":
            return _rayleigh_cdf(r, self.params["lambda_ris"])
        if self.kind == "r2_given_closer":
            return _rayleigh_cdf(r, self.params["lambda_ris"] + self.params["lambda_bs"])
        raise NotImplementedError(f"no closed-form CDF for kind {self.kind!r}")

    def mean(self) -> float:
        if self.kind == "r0":
            return 0.5 / math.sqrt(self.params["lambda_bs"])
        if self.kind == "r2":
            return 0.5 / math.sqrt(self.params["lambda_ris"])
        if self.kind == "r2_given_closer":
            return 0.5 / math.sqrt(self.params["lambda_ris"] + self.params["lambda_bs"])
        if self.kind == "r1_marginal":
            return expected_r1(self.params["lambda_bs"], self.params["lambda_ris"])
        raise NotImplementedError(f"no mean shortcut for kind {self.kind!r}")
