"""Closed-form expected receiver counts for one dimensionless molecule
emitted at the origin at t* = 0: the point concentration, the
uniform-concentration approximation and its relative deviation, the exact
counts for box and spherical receivers, a quadrature oracle for the
spherical count, and the enzyme lower bound with its peak.

Every count is dimensionless (a fraction of the emitted molecules), so it
lies in [0, 1]. Count functions accept a scalar or an array of t* and return
the same shape.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from molcom import physchem
from molcom.physchem import DomainError, ReferenceSet, SystemParams, Tag

ArrayLike = Union[float, Sequence[float], np.ndarray]
Bounds = Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]

#: Stand-in for an infinite box bound; erf saturates long before this.
INFINITE_BOUND = 1e3
#: Exact counts below this make a relative deviation indeterminate.
UNDERFLOW_COUNT = 1e-300
#: Quadrature abscissae per dimension; enough for 1e-8 over the usual grid.
DEFAULT_RESOLUTION = 64
DEFAULT_QUADRATURE_RTOL = 1e-10

SPHERE = 'sphere'
BOX = 'box'


class QuadratureAccuracyError(DomainError):
    """The quadrature oracle did not reach the requested tolerance."""

    def __init__(self, message, estimate, error):
        # type: (str, float, float) -> None
        super(QuadratureAccuracyError, self).__init__(message)
        self.estimate = estimate
        self.error = error


class IndeterminateDeviationError(DomainError):
    """The exact count underflowed, so a relative deviation is meaningless."""
    pass


def _times(t_star):
    # type: (ArrayLike) -> Tuple[np.ndarray, bool]
    t = np.asarray(t_star, dtype=float)
    if not np.all(t > 0):
        raise DomainError('t* must be > 0')
    return t, t.ndim == 0


def _result(values, scalar):
    # type: (np.ndarray, bool) -> Union[float, np.ndarray]
    return float(values) if scalar else values


@dataclass(frozen=True)
class ReceiverGeometry:
    """A dimensionless receiver: a sphere of radius r_obs_star, or a box with
    per-axis `bounds` ((x_i, x_f), (y_i, y_f), (z_i, z_f)). Both have
    center_distance_star = |r*_0|, the transmitter to center distance.
    """
    kind: str
    center_distance_star: float
    r_obs_star: Optional[float] = None
    bounds: Optional[Bounds] = None

    def __post_init__(self):
        if self.kind == SPHERE:
            if self.r_obs_star is None or not self.r_obs_star > 0:
                raise DomainError('a spherical receiver needs r_obs* > 0')
        elif self.kind == BOX:
            if self.bounds is None or len(self.bounds) != 3:
                raise DomainError('a box receiver needs 3 (initial, final) bound pairs')
            for lo, hi in self.bounds:
                if not lo < hi:
                    raise DomainError('box bounds must be ordered, got ({}, {})'.format(lo, hi))
        else:
            raise DomainError('unknown receiver kind {!r}'.format(self.kind))
        if not self.center_distance_star >= 0:
            raise DomainError('the center distance must be >= 0')

    @property
    def volume(self) -> float:
        """V*, the dimensionless receiver volume."""
        if self.kind == SPHERE:
            return 4.0 / 3.0 * math.pi * self.r_obs_star ** 3
        return float(np.prod([hi - lo for lo, hi in self.bounds]))


def sphere_receiver(dist_star, r_obs_star):
    # type: (float, float) -> ReceiverGeometry
    return ReceiverGeometry(SPHERE, dist_star, r_obs_star=r_obs_star)


def box_receiver(center_star, sides_star):
    # type: (Sequence[float], Sequence[float]) -> ReceiverGeometry
    """An axis-aligned box of edge lengths sides_star centered at center_star."""
    bounds = tuple((c - s / 2, c + s / 2) for c, s in zip(center_star, sides_star))
    distance = math.sqrt(sum(c * c for c in center_star))
    return ReceiverGeometry(BOX, distance, bounds=bounds)


def volume_matched_cube(sphere):
    # type: (ReceiverGeometry) -> ReceiverGeometry
    """The axis-aligned cube with the sphere's volume and center, the center
    placed on the first axis.
    """
    side = (4.0 / 3.0 * math.pi) ** (1.0 / 3.0) * sphere.r_obs_star
    return box_receiver((sphere.center_distance_star, 0.0, 0.0), (side,) * 3)


def receiver_geometry(params, refs):
    # type: (SystemParams, ReferenceSet) -> ReceiverGeometry
    """Nondimensionalize the system's receiver by the reference length."""
    receiver = params.receiver
    length = refs.length
    if receiver.is_sphere:
        return sphere_receiver(receiver.distance / length, receiver.radius / length)
    return box_receiver(
        [c / length for c in receiver.center], [s / length for s in receiver.sides])


def point_concentration(dist_star, t_star):
    # type: (float, ArrayLike) -> Union[float, np.ndarray]
    """The free-diffusion concentration at distance dist_star from a one-molecule
    point release, (4 pi t*)^(-3/2) exp(-dist*^2 / (4 t*)).
    """
    t, scalar = _times(t_star)
    values = (4 * np.pi * t) ** -1.5 * np.exp(-dist_star ** 2 / (4 * t))
    return _result(values, scalar)


def uniform_count(geom, t_star):
    # type: (ReceiverGeometry, ArrayLike) -> Union[float, np.ndarray]
    """The count under the uniform-concentration assumption: the concentration
    at the receiver center times V*.
    """
    return point_concentration(geom.center_distance_star, t_star) * geom.volume


def _erf_difference(lo, hi):
    # type: (np.ndarray, np.ndarray) -> np.ndarray
    """erf(hi) - erf(lo) without cancellation when both are far in one tail."""
    lo, hi = np.broadcast_arrays(lo, hi)
    upper_tail = special.erfc(lo) - special.erfc(hi)
    lower_tail = special.erfc(-hi) - special.erfc(-lo)
    middle = special.erf(hi) - special.erf(lo)
    return np.where(lo >= 0, upper_tail, np.where(hi <= 0, lower_tail, middle))


def rect_count(bounds, t_star):
    # type: (Bounds, ArrayLike) -> Union[float, np.ndarray]
    """The exact count inside the box x_i <= x* <= x_f (likewise y*, z*):
    (1/8) prod over axes of [erf(D_f / 2 sqrt t*) - erf(D_i / 2 sqrt t*)].
    """
    t, scalar = _times(t_star)
    for lo, hi in bounds:
        if not lo < hi:
            raise DomainError('box bounds must be ordered, got ({}, {})'.format(lo, hi))

    scale = 2 * np.sqrt(t)
    values = np.ones_like(t)
    for lo, hi in bounds:
        values = values * _erf_difference(lo / scale, hi / scale)
    return _result(values / 8, scalar)


def sphere_count(dist_star, r_obs_star, t_star):
    # type: (float, float, ArrayLike) -> Union[float, np.ndarray]
    """The exact count inside a sphere of radius r_obs_star whose center is
    dist_star from the release point.
    """
    t, scalar = _times(t_star)
    if not dist_star > 0:
        raise DomainError('sphere_count needs dist* > 0; use the quadrature oracle at 0')
    if not r_obs_star > 0:
        raise DomainError('r_obs* must be > 0')

    d, r = dist_star, r_obs_star
    scale = 2 * np.sqrt(t)
    # (1/2)[erf((r-d)/s) + erf((r+d)/s)] written with erfc to keep precision
    # when both arguments are deep in the tails.
    erf_part = 0.5 * (special.erfc((d - r) / scale) - special.erfc((d + r) / scale))
    # exp(-(d+r)^2/4t) - exp(-(d-r)^2/4t)
    exp_part = np.exp(-(d - r) ** 2 / (4 * t)) * np.expm1(-d * r / t)
    values = erf_part + np.sqrt(t / np.pi) / d * exp_part
    return _result(np.clip(values, 0.0, 1.0), scalar)


def exact_count(geom, t_star):
    # type: (ReceiverGeometry, ArrayLike) -> Union[float, np.ndarray]
    """The exact count for either receiver kind."""
    if geom.kind == SPHERE:
        return sphere_count(geom.center_distance_star, geom.r_obs_star, t_star)
    return rect_count(geom.bounds, t_star)


def _radial_estimate(d, r, t, n):
    # type: (float, float, float, int) -> float
    """Gauss-Legendre in |r*| with both angular integrals done exactly."""
    nodes, weights = special.roots_legendre(n)
    rho = r * (nodes + 1) / 2
    if d > 0:
        # rho/(d sqrt(4 pi t)) [exp(-(rho-d)^2/4t) - exp(-(rho+d)^2/4t)]
        shell = (rho / (d * np.sqrt(4 * np.pi * t))
                 * np.exp(-(rho - d) ** 2 / (4 * t)) * -np.expm1(-rho * d / t))
    else:
        shell = 4 * np.pi * rho ** 2 * (4 * np.pi * t) ** -1.5 * np.exp(-rho ** 2 / (4 * t))
    return float(np.dot(weights, shell) * r / 2)


def _spherical_estimate(d, r, t, n):
    # type: (float, float, float, int) -> float
    """The product rule over (|r*|, theta, phi) of the triple integral, with
    the receiver centered at the origin and the source at (d, 0, 0):
    Gauss-Legendre in |r*| and theta, the trapezoid rule in periodic phi.
    """
    nodes, weights = special.roots_legendre(n)
    rho = r * (nodes + 1) / 2
    rho_w = weights * r / 2
    theta = np.pi * (nodes + 1) / 2
    theta_w = weights * np.pi / 2
    n_phi = 2 * n
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    phi_w = 2 * np.pi / n_phi

    rr, th, ph = np.meshgrid(rho, theta, phi, indexing='ij')
    dist2 = rr ** 2 + d ** 2 - 2 * rr * d * np.sin(th) * np.cos(ph)
    integrand = (4 * np.pi * t) ** -1.5 * np.exp(-dist2 / (4 * t)) * rr ** 2 * np.sin(th)
    w = rho_w[:, None, None] * theta_w[None, :, None] * phi_w
    return float(np.sum(w * integrand))


def sphere_count_quadrature(dist_star, r_obs_star, t_star,
                            resolution=DEFAULT_RESOLUTION, method='radial',
                            rtol=DEFAULT_QUADRATURE_RTOL):
    # type: (float, float, float, int, str, Optional[float]) -> float
    """Evaluate the spherical-receiver count by direct numerical quadrature of
    the point concentration over the sphere. This is the oracle for
    sphere_count(); unlike it, dist_star = 0 is allowed.

    method: 'radial' (1-D rule in |r*|, angles integrated exactly) or
        'spherical' (the full product rule in |r*|, theta, phi).
    resolution: abscissae per dimension.
    rtol: if not None, also evaluate at half resolution and raise
        QuadratureAccuracyError (carrying the estimate) when the two differ by
        more than rtol relative.
    """
    if not t_star > 0:
        raise DomainError('t* must be > 0')
    if not r_obs_star > 0:
        raise DomainError('r_obs* must be > 0')
    if not dist_star >= 0:
        raise DomainError('dist* must be >= 0')
    if resolution < 2:
        raise DomainError('the quadrature resolution must be >= 2')

    if method == 'radial':
        estimator = _radial_estimate
    elif method == 'spherical':
        estimator = _spherical_estimate
    else:
        raise DomainError('unknown quadrature method {!r}'.format(method))

    estimate = estimator(dist_star, r_obs_star, t_star, resolution)
    if rtol is not None:
        coarse = estimator(dist_star, r_obs_star, t_star, max(2, resolution // 2))
        error = abs(estimate - coarse)
        if error > rtol * abs(estimate) and error > UNDERFLOW_COUNT:
            raise QuadratureAccuracyError(
                'quadrature at resolution {} missed rtol {:g} (error {:.3g})'.format(
                    resolution, rtol, error),
                estimate, error)
    return estimate


def uniform_deviation(geom, t_star):
    # type: (ReceiverGeometry, ArrayLike) -> Union[float, np.ndarray]
    """(uniform_count - exact_count) / exact_count. Negative while the
    uniform assumption underestimates the count.

    Raises IndeterminateDeviationError if any exact count is below
    UNDERFLOW_COUNT.
    """
    exact = np.asarray(exact_count(geom, t_star))
    if np.any(exact < UNDERFLOW_COUNT):
        raise IndeterminateDeviationError(
            'the exact count underflows at t* = {}'.format(
                np.min(np.asarray(t_star, dtype=float))))
    values = np.asarray(uniform_count(geom, t_star)) / exact - 1
    return _result(values, values.ndim == 0)


@dataclass(frozen=True)
class LowerBoundParams:
    """Parameters of the enzyme lower bound: the decay constant
    alpha = L^2 k1 C_Etot / D_A (= gamma_1a), |r*_0| and V*.
    """
    alpha: float
    dist_star: float
    V_star: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise DomainError('alpha must be >= 0')
        if not self.dist_star > 0:
            raise DomainError('dist* must be > 0')
        if not self.V_star > 0:
            raise DomainError('V* must be > 0')

    @classmethod
    def from_geometry(cls, alpha, geom):
        # type: (float, ReceiverGeometry) -> LowerBoundParams
        return cls(alpha, geom.center_distance_star, geom.volume)

    @classmethod
    def from_system(cls, params, refs):
        # type: (SystemParams, ReferenceSet) -> LowerBoundParams
        alpha = refs.length ** 2 * params.rates.k1 * refs.c_etot / params.diffusion(Tag.A)
        return cls.from_geometry(alpha, receiver_geometry(params, refs))


def enzyme_lower_bound_count(p, t_star):
    # type: (LowerBoundParams, ArrayLike) -> Union[float, np.ndarray]
    """The lower bound on the expected count with active enzymes:
    V* (4 pi t*)^(-3/2) exp(-alpha t* - dist*^2 / (4 t*)).
    """
    t, scalar = _times(t_star)
    values = (p.V_star * (4 * np.pi * t) ** -1.5
              * np.exp(-p.alpha * t - p.dist_star ** 2 / (4 * t)))
    return _result(values, scalar)


def no_enzyme_count(p, t_star):
    # type: (LowerBoundParams, ArrayLike) -> Union[float, np.ndarray]
    """The lower-bound expression with C_Etot = 0 (alpha = 0)."""
    return enzyme_lower_bound_count(LowerBoundParams(0.0, p.dist_star, p.V_star), t_star)


@dataclass(frozen=True)
class Peak:
    t_max: float  # s
    count: float  # molecules


def lower_bound_peak(p, params, refs):
    # type: (LowerBoundParams, SystemParams, ReferenceSet) -> Peak
    """Locate the maximum of the dimensional lower bound
    N_A V_obs (4 pi D_A t)^(-3/2) exp(-a t - b / t), a = k1 C_Etot,
    b = |r_0|^2 / (4 D_A). Setting the log-derivative to zero gives
    a t^2 + (3/2) t - b = 0, whose positive root is taken in the rationalized
    form 2b / (3/2 + sqrt(9/4 + 4ab)), which also covers a = 0 (t = 2b/3).
    """
    d_a = params.diffusion(Tag.A)
    length = refs.length
    a = p.alpha * d_a / length ** 2
    b = (p.dist_star * length) ** 2 / (4 * d_a)
    t_max = 2 * b / (1.5 + math.sqrt(2.25 + 4 * a * b))

    t_star = physchem.nondim(physchem.Quantity.TIME, Tag.A, t_max, refs, params)
    count_star = enzyme_lower_bound_count(p, t_star)
    count = physchem.redim(physchem.Quantity.COUNT, None, count_star, refs, params)
    return Peak(t_max, count)
