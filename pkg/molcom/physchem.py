"""Dimensional bookkeeping for the enzyme-assisted diffusive channel:
Stokes-Einstein diffusion coefficients, reference sets, conversion to and
from dimensionless form, the dimensionless constants of the
reaction-diffusion system, and the dimensional-homology predicate.

All quantities are SI (m, s, K, kg) unless a name says otherwise. Every type
here is a frozen value, safe to hand to worker processes.
"""

import enum
import math
from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional, Tuple

from scipy import constants

#: J/K
BOLTZMANN = constants.k
#: 1/mol
AVOGADRO = constants.N_A


class DomainError(ValueError):
    """A physical or dimensionless quantity outside its valid domain."""
    pass


class Tag(enum.Enum):
    """The three mobile species of the Michaelis-Menten mechanism."""
    A = 'A'
    E = 'E'
    EA = 'EA'


class Quantity(enum.Enum):
    """Quantities that nondim() and redim() convert."""
    CONCENTRATION = 'concentration'
    TIME = 'time'
    COORDINATE = 'coordinate'
    COUNT = 'count'


def _require_positive(name, value):
    # type: (str, float) -> None
    if not value > 0:  # also rejects NaN
        raise DomainError('{} must be > 0, got {!r}'.format(name, value))


def _require_nonnegative(name, value):
    # type: (str, float) -> None
    if not value >= 0:
        raise DomainError('{} must be >= 0, got {!r}'.format(name, value))


@dataclass(frozen=True)
class Medium:
    """The fluid the molecules diffuse in."""
    temperature: float  # K
    viscosity: float  # kg m^-1 s^-1

    def __post_init__(self):
        _require_positive('temperature', self.temperature)
        _require_positive('viscosity', self.viscosity)


def stokes_einstein(medium: Medium, radius: float) -> float:
    """Return the diffusion coefficient (m^2/s) of a sphere of `radius` (m)
    in `medium`: k_B T / (6 pi eta R).
    """
    _require_positive('radius', radius)
    return BOLTZMANN * medium.temperature / (6 * math.pi * medium.viscosity * radius)


@dataclass(frozen=True)
class Species:
    tag: Tag
    radius: float  # m
    diffusion_coeff: float  # m^2/s

    def __post_init__(self):
        _require_positive('radius of {}'.format(self.tag.value), self.radius)
        _require_positive(
            'diffusion coefficient of {}'.format(self.tag.value), self.diffusion_coeff)

    @classmethod
    def in_medium(cls, tag, radius, medium, diffusion_coeff=None):
        # type: (Tag, float, Medium, Optional[float]) -> Species
        """Make a Species whose diffusion coefficient comes from Stokes-Einstein
        unless `diffusion_coeff` overrides it.
        """
        if diffusion_coeff is None:
            diffusion_coeff = stokes_einstein(medium, radius)
        return cls(tag, radius, diffusion_coeff)


@dataclass(frozen=True)
class ReactionRates:
    k1: float  # molecule^-1 m^3 s^-1, E + A -> EA
    k_minus1: float  # s^-1, EA -> E + A
    k2: float  # s^-1, EA -> E + A_P

    def __post_init__(self):
        _require_nonnegative('k1', self.k1)
        _require_nonnegative('k_minus1', self.k_minus1)
        _require_nonnegative('k2', self.k2)

    @property
    def k_release(self) -> float:
        """The total EA decay rate k_-1 + k_2."""
        return self.k_minus1 + self.k2


@dataclass(frozen=True)
class Receiver:
    """A passive receiver volume in dimensional coordinates: a sphere of
    `radius` or an axis-aligned box with edge lengths `sides`, centered at
    `center` relative to the transmitter.
    """
    center: Tuple[float, float, float]  # m
    radius: Optional[float] = None  # m, sphere
    sides: Optional[Tuple[float, float, float]] = None  # m, box

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise DomainError('the receiver center needs 3 coordinates')
        if (self.radius is None) == (self.sides is None):
            raise DomainError('a receiver needs exactly one of radius or sides')
        if self.radius is not None:
            _require_positive('receiver radius', self.radius)
        else:
            object.__setattr__(self, 'sides', tuple(float(s) for s in self.sides))
            if len(self.sides) != 3:
                raise DomainError('a box receiver needs 3 side lengths')
            for side in self.sides:
                _require_positive('receiver side', side)

    @property
    def is_sphere(self) -> bool:
        return self.radius is not None

    @property
    def distance(self) -> float:
        """|r_0|, the transmitter to receiver-center distance."""
        return math.sqrt(sum(c * c for c in self.center))

    @property
    def volume(self) -> float:
        if self.is_sphere:
            return 4.0 / 3.0 * math.pi * self.radius ** 3
        return self.sides[0] * self.sides[1] * self.sides[2]

    @property
    def half_extents(self) -> Tuple[float, float, float]:
        if self.is_sphere:
            return (self.radius,) * 3
        return tuple(side / 2 for side in self.sides)

    def fits_inside_cube(self, side):
        # type: (float) -> bool
        """True if the receiver lies strictly inside the origin-centered cube
        of edge `side`.
        """
        half = side / 2
        return all(abs(c) + h < half for c, h in zip(self.center, self.half_extents))


@dataclass(frozen=True)
class SystemParams:
    """The dimensional description of one physical system."""
    medium: Medium
    species: Mapping[Tag, Species]
    rates: ReactionRates
    n_a: int
    n_e: int
    enz_box_side: float  # m, edge of the enzyme cube V_enz centered on the transmitter
    receiver: Receiver

    def __post_init__(self):
        missing = [tag.value for tag in Tag if tag not in self.species]
        if missing:
            raise DomainError('missing species: {}'.format(', '.join(missing)))
        if self.n_a < 1:
            raise DomainError('N_A must be >= 1, got {}'.format(self.n_a))
        if self.n_e < 0:
            raise DomainError('N_E must be >= 0, got {}'.format(self.n_e))
        _require_positive('enzyme box side', self.enz_box_side)
        _require_positive('transmitter to receiver distance', self.tx_to_rx_distance)
        if not self.receiver.fits_inside_cube(self.enz_box_side):
            raise DomainError(
                'the receiver must lie strictly inside the {:g} m enzyme box'.format(
                    self.enz_box_side))

    @property
    def tx_to_rx_distance(self) -> float:
        return self.receiver.distance

    @property
    def enz_volume(self) -> float:
        return self.enz_box_side ** 3

    def diffusion(self, tag):
        # type: (Tag) -> float
        return self.species[tag].diffusion_coeff


@dataclass(frozen=True)
class ReferenceSet:
    """The reference distance, concentrations and molecule count used to
    nondimensionalize a system.
    """
    length: float  # L, m
    c0: float  # reference A concentration, molecule m^-3
    c_etot: float  # total enzyme concentration N_E / V_enz, molecule m^-3
    n_ref: float  # molecules in one dimensionless molecule (= N_A)

    def __post_init__(self):
        _require_positive('reference length L', self.length)
        _require_positive('reference concentration C0', self.c0)
        _require_nonnegative('total enzyme concentration', self.c_etot)
        _require_positive('reference molecule count', self.n_ref)


def reference_set(params, length=None, c0=None):
    # type: (SystemParams, Optional[float], Optional[float]) -> ReferenceSet
    """Build the reference set for `params`: L defaults to |r_0|, C0 to N_A
    molecules per cubic meter, C_Etot is N_E / V_enz and N_ref is N_A.
    """
    return ReferenceSet(
        length=params.tx_to_rx_distance if length is None else length,
        c0=float(params.n_a) if c0 is None else c0,
        c_etot=params.n_e / params.enz_volume,
        n_ref=float(params.n_a))


def _scale(quantity, tag, refs, params):
    # type: (Quantity, Optional[Tag], ReferenceSet, SystemParams) -> float
    """Return the dimensional value of one dimensionless unit."""
    if quantity is Quantity.COORDINATE:
        return refs.length
    if quantity is Quantity.COUNT:
        return refs.n_ref
    if tag is None:
        raise DomainError('{} scaling needs a species tag'.format(quantity.value))
    if quantity is Quantity.TIME:
        return refs.length ** 2 / params.diffusion(tag)

    # Concentration
    if tag is Tag.A:
        return refs.c0
    if refs.c_etot <= 0:
        raise DomainError(
            'the {} reference concentration is undefined without enzymes'.format(tag.value))
    if tag is Tag.E:
        return refs.c_etot
    k_release = params.rates.k_release
    if k_release <= 0 or params.rates.k1 <= 0:
        raise DomainError(
            'the EA reference concentration needs k1 > 0 and k_-1 + k_2 > 0')
    return params.rates.k1 * refs.c_etot * refs.c0 / k_release


def nondim(quantity, tag, value, refs, params):
    # type: (Quantity, Optional[Tag], float, ReferenceSet, SystemParams) -> float
    """Convert a dimensional `value` to dimensionless form: concentrations by
    the species reference concentration, times by L^2 / D_S, coordinates by L,
    and molecule counts by N_ref.
    """
    return value / _scale(Quantity(quantity), tag, refs, params)


def redim(quantity, tag, value, refs, params):
    # type: (Quantity, Optional[Tag], float, ReferenceSet, SystemParams) -> float
    """The inverse of nondim()."""
    return value * _scale(Quantity(quantity), tag, refs, params)


@dataclass(frozen=True)
class DimensionlessConstants:
    gamma_1a: float
    gamma_2a: float
    gamma_e: float
    gamma_ea: float
    gamma_1a_bound: float

    NAMES = ('gamma_1a', 'gamma_2a', 'gamma_e', 'gamma_ea', 'gamma_1a_bound')

    def __post_init__(self):
        for name in self.NAMES:
            _require_nonnegative(name, getattr(self, name))
        if self.gamma_2a > 1:
            raise DomainError('gamma_2a must be <= 1, got {!r}'.format(self.gamma_2a))
        if self.gamma_1a_bound != self.gamma_1a:
            raise DomainError('gamma_1a_bound must equal gamma_1a')

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in self.NAMES}


def dimensionless_constants(params, refs):
    # type: (SystemParams, ReferenceSet) -> DimensionlessConstants
    rates = params.rates
    if rates.k_release <= 0:
        raise DomainError('gamma_2a is undefined when k_-1 + k_2 = 0')

    length2 = refs.length ** 2
    gamma_1a = length2 * rates.k1 * refs.c_etot / params.diffusion(Tag.A)
    return DimensionlessConstants(
        gamma_1a=gamma_1a,
        gamma_2a=rates.k_minus1 / rates.k_release,
        gamma_e=length2 * rates.k1 * refs.c0 / params.diffusion(Tag.E),
        gamma_ea=length2 * rates.k_release / params.diffusion(Tag.EA),
        gamma_1a_bound=gamma_1a)


def _constants_close(x, y, rel_tol):
    # type: (float, float, float) -> bool
    abs_tol = 0.0 if (x and y) else rel_tol
    return math.isclose(x, y, rel_tol=rel_tol, abs_tol=abs_tol)


def is_homologous(a, b, rel_tol=1e-9):
    # type: (DimensionlessConstants, DimensionlessConstants, float) -> bool
    """True iff every dimensionless constant matches within rel_tol (compared
    absolutely when either one is 0).
    """
    _require_positive('rel_tol', rel_tol)
    return all(
        _constants_close(getattr(a, name), getattr(b, name), rel_tol)
        for name in DimensionlessConstants.NAMES)


def relative_differences(a, b):
    # type: (DimensionlessConstants, DimensionlessConstants) -> Dict[str, float]
    """Per-constant |a - b| / max(|a|, |b|), or 0 when both are 0."""
    diffs = {}
    for name in DimensionlessConstants.NAMES:
        x, y = getattr(a, name), getattr(b, name)
        scale = max(abs(x), abs(y))
        diffs[name] = abs(x - y) / scale if scale else 0.0
    return diffs


def scale_for_homology(params, factor):
    # type: (SystemParams, float) -> SystemParams
    """Return a dimensionally homologous copy of `params` with N_A and N_E
    multiplied by `factor` and k1 divided by it; geometry is unchanged. (With
    C0 proportional to N_A, every dimensionless constant is preserved.)
    """
    _require_positive('homology scale factor', factor)
    counts = []
    for count in (params.n_a, params.n_e):
        scaled = count * factor
        if abs(scaled - round(scaled)) > 1e-9 * max(1.0, scaled):
            raise DomainError(
                'scaling {} molecules by {!r} is not a whole count'.format(count, factor))
        counts.append(int(round(scaled)))
    rates = replace(params.rates, k1=params.rates.k1 / factor)
    return replace(params, n_a=counts[0], n_e=counts[1], rates=rates)


def accuracy_loss(params, refs):
    # type: (SystemParams, ReferenceSet) -> float
    """The dimensionless size of the term the bounding system drops from the
    A equation, evaluated with C_EA at its Michaelis-Menten reference value
    and C*_A = 1: gamma_1a (k_-1 + k1 C0) / (k_-1 + k_2). Homologous systems
    share it; it grows with k1, k_-1 and C_Etot and shrinks with k2.
    """
    rates = params.rates
    if rates.k_release <= 0:
        raise DomainError('the accuracy loss is undefined when k_-1 + k_2 = 0')
    gamma_1a = refs.length ** 2 * rates.k1 * refs.c_etot / params.diffusion(Tag.A)
    return gamma_1a * (rates.k_minus1 + rates.k1 * refs.c0) / rates.k_release


def molar_concentration(c_per_m3):
    # type: (float) -> float
    """Convert molecule m^-3 to mol/L."""
    return c_per_m3 / AVOGADRO / 1000.0

