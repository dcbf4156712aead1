"""Ba+ level structure, physical constants, and laser-coupling conversions.

Everything downstream (Bloch equations, cooling rates, sideband geometry)
draws its atomic numbers from here: the eight Zeeman sublevels of
S1/2, P1/2, D3/2, their Lande factors and decay channels, dipole coupling
amplitudes, and the intensity -> Rabi frequency conversion.

Angular frequencies (rad/s) are used for all internal rates and detunings;
wavelengths and magnetic fields are SI.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import atomic_mass, c, h, hbar, physical_constants

from .errors import ConfigurationError, DomainError

BOHR_MAGNETON = physical_constants["Bohr magneton"][0]

TERMS = ("S1/2", "P1/2", "D3/2")
J_OF_TERM = {"S1/2": 0.5, "P1/2": 0.5, "D3/2": 1.5}

# Nonrelativistic Lande factors for L=0,1,2 with S=1/2.
LANDE_G_DEFAULT = {"S1/2": 2.0, "P1/2": 2.0 / 3.0, "D3/2": 4.0 / 5.0}

GAMMA_SP_DEFAULT = 2 * math.pi * 15.1e6  # rad/s, P1/2 -> S1/2
GAMMA_PD_DEFAULT = 2 * math.pi * 5.3e6  # rad/s, P1/2 -> D3/2, configurable
WAVELENGTH_SP = 493.4e-9  # m
WAVELENGTH_PD = 649.7e-9  # m
ION_MASS_DEFAULT = 137.9 * atomic_mass  # kg, 138Ba+


def _unit(vec, name: str) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    if v.shape != (3,):
        raise DomainError(f"{name} must be a 3-vector, got shape {v.shape}")
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n < 1e-12:
        raise DomainError(f"{name} must be a nonzero vector")
    return v / n


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants plus the ion mass used for all derived quantities."""

    planck_reduced: float = hbar  # J s
    bohr_magneton: float = BOHR_MAGNETON  # J/T
    speed_of_light: float = c  # m/s
    atomic_mass_unit: float = atomic_mass  # kg
    ion_mass: float = ION_MASS_DEFAULT  # kg

    def __post_init__(self):
        for name in (
            "planck_reduced",
            "bohr_magneton",
            "speed_of_light",
            "atomic_mass_unit",
            "ion_mass",
        ):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")


@dataclass(frozen=True, order=True)
class State:
    """One Zeeman sublevel, identified by its term and magnetic quantum number."""

    term: str
    m: float

    def __post_init__(self):
        if self.term not in J_OF_TERM:
            raise DomainError(f"unknown term {self.term!r}; expected one of {TERMS}")
        j = J_OF_TERM[self.term]
        if abs(self.m) > j + 1e-12 or abs((self.m - j) % 1.0) > 1e-12:
            raise DomainError(f"m={self.m} is not a valid projection for {self.term}")

    @property
    def j(self) -> float:
        return J_OF_TERM[self.term]


@dataclass(frozen=True)
class Transition:
    """A dipole-allowed term pair with its wavelength and partial decay rate."""

    lower_term: str
    upper_term: str
    wavelength: float  # m
    gamma: float  # rad/s, partial decay rate of the upper term into lower_term


@dataclass(frozen=True)
class LaserField:
    """One linearly polarized exciting beam.

    detuning is the angular offset of the laser from the Zeeman-free
    transition frequency; intensity is the value at the ion in W/m^2.
    """

    wavelength: float
    detuning: float  # rad/s
    intensity: float  # W/m^2
    polarization: np.ndarray
    k_direction: np.ndarray

    def __post_init__(self):
        if self.wavelength <= 0:
            raise DomainError("wavelength must be positive")
        if self.intensity < 0:
            raise DomainError("intensity must be >= 0")
        pol = _unit(self.polarization, "polarization")
        kdir = _unit(self.k_direction, "k_direction")
        if abs(np.dot(pol, kdir)) > 1e-8:
            raise DomainError("polarization must be orthogonal to k_direction")
        object.__setattr__(self, "polarization", pol)
        object.__setattr__(self, "k_direction", kdir)

    @property
    def k(self) -> float:
        """Wavenumber 2*pi/lambda in 1/m."""
        return 2 * math.pi / self.wavelength

    @property
    def k_vector(self) -> np.ndarray:
        return self.k * self.k_direction


# Fixed basis order used by the Bloch module: S(-1/2), S(+1/2), P(-1/2),
# P(+1/2), D(-3/2), D(-1/2), D(+1/2), D(+3/2).
STATE_ORDER: tuple[State, ...] = (
    State("S1/2", -0.5),
    State("S1/2", +0.5),
    State("P1/2", -0.5),
    State("P1/2", +0.5),
    State("D3/2", -1.5),
    State("D3/2", -0.5),
    State("D3/2", +0.5),
    State("D3/2", +1.5),
)


@dataclass(frozen=True)
class LevelScheme:
    """The eight working sublevels of Ba+ with decay rates and g-factors."""

    gamma_sp: float = GAMMA_SP_DEFAULT
    gamma_pd: float = GAMMA_PD_DEFAULT
    wavelength_sp: float = WAVELENGTH_SP
    wavelength_pd: float = WAVELENGTH_PD
    lande_g: dict = field(default_factory=lambda: dict(LANDE_G_DEFAULT))

    def __post_init__(self):
        if self.gamma_sp <= 0 or self.gamma_pd <= 0:
            raise DomainError("partial decay rates must be positive")
        if self.wavelength_sp <= 0 or self.wavelength_pd <= 0:
            raise DomainError("wavelengths must be positive")
        missing = [t for t in TERMS if t not in self.lande_g]
        if missing:
            raise ConfigurationError(f"lande_g missing terms: {missing}")

    @property
    def states(self) -> tuple[State, ...]:
        return STATE_ORDER

    def index(self, state: State) -> int:
        return STATE_ORDER.index(state)

    @property
    def total_p_decay(self) -> float:
        """Total P1/2 decay rate entering the Liouvillian, rad/s."""
        return self.gamma_sp + self.gamma_pd

    @property
    def sp_transition(self) -> Transition:
        return Transition("S1/2", "P1/2", self.wavelength_sp, self.gamma_sp)

    @property
    def pd_transition(self) -> Transition:
        return Transition("D3/2", "P1/2", self.wavelength_pd, self.gamma_pd)

    def transition_for(self, wavelength: float, rtol: float = 5e-3) -> Transition:
        """Match a laser wavelength to one of the two transitions."""
        for tr in (self.sp_transition, self.pd_transition):
            if abs(wavelength - tr.wavelength) <= rtol * tr.wavelength:
                return tr
        raise DomainError(
            f"wavelength {wavelength * 1e9:.2f} nm matches neither the "
            f"{self.wavelength_sp * 1e9:.1f} nm nor the "
            f"{self.wavelength_pd * 1e9:.1f} nm transition"
        )

    def to_dict(self) -> dict:
        return {
            "gamma_sp": self.gamma_sp,
            "gamma_pd": self.gamma_pd,
            "wavelength_sp": self.wavelength_sp,
            "wavelength_pd": self.wavelength_pd,
            "lande_g": dict(self.lande_g),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LevelScheme":
        known = {"gamma_sp", "gamma_pd", "wavelength_sp", "wavelength_pd", "lande_g"}
        bad = set(data) - known
        if bad:
            raise ConfigurationError(f"unknown LevelScheme keys: {sorted(bad)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LevelScheme":
        return cls.from_dict(json.loads(text))

    def with_rates(self, gamma_sp=None, gamma_pd=None) -> "LevelScheme":
        kwargs = {}
        if gamma_sp is not None:
            kwargs["gamma_sp"] = gamma_sp
        if gamma_pd is not None:
            kwargs["gamma_pd"] = gamma_pd
        return replace(self, **kwargs)


def zeeman_shift(
    term: str,
    m: float,
    b_field: float,
    scheme: LevelScheme | None = None,
    constants: PhysicalConstants | None = None,
) -> float:
    """Linear Zeeman shift g(term)*m*mu_B*B/hbar in rad/s, signed.

    The shift is odd in m and linear in B; negative B is accepted (used by
    field-reversal symmetry checks).
    """
    scheme = scheme or LevelScheme()
    constants = constants or PhysicalConstants()
    State(term, m)  # validates term and m
    g = scheme.lande_g[term]
    return g * m * constants.bohr_magneton * b_field / constants.planck_reduced


def _wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3-j symbol by the Racah sum; arguments in half-integer steps."""
    if abs(m1 + m2 + m3) > 1e-12:
        return 0.0
    if not (abs(j1 - j2) <= j3 <= j1 + j2):
        return 0.0

    def f(x):
        xi = round(x)
        if abs(x - xi) > 1e-9 or xi < 0:
            raise DomainError("triangle/projection conditions violated")
        return math.factorial(xi)

    pref = math.sqrt(
        f(j1 + j2 - j3) * f(j1 - j2 + j3) * f(-j1 + j2 + j3) / f(j1 + j2 + j3 + 1)
    )
    pref *= math.sqrt(
        f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j3 + m3) * f(j3 - m3)
    )
    total = 0.0
    t_min = max(0, round(j2 - j3 - m1), round(j1 - j3 + m2))
    t_max = min(round(j1 + j2 - j3), round(j1 - m1), round(j2 + m2))
    for t in range(t_min, t_max + 1):
        den = (
            f(t)
            * f(j3 - j2 + m1 + t)
            * f(j3 - j1 - m2 + t)
            * f(j1 + j2 - j3 - t)
            * f(j1 - m1 - t)
            * f(j2 + m2 - t)
        )
        total += (-1.0) ** t / den
    phase = (-1.0) ** round(j1 - j2 - m3)
    return phase * pref * total


def clebsch_gordan(j1, m1, j2, m2, j3, m3) -> float:
    """<j1 m1; j2 m2 | j3 m3>."""
    phase = (-1.0) ** round(-j1 + j2 - m3)
    return phase * math.sqrt(2 * j3 + 1) * _wigner_3j(j1, j2, j3, m1, m2, -m3)


_DIPOLE_PAIRS = {("S1/2", "P1/2"), ("D3/2", "P1/2")}


def coupling_coefficient(lower: State, upper: State, q: int) -> float:
    """Relative dipole amplitude <J_l m_l; 1 q | J_u m_u> for one Zeeman pair.

    Normalized so that for each upper state the squares summed over q and
    lower states equal 1. Zero unless m_upper - m_lower = q.
    """
    if q not in (-1, 0, 1):
        raise DomainError(f"q must be -1, 0, or +1, got {q}")
    if (lower.term, upper.term) not in _DIPOLE_PAIRS:
        raise DomainError(
            f"states {lower.term} and {upper.term} are not dipole-connected"
        )
    if abs(upper.m - lower.m - q) > 1e-12:
        return 0.0
    return clebsch_gordan(lower.j, lower.m, 1, q, upper.j, upper.m)


def saturation_intensity(transition: Transition) -> float:
    """I_sat = pi*h*c*Gamma_t/(3*lambda^3) in W/m^2, Gamma_t in rad/s."""
    return math.pi * h * c * transition.gamma / (3 * transition.wavelength**3)


def rabi_frequency(laser: LaserField, transition: Transition) -> float:
    """Rabi frequency Omega = Gamma_t*sqrt(I/(2*I_sat)) in rad/s.

    The laser wavelength must match the transition; the coupling entering
    the Hamiltonian is Omega/2 times the Zeeman-pair amplitude.
    """
    if abs(laser.wavelength - transition.wavelength) > 5e-3 * transition.wavelength:
        raise DomainError(
            f"laser at {laser.wavelength * 1e9:.2f} nm does not drive the "
            f"{transition.wavelength * 1e9:.1f} nm transition"
        )
    return transition.gamma * math.sqrt(
        laser.intensity / (2 * saturation_intensity(transition))
    )


def recoil_frequency(mass: float, wavelength: float) -> float:
    """Photon recoil hbar*k^2/(2M) in rad/s."""
    if mass <= 0 or wavelength <= 0:
        raise DomainError("mass and wavelength must be positive")
    k = 2 * math.pi / wavelength
    return hbar * k**2 / (2 * mass)


def default_laser_493(
    detuning: float = -2 * math.pi * 19e6,
    intensity: float = 1890.0,
    k_direction=(1.0, 0.0, 0.0),
    polarization=(0.0, 1.0, 0.0),
    scheme: LevelScheme | None = None,
) -> LaserField:
    """493 nm cooling beam at the published operating point (189 mW/cm^2)."""
    scheme = scheme or LevelScheme()
    return LaserField(scheme.wavelength_sp, detuning, intensity, polarization, k_direction)


def default_laser_650(
    detuning: float = +2 * math.pi * 5e6,
    intensity: float = 1070.0,
    k_direction=(1.0, 0.0, 0.0),
    polarization=(0.0, 1.0, 0.0),
    scheme: LevelScheme | None = None,
) -> LaserField:
    """650 nm repumper at the published operating point (107 mW/cm^2)."""
    scheme = scheme or LevelScheme()
    return LaserField(scheme.wavelength_pd, detuning, intensity, polarization, k_direction)
