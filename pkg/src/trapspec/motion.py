"""Classical motion of the trapped ion and the light-induced friction.

Covers the forced micromotion at the trap drive frequency, the three secular
(macromotion) modes, the radiation-pressure force and its linearization into
the cooling coefficient alpha, the driven damped-oscillator response, and
the modulation indices that set sideband strengths in the heterodyne
spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .atom import PhysicalConstants, _unit
from .bloch import ExperimentGeometry, SteadyStateModel
from .errors import ConfigurationError, DomainError, UndampedOscillatorError

F_PAUL_DEFAULT = 18.53e6  # Hz
SECULAR_FREQUENCIES_DEFAULT = (620.5e3, 670e3, 1301e3)  # Hz


@dataclass(frozen=True)
class SecularMode:
    frequency_hz: float
    axis: np.ndarray

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise DomainError("mode frequency must be positive")
        object.__setattr__(self, "axis", _unit(self.axis, "mode axis"))

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.frequency_hz


def _paper_modes() -> tuple[SecularMode, ...]:
    # The driven 620.5 kHz mode lies along the detection-minus-laser
    # direction (the diagonal at 45 degrees to both beams); only that
    # orientation has full overlap with k_d - k_l and can show m_max = 1.5.
    sq = 1 / math.sqrt(2)
    axes = ((-sq, 0.0, sq), (sq, 0.0, sq), (0.0, 1.0, 0.0))
    return tuple(
        SecularMode(f, a) for f, a in zip(SECULAR_FREQUENCIES_DEFAULT, axes)
    )


@dataclass(frozen=True)
class TrapConfig:
    """Trap drive frequency, secular modes, and equilibrium micromotion."""

    f_paul_hz: float = F_PAUL_DEFAULT
    modes: tuple[SecularMode, ...] = field(default_factory=_paper_modes)
    micromotion_amplitude: np.ndarray = (-26e-9 / math.sqrt(2), 0.0, 26e-9 / math.sqrt(2))

    def __post_init__(self):
        if self.f_paul_hz <= 0:
            raise DomainError("f_paul_hz must be positive")
        if len(self.modes) != 3:
            raise ConfigurationError("exactly three secular modes are required")
        for i in range(3):
            for j in range(i + 1, 3):
                dot = abs(np.dot(self.modes[i].axis, self.modes[j].axis))
                if dot > 1e-9:
                    raise ConfigurationError(
                        f"mode axes {i} and {j} not orthogonal (|dot| = {dot:.2e})"
                    )
        object.__setattr__(
            self,
            "micromotion_amplitude",
            np.asarray(self.micromotion_amplitude, dtype=float),
        )


def _default_drive_force(
    m_max: float = 1.5,
    linewidth_hz: float = 750.0,
    f_macro: float = SECULAR_FREQUENCIES_DEFAULT[0],
    wavelength: float = 493.4e-9,
    mass: float | None = None,
) -> float:
    """Force that reproduces the published m_max at the fitted linewidth.

    The drive-power-to-force calibration is not derivable from first
    principles here, so the default is anchored to the observed response.
    """
    mass = mass or PhysicalConstants().ion_mass
    k = 2 * math.pi / wavelength
    amplitude = m_max / (math.sqrt(2) * k)
    alpha = 2 * math.pi * linewidth_hz
    omega0 = 2 * math.pi * f_macro
    return amplitude * mass * alpha * omega0


DRIVE_FORCE_DEFAULT = _default_drive_force()


@dataclass(frozen=True)
class DriveConfig:
    """External excitation applied near one secular resonance."""

    f_drive_hz: float
    force_amplitude: float = DRIVE_FORCE_DEFAULT  # N
    target_mode: int = 0

    def __post_init__(self):
        if self.f_drive_hz <= 0:
            raise DomainError("f_drive_hz must be positive")
        if self.force_amplitude < 0:
            raise DomainError("force_amplitude must be >= 0")


@dataclass(frozen=True)
class CoolingResult:
    """Friction coefficient alpha and the Bloch derivative behind it."""

    alpha: float  # rad/s
    dpddelta: float  # 1/(rad/s)
    dpddelta_error: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def linewidth_hz(self) -> float:
        return self.alpha / (2 * math.pi)

    def to_json_dict(self) -> dict:
        return {
            "alpha_rad_s": self.alpha,
            "alpha_hz": self.linewidth_hz,
            "linewidth_hz": self.linewidth_hz,
            "dp_ddelta_per_rad_s": self.dpddelta,
            "dp_ddelta_error": self.dpddelta_error,
            "parameters": dict(self.params),
        }


def radiation_pressure_force(
    v: float,
    model: SteadyStateModel,
    constants: PhysicalConstants | None = None,
) -> float:
    """Scattering force hbar*k*Gamma*P_P(Delta - k*v) of the cooling beam, N.

    v is the velocity component along the 493 nm beam; the Doppler shift
    moves the effective detuning by -k*v.
    """
    constants = constants or model.constants
    k = 2 * math.pi / model.laser_493.wavelength
    gamma = model.scheme.gamma_sp
    delta = model.laser_493.detuning - k * v
    p_p = model.p_population(delta_493=delta)
    return constants.planck_reduced * k * gamma * p_p


def cooling_coefficient(
    model: SteadyStateModel,
    step: float | None = None,
    constants: PhysicalConstants | None = None,
) -> CoolingResult:
    """Friction coefficient alpha = 2*(hbar k^2/2M)*Gamma*dP_P/dDelta.

    All quantities refer to the 493 nm transition; positive alpha damps the
    motion (red detuning on a positive P_P slope).
    """
    constants = constants or model.constants
    kwargs = {} if step is None else {"step": step}
    deriv = model.p_derivative(axis="493", **kwargs)
    k = 2 * math.pi / model.laser_493.wavelength
    prefactor = constants.planck_reduced * k**2 / constants.ion_mass
    alpha = prefactor * model.scheme.gamma_sp * deriv.value
    return CoolingResult(
        alpha=alpha,
        dpddelta=deriv.value,
        dpddelta_error=deriv.error,
        params=model.config_echo(),
    )


def micromotion_mod_index(a, k_laser, k_detect) -> float:
    """Modulation index m = a . (k_d - k_l); sign retained.

    a is the oscillation amplitude vector in meters, the k's are full wave
    vectors in 1/m.
    """
    a = np.asarray(a, dtype=float)
    diff = np.asarray(k_detect, dtype=float) - np.asarray(k_laser, dtype=float)
    return float(np.dot(a, diff))


def detection_wave_vectors(
    geometry: ExperimentGeometry | None = None, wavelength: float = 493.4e-9
) -> tuple[np.ndarray, np.ndarray]:
    """(k_laser, k_detect) vectors for the fluorescence geometry, 1/m."""
    geometry = geometry or ExperimentGeometry()
    k = 2 * math.pi / wavelength
    return k * geometry.laser_k, k * geometry.detection_k


@dataclass(frozen=True)
class DrivenResponse:
    amplitude: float  # m
    mod_index: float


def driven_amplitude(
    f_drive_hz: float, alpha: float, mode: SecularMode, force_amplitude: float, mass: float
) -> float:
    """Steady-state amplitude of x'' + alpha x' + w0^2 x = (F0/M) cos(wt)."""
    if alpha <= 0:
        raise UndampedOscillatorError("driven response requires alpha > 0")
    w = 2 * math.pi * f_drive_hz
    w0 = mode.omega
    return (force_amplitude / mass) / math.sqrt((w0**2 - w**2) ** 2 + (alpha * w) ** 2)


def driven_response(
    drive: DriveConfig,
    alpha: float,
    mode: SecularMode,
    mass: float | None = None,
    geometry: ExperimentGeometry | None = None,
    wavelength: float = 493.4e-9,
) -> DrivenResponse:
    """Amplitude and modulation index of the externally driven secular mode."""
    mass = mass or PhysicalConstants().ion_mass
    amp = driven_amplitude(drive.f_drive_hz, alpha, mode, drive.force_amplitude, mass)
    k_l, k_d = detection_wave_vectors(geometry, wavelength)
    return DrivenResponse(amp, micromotion_mod_index(amp * mode.axis, k_l, k_d))


def lorentzian_mod_index(
    f_drive: float, m_max: float, f_macro: float, delta_f: float
) -> float:
    """Empirical drive-scan model m(f) = m_max / (1 + ((f - f0)/(df/2))^2)."""
    if delta_f <= 0:
        raise DomainError("delta_f must be positive")
    x = (f_drive - f_macro) / (delta_f / 2)
    return m_max / (1 + x * x)


def energy_response_fwhm(
    alpha: float,
    mode: SecularMode,
    force_amplitude: float = DRIVE_FORCE_DEFAULT,
    mass: float | None = None,
) -> float:
    """Full width at half maximum of the driven energy response A^2(f), Hz.

    For alpha << w0 this equals alpha/2pi, i.e. the cooling-induced
    linewidth of the mode.
    """
    mass = mass or PhysicalConstants().ion_mass

    def a2(f):
        return driven_amplitude(f, alpha, mode, force_amplitude, mass) ** 2

    f0 = mode.frequency_hz
    # Amplitude peak sits at w^2 = w0^2 - alpha^2/2.
    w_pk2 = mode.omega**2 - alpha**2 / 2
    f_pk = math.sqrt(w_pk2) / (2 * math.pi) if w_pk2 > 0 else f0
    half = a2(f_pk) / 2
    width = 20 * alpha / (2 * math.pi)
    lo = brentq(lambda f: a2(f) - half, max(f_pk - width, f_pk * 0.2), f_pk, xtol=1e-9)
    hi = brentq(lambda f: a2(f) - half, f_pk, f_pk + width, xtol=1e-9)
    return hi - lo


class RadiationPressureForce:
    """Spline of the Bloch-model force F(v), for trajectory integration.

    The steady-state P_P(Delta - k v) is sampled once on a velocity grid and
    interpolated; over the Lamb-Dicke velocities used here the spline error
    is far below the solver tolerances.
    """

    def __init__(self, model: SteadyStateModel, v_max: float = 0.5, n_points: int = 201):
        self.model = model
        self.k = 2 * math.pi / model.laser_493.wavelength
        self.gamma = model.scheme.gamma_sp
        self.hbar = model.constants.planck_reduced
        delta0 = model.laser_493.detuning
        v_grid = np.linspace(-v_max, v_max, n_points)
        p_grid = np.array(
            [model.p_population(delta_493=delta0 - self.k * v) for v in v_grid]
        )
        self._spline = CubicSpline(v_grid, p_grid)
        self.v_max = v_max
        self.static = float(self.hbar * self.k * self.gamma * self._spline(0.0))

    def __call__(self, v: float) -> float:
        if abs(v) > self.v_max:
            raise DomainError(f"velocity {v} outside sampled range +-{self.v_max}")
        return float(self.hbar * self.k * self.gamma * self._spline(v))

    def net(self, v: float) -> float:
        """F(v) minus its static (v = 0) part."""
        return self(v) - self.static


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray

    def energy(self, mass: float, omega0: float) -> np.ndarray:
        return 0.5 * mass * (self.v**2 + (omega0 * self.x) ** 2)

    def save_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t_s,x_m,v_mps\n")
            for row in zip(self.t, self.x, self.v):
                fh.write(f"{row[0]:.10g},{row[1]:.12g},{row[2]:.12g}\n")


def damped_trajectory(
    mode: SecularMode,
    x0: float,
    v0: float,
    duration: float,
    mass: float | None = None,
    friction_alpha: float | None = None,
    force_of_v=None,
    drive: DriveConfig | None = None,
    step: float | None = None,
) -> Trajectory:
    """RK4 integration of the mode coordinate under friction and drive.

    The velocity-dependent force is either linear (-friction_alpha * M * v)
    or an arbitrary callable in newtons (e.g. RadiationPressureForce.net,
    the nonlinear scattering force with its static part removed). The step
    must resolve the oscillation: step <= 0.01 / f_mode.
    """
    if duration <= 0:
        raise DomainError("duration must be positive")
    mass = mass or PhysicalConstants().ion_mass
    if (friction_alpha is None) == (force_of_v is None):
        raise ConfigurationError(
            "specify exactly one of friction_alpha or force_of_v"
        )
    max_step = 0.01 / mode.frequency_hz
    if step is None:
        step = 0.005 / mode.frequency_hz
    if step > max_step:
        raise ConfigurationError(
            f"step {step:.3e} exceeds 0.01/f_mode = {max_step:.3e}"
        )
    w0sq = mode.omega**2
    if force_of_v is not None:
        def friction_acc(v):
            return force_of_v(v) / mass
    else:
        alpha = friction_alpha

        def friction_acc(v):
            return -alpha * v

    if drive is not None:
        w_dr = 2 * math.pi * drive.f_drive_hz
        f0_over_m = drive.force_amplitude / mass

        def drive_acc(t):
            return f0_over_m * math.cos(w_dr * t)
    else:
        def drive_acc(t):
            return 0.0

    n = int(math.ceil(duration / step))
    t = np.empty(n + 1)
    xs = np.empty(n + 1)
    vs = np.empty(n + 1)
    x, v = float(x0), float(v0)
    t[0], xs[0], vs[0] = 0.0, x, v
    h = step
    for i in range(1, n + 1):
        ti = (i - 1) * h

        def acc(tt, xx, vv):
            return -w0sq * xx + friction_acc(vv) + drive_acc(tt)

        k1x = v
        k1v = acc(ti, x, v)
        k2x = v + 0.5 * h * k1v
        k2v = acc(ti + 0.5 * h, x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x = v + 0.5 * h * k2v
        k3v = acc(ti + 0.5 * h, x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x = v + h * k3v
        k4v = acc(ti + h, x + h * k3x, v + h * k3v)
        x += (h / 6) * (k1x + 2 * k2x + 2 * k3x + k4x)
        v += (h / 6) * (k1v + 2 * k2v + 2 * k3v + k4v)
        t[i], xs[i], vs[i] = i * h, x, v
    return Trajectory(t, xs, vs)
