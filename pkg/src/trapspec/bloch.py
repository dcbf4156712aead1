"""Eight-level optical Bloch equations for the two-laser-driven ion.

Builds the Lindblad superoperator in the magnetic-field quantization frame
(rotating-wave approximation, one rotating frame per laser), solves for the
steady state, and provides excitation-spectrum scans plus the derivative
dP_P/d(detuning) that drives the cooling coefficient.

The density matrix is vectorized row-major, so vec(A rho B) =
kron(A, B.T) vec(rho).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .atom import (
    LaserField,
    LevelScheme,
    PhysicalConstants,
    STATE_ORDER,
    State,
    _unit,
    coupling_coefficient,
    rabi_frequency,
    zeeman_shift,
)
from .errors import (
    ConfigurationError,
    DomainError,
    NonUniqueSteadyStateError,
    NumericalError,
)

DIM = 8
NULLITY_RTOL = 1e-10  # singular values below this (relative) count as null
RESIDUAL_RTOL = 1e-10  # ||L rho_ss|| / ||L||_F bound on accepted solutions
DERIVATIVE_STEP_DEFAULT = 2 * math.pi * 100e3  # rad/s, well below all features

_S_SLICE = slice(0, 2)
_P_SLICE = slice(2, 4)
_D_SLICE = slice(4, 8)


@dataclass(frozen=True)
class ExperimentGeometry:
    """Beam, polarization, field, and detection directions (lab frame).

    The defaults reproduce the published arrangement: B orthogonal to both
    the laser wave vector and the laser polarization; detection at right
    angle to the beam, along B.
    """

    b_direction: np.ndarray = (0.0, 0.0, 1.0)
    laser_k: np.ndarray = (1.0, 0.0, 0.0)
    laser_polarization: np.ndarray = (0.0, 1.0, 0.0)
    detection_k: np.ndarray = (0.0, 0.0, 1.0)

    def __post_init__(self):
        for name in ("b_direction", "laser_k", "laser_polarization", "detection_k"):
            object.__setattr__(self, name, _unit(getattr(self, name), name))
        if abs(np.dot(self.laser_polarization, self.laser_k)) > 1e-8:
            raise DomainError("laser_polarization must be orthogonal to laser_k")


@dataclass
class DensityMatrix:
    """8x8 internal state in the STATE_ORDER basis; Hermitian, unit trace."""

    entries: np.ndarray

    HERMITICITY_TOL = 1e-12
    TRACE_TOL = 1e-10
    EIGENVALUE_FLOOR = -1e-9

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.shape != (DIM, DIM):
            raise DomainError(f"density matrix must be {DIM}x{DIM}")

    def validate(self):
        rho = self.entries
        scale = max(np.abs(rho).max(), 1e-300)
        herm = np.abs(rho - rho.conj().T).max() / scale
        if herm > self.HERMITICITY_TOL:
            raise NumericalError(f"density matrix not Hermitian: defect {herm:.2e}")
        tr = np.trace(rho)
        if abs(tr - 1.0) > self.TRACE_TOL:
            raise NumericalError(f"trace {tr} differs from 1 beyond tolerance")
        eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        if eigs.min() < self.EIGENVALUE_FLOOR:
            raise NumericalError(f"negative eigenvalue {eigs.min():.2e}")
        return self

    def population(self, term: str) -> float:
        idx = [i for i, s in enumerate(STATE_ORDER) if s.term == term]
        return float(sum(self.entries[i, i].real for i in idx))

    @property
    def p_population(self) -> float:
        return float(self.entries[2, 2].real + self.entries[3, 3].real)


@dataclass
class Liouvillian:
    """64x64 generator acting on the row-major vectorized density matrix."""

    matrix: np.ndarray
    scheme: LevelScheme
    meta: dict = field(default_factory=dict)

    @property
    def trace_row(self) -> np.ndarray:
        row = np.zeros(DIM * DIM, dtype=complex)
        row[np.arange(DIM) * (DIM + 1)] = 1.0
        return row

    def trace_defect(self) -> float:
        """||vec(I)^T L|| relative to ||L||_F; zero for trace preservation."""
        return float(
            np.linalg.norm(self.trace_row @ self.matrix)
            / np.linalg.norm(self.matrix)
        )

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(rho, dtype=complex).reshape(-1)).reshape(
            DIM, DIM
        )


def spherical_components(vector, b_direction) -> tuple[complex, complex, complex]:
    """Polarization amplitudes (eps_-1, eps_0, eps_+1) in the frame with z || B.

    The transverse axes are fixed deterministically; observable populations do
    not depend on that choice (it amounts to a rotation about B).
    """
    z = _unit(b_direction, "b_direction")
    ref = np.eye(3)[int(np.argmin(np.abs(z)))]
    x = ref - np.dot(ref, z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    v = np.asarray(vector, dtype=complex)
    vx, vy, vz = v @ x, v @ y, v @ z
    eps_p = -(vx + 1j * vy) / math.sqrt(2)
    eps_m = (vx - 1j * vy) / math.sqrt(2)
    return eps_m, vz, eps_p


def _unitary_super(h: np.ndarray) -> np.ndarray:
    eye = np.eye(DIM)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def _decay_channels(scheme: LevelScheme):
    """One (rate, lower_index, upper_index) spontaneous channel per Zeeman pair."""
    channels = []
    for u, upper in enumerate(STATE_ORDER):
        if upper.term != "P1/2":
            continue
        for l, lower in enumerate(STATE_ORDER):
            if lower.term == "P1/2":
                continue
            q = round(upper.m - lower.m)
            if abs(q) > 1:
                continue
            c = coupling_coefficient(lower, upper, q)
            if c == 0.0:
                continue
            gamma = scheme.gamma_sp if lower.term == "S1/2" else scheme.gamma_pd
            channels.append((gamma * c**2, l, u))
    return channels


def _dissipator(scheme: LevelScheme, dephasing_493=0.0, dephasing_650=0.0) -> np.ndarray:
    eye = np.eye(DIM)
    out = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
    for rate, l, u in _decay_channels(scheme):
        a = np.zeros((DIM, DIM))
        a[l, u] = 1.0
        ada = np.zeros((DIM, DIM))
        ada[u, u] = 1.0
        out += rate * (
            np.kron(a, a) - 0.5 * np.kron(ada, eye) - 0.5 * np.kron(eye, ada)
        )
    # Optional phenomenological laser-linewidth dephasing: projector channels
    # damp lower-manifold optical coherences without moving population.
    for rate, sl in ((dephasing_493, _S_SLICE), (dephasing_650, _D_SLICE)):
        if rate <= 0.0:
            continue
        proj = np.zeros((DIM, DIM))
        proj[sl, sl] = np.eye(sl.stop - sl.start)
        out += 2 * rate * (
            np.kron(proj, proj) - 0.5 * np.kron(proj, np.eye(DIM)) - 0.5 * np.kron(np.eye(DIM), proj)
        )
    return out


def _coupling_hamiltonian(transition, polarization, b_direction) -> np.ndarray:
    """Coupling matrix for unit Rabi frequency: sum_q eps_q c_q |u><l| / 2 + h.c."""
    eps = spherical_components(polarization, b_direction)
    h = np.zeros((DIM, DIM), dtype=complex)
    for u, upper in enumerate(STATE_ORDER):
        if upper.term != transition.upper_term:
            continue
        for l, lower in enumerate(STATE_ORDER):
            if lower.term != transition.lower_term:
                continue
            q = round(upper.m - lower.m)
            if abs(q) > 1:
                continue
            c = coupling_coefficient(lower, upper, q)
            if c == 0.0:
                continue
            h[u, l] += 0.5 * eps[q + 1] * c
    return h + h.conj().T


def _zeeman_hamiltonian(scheme, constants) -> np.ndarray:
    """Diagonal Zeeman Hamiltonian per unit magnetic field (rad/s per T)."""
    h = np.zeros((DIM, DIM), dtype=complex)
    for i, s in enumerate(STATE_ORDER):
        h[i, i] = zeeman_shift(s.term, s.m, 1.0, scheme, constants)
    return h


_PROJ_P = np.diag([0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
_PROJ_D = np.diag([0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0])
# Rotating-frame diagonal: P and D shift by -delta_493, D shifts back by +delta_650.
_H_DELTA_493 = -(_PROJ_P + _PROJ_D)
_H_DELTA_650 = _PROJ_D.copy()


def build_liouvillian(
    scheme: LevelScheme,
    lasers: list[LaserField],
    b_field: float,
    geometry: ExperimentGeometry | None = None,
    constants: PhysicalConstants | None = None,
    dephasing_493: float = 0.0,
    dephasing_650: float = 0.0,
) -> Liouvillian:
    """Assemble the full Lindblad generator for the given beams and field.

    Each laser is matched to its transition by wavelength; two lasers on the
    same transition are rejected. Lasers may be absent or have zero
    intensity -- the generator is still valid, but the steady state is then
    degenerate (dark lower manifold) and the solver reports it.
    """
    geometry = geometry or ExperimentGeometry()
    constants = constants or PhysicalConstants()
    seen = {}
    h = b_field * _zeeman_hamiltonian(scheme, constants).astype(complex)
    for laser in lasers:
        tr = scheme.transition_for(laser.wavelength)
        if tr.lower_term in seen:
            raise ConfigurationError(
                f"two lasers drive the {tr.wavelength * 1e9:.0f} nm transition"
            )
        seen[tr.lower_term] = laser
        omega = rabi_frequency(laser, tr)
        h += omega * _coupling_hamiltonian(tr, laser.polarization, geometry.b_direction)
        if tr.lower_term == "S1/2":
            h += laser.detuning * _H_DELTA_493
        else:
            h += laser.detuning * _H_DELTA_650
    mat = _unitary_super(h) + _dissipator(scheme, dephasing_493, dephasing_650)
    meta = {
        "b_field": b_field,
        "n_lasers": len(lasers),
        "transitions": sorted(seen),
    }
    return Liouvillian(mat, scheme, meta)


def _nullspace_state(matrix: np.ndarray) -> np.ndarray:
    _, s, vh = np.linalg.svd(matrix)
    nullity = int((s <= s[0] * NULLITY_RTOL).sum()) if s[0] > 0 else DIM * DIM
    if nullity > 1:
        raise NonUniqueSteadyStateError(nullity)
    if nullity == 0:
        raise NumericalError("Liouvillian has no null vector (not trace-preserving?)")
    return vh[-1].conj()


def steady_state(liouvillian: Liouvillian) -> DensityMatrix:
    """Unique stationary state of the generator.

    Solves the trace-constrained linear system (one redundant row replaced by
    the trace condition); falls back to an SVD null-space analysis when the
    solve is singular or inaccurate, and reports the null-space dimension if
    the stationary state is not unique.
    """
    mat = liouvillian.matrix
    norm_l = np.linalg.norm(mat)
    vec = None
    try:
        constrained = mat.copy()
        constrained[0, :] = liouvillian.trace_row
        rhs = np.zeros(DIM * DIM, dtype=complex)
        rhs[0] = 1.0
        vec = np.linalg.solve(constrained, rhs)
    except np.linalg.LinAlgError:
        vec = None
    if vec is not None:
        residual = np.linalg.norm(mat @ vec) / (norm_l * max(np.linalg.norm(vec), 1e-300))
        if not np.isfinite(residual) or residual > RESIDUAL_RTOL:
            vec = None
    if vec is None:
        vec = _nullspace_state(mat)
        residual = np.linalg.norm(mat @ vec) / (norm_l * np.linalg.norm(vec))
        if residual > RESIDUAL_RTOL:
            raise NumericalError(f"steady-state residual {residual:.2e} too large")
    rho = vec.reshape(DIM, DIM)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-6 * np.abs(rho).max():
        raise NumericalError("null vector is traceless; no physical steady state")
    rho = rho / tr
    return DensityMatrix(rho).validate()


def rk4_step_matrix(liouvillian: Liouvillian, step: float) -> np.ndarray:
    """One-step propagator of classical RK4 applied to d(rho)/dt = L rho."""
    a = step * liouvillian.matrix
    a2 = a @ a
    return np.eye(DIM * DIM) + a + a2 / 2 + (a2 @ a) / 6 + (a2 @ a2) / 24


def propagate_to_stationarity(
    liouvillian: Liouvillian,
    rho0: np.ndarray,
    step: float | None = None,
    tol: float = 1e-10,
    max_doublings: int = 48,
) -> DensityMatrix:
    """Long-time RK4 integration of d(rho)/dt = L rho from rho0.

    Uses the exact RK4 one-step map for the linear system and repeated
    squaring, so arbitrarily long horizons cost one matrix product per time
    doubling. Independent of the algebraic solver in steady_state.
    """
    if step is None:
        step = 0.01 / liouvillian.scheme.total_p_decay
    prop = rk4_step_matrix(liouvillian, step)
    vec = np.asarray(rho0, dtype=complex).reshape(-1)
    prev = prop @ vec
    for _ in range(max_doublings):
        prop = prop @ prop
        cur = prop @ vec
        if np.abs(cur - prev).max() < tol:
            break
        prev = cur
    else:
        raise NumericalError("integration did not reach stationarity")
    rho = cur.reshape(DIM, DIM)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real)


@dataclass(frozen=True)
class Derivative:
    value: float
    error: float
    step: float


@dataclass
class ExcitationScan:
    """P_P sampled on a detuning grid; failed points are NaN with a record."""

    axis: str  # "493" or "650"
    detunings: np.ndarray  # rad/s
    p_population: np.ndarray
    failures: list = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)

    def save_csv(self, path):
        with open(path, "w") as fh:
            fh.write("detuning_hz,p_population\n")
            for d, p in zip(self.detunings, self.p_population):
                fh.write(f"{d / (2 * math.pi):.10g},{p:.12g}\n")

    def to_json_dict(self) -> dict:
        return {
            "axis": self.axis,
            "detuning_hz": [d / (2 * math.pi) for d in self.detunings],
            "p_population": [None if np.isnan(p) else float(p) for p in self.p_population],
            "failures": [{"index": i, "error": msg} for i, msg in self.failures],
            "config": self.config_echo,
        }


class SteadyStateModel:
    """Two-laser steady-state context with cached Liouvillian structure.

    The generator is affine in (delta_493, delta_650, B, Omega_493,
    Omega_650), so scans and fits only re-scale six fixed 64x64 blocks per
    evaluation instead of rebuilding couplings.
    """

    def __init__(
        self,
        laser_493: LaserField | None = None,
        laser_650: LaserField | None = None,
        b_field: float = 2.8e-4,
        scheme: LevelScheme | None = None,
        constants: PhysicalConstants | None = None,
        geometry: ExperimentGeometry | None = None,
        dephasing_493: float = 0.0,
        dephasing_650: float = 0.0,
    ):
        from .atom import default_laser_493, default_laser_650

        self.scheme = scheme or LevelScheme()
        self.constants = constants or PhysicalConstants()
        self.geometry = geometry or ExperimentGeometry()
        self.laser_493 = laser_493 or default_laser_493(scheme=self.scheme)
        self.laser_650 = laser_650 or default_laser_650(scheme=self.scheme)
        self.b_field = b_field
        bdir = self.geometry.b_direction
        self._k_diss = _dissipator(self.scheme, dephasing_493, dephasing_650)
        self._k_zeeman = _unitary_super(_zeeman_hamiltonian(self.scheme, self.constants))
        self._k_d493 = _unitary_super(_H_DELTA_493.astype(complex))
        self._k_d650 = _unitary_super(_H_DELTA_650.astype(complex))
        self._k_rabi_493 = _unitary_super(
            _coupling_hamiltonian(self.scheme.sp_transition, self.laser_493.polarization, bdir)
        )
        self._k_rabi_650 = _unitary_super(
            _coupling_hamiltonian(self.scheme.pd_transition, self.laser_650.polarization, bdir)
        )

    def _omega(self, transition, intensity) -> float:
        from .atom import saturation_intensity

        return transition.gamma * math.sqrt(
            max(intensity, 0.0) / (2 * saturation_intensity(transition))
        )

    def _resolve(self, overrides: dict) -> dict:
        params = {
            "delta_493": self.laser_493.detuning,
            "delta_650": self.laser_650.detuning,
            "intensity_493": self.laser_493.intensity,
            "intensity_650": self.laser_650.intensity,
            "b_field": self.b_field,
        }
        unknown = set(overrides) - set(params)
        if unknown:
            raise ConfigurationError(f"unknown model parameters: {sorted(unknown)}")
        params.update({k: v for k, v in overrides.items() if v is not None})
        return params

    def liouvillian(self, **overrides) -> Liouvillian:
        p = self._resolve(overrides)
        omega_g = self._omega(self.scheme.sp_transition, p["intensity_493"])
        omega_r = self._omega(self.scheme.pd_transition, p["intensity_650"])
        mat = (
            self._k_diss
            + p["b_field"] * self._k_zeeman
            + p["delta_493"] * self._k_d493
            + p["delta_650"] * self._k_d650
            + omega_g * self._k_rabi_493
            + omega_r * self._k_rabi_650
        )
        return Liouvillian(mat, self.scheme, {"params": p})

    def steady_state(self, **overrides) -> DensityMatrix:
        return steady_state(self.liouvillian(**overrides))

    def p_population(self, **overrides) -> float:
        return self.steady_state(**overrides).p_population

    def excitation_spectrum(self, axis: str, detunings) -> ExcitationScan:
        """Steady-state P_P per grid point; per-point failures are collected."""
        if axis not in ("493", "650"):
            raise ConfigurationError("scan axis must be '493' or '650'")
        grid = np.asarray(detunings, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or not np.all(np.isfinite(grid)):
            raise ConfigurationError("detuning grid must be finite and 1-d")
        key = f"delta_{axis}"
        out = np.full(grid.shape, np.nan)
        failures = []
        for i, d in enumerate(grid):
            try:
                out[i] = self.p_population(**{key: d})
            except (NumericalError, ConfigurationError) as exc:
                failures.append((i, str(exc)))
        echo = self.config_echo()
        echo["scan_axis"] = axis
        return ExcitationScan(axis, grid, out, failures, echo)

    def p_derivative(self, axis: str = "493", step: float = DERIVATIVE_STEP_DEFAULT) -> Derivative:
        """Central-difference dP_P/d(detuning) with a Richardson error estimate."""
        if step <= 0:
            raise ConfigurationError("finite-difference step must be positive")
        key = f"delta_{axis}"
        base = self.laser_493.detuning if axis == "493" else self.laser_650.detuning

        def f(offset):
            return self.p_population(**{key: base + offset})

        coarse = (f(step) - f(-step)) / (2 * step)
        fine = (f(step / 2) - f(-step / 2)) / step
        return Derivative(value=fine, error=abs(fine - coarse) / 3, step=step / 2)

    def config_echo(self) -> dict:
        return {
            "delta_493_hz": self.laser_493.detuning / (2 * math.pi),
            "delta_650_hz": self.laser_650.detuning / (2 * math.pi),
            "intensity_493_w_m2": self.laser_493.intensity,
            "intensity_650_w_m2": self.laser_650.intensity,
            "b_field_t": self.b_field,
            "gamma_sp_hz": self.scheme.gamma_sp / (2 * math.pi),
            "gamma_pd_hz": self.scheme.gamma_pd / (2 * math.pi),
        }
