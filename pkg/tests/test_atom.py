import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.constants import h

from trapspec.atom import (
    ION_MASS_DEFAULT,
    LaserField,
    LevelScheme,
    PhysicalConstants,
    STATE_ORDER,
    State,
    Transition,
    clebsch_gordan,
    coupling_coefficient,
    default_laser_493,
    rabi_frequency,
    recoil_frequency,
    saturation_intensity,
    zeeman_shift,
)
from trapspec.errors import DomainError

TWO_PI = 2 * math.pi
GAUSS = 1e-4


class TestZeemanShift:
    def test_zero_field(self):
        assert zeeman_shift("S1/2", 0.5, 0.0) == 0.0

    def test_s_half_at_2p8_gauss(self):
        # mu_B/h = 1.3996 MHz/G, g = 2: 2 * 0.5 * 1.3996 * 2.8 = 3.92 MHz
        shift = zeeman_shift("S1/2", +0.5, 2.8 * GAUSS)
        assert shift == pytest.approx(TWO_PI * 3.92e6, rel=2e-3)

    def test_d_three_half_at_2p8_gauss(self):
        shift = zeeman_shift("D3/2", +1.5, 2.8 * GAUSS)
        assert shift == pytest.approx(TWO_PI * 4.70e6, rel=2e-3)

    def test_unknown_term(self):
        with pytest.raises(DomainError):
            zeeman_shift("D5/2", 0.5, 1e-4)

    def test_invalid_m(self):
        with pytest.raises(DomainError):
            zeeman_shift("S1/2", 1.5, 1e-4)

    @given(
        m=st.sampled_from([-1.5, -0.5, 0.5, 1.5]),
        b=st.floats(min_value=1e-6, max_value=1e-2),
        scale=st.floats(min_value=0.1, max_value=10.0),
    )
    def test_odd_in_m_and_linear_in_b(self, m, b, scale):
        plus = zeeman_shift("D3/2", m, b)
        assert zeeman_shift("D3/2", -m, b) == pytest.approx(-plus, rel=1e-12)
        assert zeeman_shift("D3/2", m, scale * b) == pytest.approx(scale * plus, rel=1e-12)


class TestCouplingCoefficient:
    def test_selection_rule_zero(self):
        c = coupling_coefficient(State("S1/2", -0.5), State("P1/2", +0.5), q=0)
        assert c == 0.0

    def test_sigma_plus_amplitude_squared(self):
        c = coupling_coefficient(State("S1/2", -0.5), State("P1/2", +0.5), q=+1)
        assert c**2 == pytest.approx(2.0 / 3.0, rel=1e-12)

    @pytest.mark.parametrize("upper_m", [-0.5, +0.5])
    @pytest.mark.parametrize("lower_term", ["S1/2", "D3/2"])
    def test_sum_rule(self, lower_term, upper_m):
        upper = State("P1/2", upper_m)
        total = 0.0
        for lower in STATE_ORDER:
            if lower.term != lower_term:
                continue
            for q in (-1, 0, 1):
                total += coupling_coefficient(lower, upper, q) ** 2
        assert total == pytest.approx(1.0, rel=1e-12)

    def test_against_sympy_oracle(self):
        sympy = pytest.importorskip("sympy")
        from sympy.physics.quantum.cg import CG

        for upper in STATE_ORDER:
            if upper.term != "P1/2":
                continue
            for lower in STATE_ORDER:
                if lower.term == "P1/2":
                    continue
                for q in (-1, 0, 1):
                    if abs(upper.m - lower.m - q) > 1e-9:
                        continue
                    mine = coupling_coefficient(lower, upper, q)
                    jl = sympy.Rational(int(2 * lower.j), 2)
                    ml = sympy.Rational(int(2 * lower.m), 2)
                    mu = sympy.Rational(int(2 * upper.m), 2)
                    ref = float(CG(jl, ml, 1, q, sympy.Rational(1, 2), mu).doit())
                    assert mine == pytest.approx(ref, abs=1e-12)

    def test_not_dipole_connected(self):
        with pytest.raises(DomainError):
            coupling_coefficient(State("S1/2", -0.5), State("D3/2", 0.5), q=1)

    def test_bad_q(self):
        with pytest.raises(DomainError):
            coupling_coefficient(State("S1/2", -0.5), State("P1/2", 0.5), q=2)


class TestRabiFrequency:
    def test_zero_intensity(self):
        scheme = LevelScheme()
        laser = default_laser_493(intensity=0.0)
        assert rabi_frequency(laser, scheme.sp_transition) == 0.0

    def test_twice_saturation_gives_gamma(self):
        scheme = LevelScheme()
        isat = saturation_intensity(scheme.sp_transition)
        laser = default_laser_493(intensity=2 * isat)
        omega = rabi_frequency(laser, scheme.sp_transition)
        assert omega == pytest.approx(scheme.gamma_sp, rel=1e-12)

    def test_paper_intensity(self):
        # I_sat(493) = 16.4 mW/cm^2, so 189 mW/cm^2 gives ~2pi x 36 MHz.
        scheme = LevelScheme()
        isat = saturation_intensity(scheme.sp_transition)
        assert isat == pytest.approx(164.3, rel=1e-3)  # W/m^2
        laser = default_laser_493(intensity=1890.0)
        omega = rabi_frequency(laser, scheme.sp_transition)
        assert omega == pytest.approx(TWO_PI * 36e6, rel=0.01)

    def test_wavelength_mismatch(self):
        scheme = LevelScheme()
        laser = default_laser_493()
        with pytest.raises(DomainError):
            rabi_frequency(laser, scheme.pd_transition)

    @given(intensity=st.floats(min_value=1e-3, max_value=1e5))
    def test_sqrt_intensity_scaling(self, intensity):
        scheme = LevelScheme()
        tr = scheme.sp_transition
        base = rabi_frequency(default_laser_493(intensity=intensity), tr)
        quad = rabi_frequency(default_laser_493(intensity=4 * intensity), tr)
        assert quad == pytest.approx(2 * base, rel=1e-12)


class TestRecoilFrequency:
    def test_paper_value(self):
        rec = recoil_frequency(ION_MASS_DEFAULT, 493.4e-9)
        assert rec == pytest.approx(TWO_PI * 5.9e3, rel=0.01)

    def test_mass_scaling(self):
        rec = recoil_frequency(ION_MASS_DEFAULT, 493.4e-9)
        assert recoil_frequency(2 * ION_MASS_DEFAULT, 493.4e-9) == pytest.approx(
            rec / 2, rel=1e-12
        )

    def test_doubled_wavelength(self):
        assert recoil_frequency(ION_MASS_DEFAULT, 986.8e-9) == pytest.approx(
            TWO_PI * 1.475e3, rel=0.01
        )

    @given(
        mass=st.floats(min_value=1e-27, max_value=1e-24),
        lam=st.floats(min_value=100e-9, max_value=2000e-9),
    )
    def test_mass_wavelength_product_invariant(self, mass, lam):
        ref = recoil_frequency(ION_MASS_DEFAULT, 493.4e-9) * ION_MASS_DEFAULT * 493.4e-9**2
        val = recoil_frequency(mass, lam) * mass * lam**2
        assert val == pytest.approx(ref, rel=1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            recoil_frequency(-1.0, 493e-9)


class TestLevelScheme:
    def test_has_eight_states(self):
        scheme = LevelScheme()
        states = scheme.states
        assert len(states) == 8
        assert sum(1 for s in states if s.term == "S1/2") == 2
        assert sum(1 for s in states if s.term == "P1/2") == 2
        assert sum(1 for s in states if s.term == "D3/2") == 4
        d_ms = sorted(s.m for s in states if s.term == "D3/2")
        assert d_ms == [-1.5, -0.5, 0.5, 1.5]

    def test_total_p_decay(self):
        scheme = LevelScheme()
        assert scheme.total_p_decay == scheme.gamma_sp + scheme.gamma_pd

    def test_default_rates(self):
        scheme = LevelScheme()
        assert scheme.gamma_sp == pytest.approx(TWO_PI * 15.1e6)
        assert scheme.gamma_pd == pytest.approx(TWO_PI * 5.3e6)

    def test_json_round_trip(self):
        scheme = LevelScheme(gamma_pd=TWO_PI * 4.9e6)
        clone = LevelScheme.from_json(scheme.to_json())
        assert clone == scheme

    def test_transition_matching(self):
        scheme = LevelScheme()
        assert scheme.transition_for(493.4e-9).lower_term == "S1/2"
        assert scheme.transition_for(649.7e-9).lower_term == "D3/2"
        with pytest.raises(DomainError):
            scheme.transition_for(550e-9)

    def test_invalid_rates(self):
        with pytest.raises(DomainError):
            LevelScheme(gamma_sp=-1.0)


class TestLaserFieldAndConstants:
    def test_polarization_must_be_orthogonal(self):
        with pytest.raises(DomainError):
            LaserField(493.4e-9, 0.0, 100.0, (1, 0, 0), (1, 0, 0))

    def test_negative_intensity(self):
        with pytest.raises(DomainError):
            LaserField(493.4e-9, 0.0, -1.0, (0, 1, 0), (1, 0, 0))

    def test_vectors_normalized(self):
        laser = LaserField(493.4e-9, 0.0, 1.0, (0, 2, 0), (3, 0, 0))
        assert np.linalg.norm(laser.polarization) == pytest.approx(1.0)
        assert np.linalg.norm(laser.k_direction) == pytest.approx(1.0)

    def test_constants_positive(self):
        with pytest.raises(DomainError):
            PhysicalConstants(ion_mass=0.0)

    def test_saturation_intensity_formula(self):
        # I_sat = pi h c Gamma / (3 lambda^3) with Gamma in rad/s
        tr = Transition("S1/2", "P1/2", 493.4e-9, TWO_PI * 15.1e6)
        expected = math.pi * h * 299792458.0 * tr.gamma / (3 * tr.wavelength**3)
        assert saturation_intensity(tr) == pytest.approx(expected, rel=1e-12)


def test_clebsch_gordan_orthogonality():
    # sum over (m1, q) of CG^2 = 1 for each target state
    for m3 in (-0.5, 0.5):
        total = 0.0
        for m1 in (-1.5, -0.5, 0.5, 1.5):
            for q in (-1, 0, 1):
                if abs(m1 + q - m3) < 1e-9:
                    total += clebsch_gordan(1.5, m1, 1, q, 0.5, m3) ** 2
        assert total == pytest.approx(1.0, rel=1e-12)
