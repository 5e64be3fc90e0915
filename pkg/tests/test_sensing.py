import math

import numpy as np
import pytest

from spinslab.constants import GAMMA_E_RAD_PER_S_T
from spinslab.errors import ConfigurationError, DomainError, InputError
from spinslab.sensing import (
    SensitivityBudget,
    c_eff_from_readout,
    convention_report,
    droid_condition,
    eta_echo,
    optimal_tau,
    scaling_report,
    volume_normalized,
)


def budget(**kw):
    defaults = dict(
        t2_s=48e-6,
        tau_s=24e-6,
        t_m_s=20.4e-6,
        c_eff=0.0062,
        n_spins=135,
        stretch_p=2.0 / 3.0,
    )
    defaults.update(kw)
    return SensitivityBudget(**defaults)


class TestEtaEcho:
    def test_matches_direct_formula(self):
        b = budget()
        expected = (
            (math.pi / 2)
            / GAMMA_E_RAD_PER_S_T
            * math.exp((b.tau_s / b.t2_s) ** b.stretch_p)
            / (b.c_eff * math.sqrt(b.n_spins))
            * math.sqrt(b.t_m_s + b.tau_s)
            / b.tau_s
        )
        assert eta_echo(b) == pytest.approx(expected, rel=1e-14)

    def test_more_spins_better(self):
        assert eta_echo(budget(n_spins=540)) == pytest.approx(
            eta_echo(budget()) / 2, rel=1e-12
        )

    def test_parameter_validation(self):
        with pytest.raises(ConfigurationError):
            budget(c_eff=0.0)
        with pytest.raises(ConfigurationError):
            budget(tau_s=-1e-6)
        with pytest.raises(ConfigurationError):
            budget(stretch_p=3.0)


class TestVolumeNormalized:
    def test_equivalence_when_consistent(self):
        rho_ppm = 0.83
        vol = 0.0015
        rho_um3 = rho_ppm * 1.76e17 * 1e-12
        b = budget(n_spins=rho_um3 * vol, rho_3d_ppm=rho_ppm, volume_um3=vol)
        res = volume_normalized(b)
        assert res.consistency_warning is None
        assert res.value_t_um32 == pytest.approx(
            eta_echo(b) * math.sqrt(vol), rel=1e-12
        )

    def test_inconsistent_triple_warns(self):
        b = budget(n_spins=135, rho_3d_ppm=0.83, volume_um3=0.0015)
        res = volume_normalized(b)
        assert res.consistency_warning is not None

    def test_requires_density(self):
        with pytest.raises(ConfigurationError):
            volume_normalized(budget())


class TestOptimalTau:
    def test_exponential_no_overhead_gives_half_t2(self):
        res = optimal_tau(48e-6, p=1.0, t_m_s=0.0)
        assert res.tau_s == pytest.approx(24e-6, rel=1e-6)
        assert res.alpha_p == pytest.approx(0.5, rel=1e-6)

    def test_overhead_pushes_tau_up(self):
        no_overhead = optimal_tau(48e-6, p=1.0, t_m_s=0.0)
        overhead = optimal_tau(48e-6, p=1.0, t_m_s=100e-6)
        assert overhead.tau_s > no_overhead.tau_s

    def test_minimum_is_local_minimum(self):
        res = optimal_tau(10e-6, p=2.0 / 3.0, t_m_s=5e-6)
        b = budget(t2_s=10e-6, tau_s=res.tau_s, t_m_s=5e-6, stretch_p=2.0 / 3.0)
        for factor in (0.97, 1.03):
            other = budget(
                t2_s=10e-6, tau_s=res.tau_s * factor, t_m_s=5e-6, stretch_p=2.0 / 3.0
            )
            assert eta_echo(other) >= eta_echo(b)

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            optimal_tau(-1.0, 1.0, 0.0)


class TestScaling:
    def test_3d_volume_normalized_exponent_zero(self):
        rho = np.logspace(-1, 1, 9)
        rep = scaling_report(3, densities_ppm=rho)
        assert rep["volume_normalized"].exponent == pytest.approx(0.0, abs=0.02)

    def test_2d_exponents(self):
        rho2 = np.logspace(0, 2, 9)
        rep = scaling_report(2, densities_ppm_nm=rho2, thickness_nm=10.0)
        assert rep["area_normalized"].exponent == pytest.approx(0.25, abs=0.02)
        assert rep["volume_normalized"].exponent == pytest.approx(0.75, abs=0.02)

    def test_sweep_validation(self):
        with pytest.raises(InputError):
            scaling_report(3, densities_ppm=[1.0, 2.0])  # too few
        with pytest.raises(InputError):
            scaling_report(3, densities_ppm=[1, 1.2, 1.4, 1.6, 1.8, 2.0])  # < decade
        with pytest.raises(InputError):
            scaling_report(4, densities_ppm=np.logspace(0, 1, 6))


class TestDroid:
    def test_published_margin(self):
        res = droid_condition(65e-6, 196e-6)
        assert res.favorable
        assert res.margin == pytest.approx(196.0 / 195.0, rel=1e-12)

    def test_unfavorable(self):
        res = droid_condition(65e-6, 100e-6)
        assert not res.favorable

    def test_validation(self):
        with pytest.raises(DomainError):
            droid_condition(0.0, 1.0)


class TestReadoutAndReport:
    def test_c_eff_helper(self):
        # C sqrt(PL t_R / N) with easy numbers: 0.1 * sqrt(1e6 * 1e-4 / 25) = 0.2
        assert c_eff_from_readout(0.1, 1e6, 1e-4, 25) == pytest.approx(0.2, rel=1e-12)

    def test_report_contains_all_conventions(self):
        b = budget(rho_3d_ppm=0.83, volume_um3=0.0015)
        report = convention_report(b)
        for key in (
            "eta_sqrtN_t_hz",
            "eta_sqrtN_times_sqrtV_t_um32",
            "eta_sqrt_rhoV_times_sqrtV_t_um32",
            "eta_rho_substitution_t_um32",
            "inputs",
        ):
            assert key in report
        assert "consistency_warning" in report  # N=135 vs rho*V=219 mismatch
