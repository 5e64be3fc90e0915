import math

import numpy as np
import pytest

from spinslab.errors import AnalysisError, ConversionError, ParseError
from spinslab.profiles import (
    GAUSSIAN_FWHM_FACTOR,
    DepthProfile,
    TrendDataset,
    convert_units,
    metrics_to_json,
    parse_profile,
    peak_metrics,
    weighted_linreg,
)


def gaussian_profile(
    center=30.0, fwhm=5.8, areal_ppm_nm=1500.0, baseline=2.0, span=(0.0, 80.0), n=400
):
    depth = np.linspace(*span, n)
    sigma = fwhm / GAUSSIAN_FWHM_FACTOR
    amp = areal_ppm_nm / (sigma * math.sqrt(2 * math.pi))
    conc = baseline + amp * np.exp(-((depth - center) ** 2) / (2 * sigma**2))
    return DepthProfile(depth, conc, "ppm", species="15N")


class TestParsing:
    def test_comma_round_trip(self):
        prof = gaussian_profile(n=50)
        back = parse_profile(prof.to_text())
        assert np.allclose(back.depth_nm, prof.depth_nm)
        assert np.allclose(back.concentration, prof.concentration)
        assert back.unit == "ppm"
        assert back.species == "15N"

    def test_tab_delimited(self):
        text = "depth_nm\tN_atoms_cm3\n1.0\t5e17\n2.0\t6e17\n"
        prof = parse_profile(text)
        assert prof.unit == "atoms_cm3"
        assert prof.concentration[1] == pytest.approx(6e17)

    def test_malformed_rows_reported_with_line_numbers(self):
        text = "depth_nm,N_ppm\n1.0,2.0\nbroken\n3.0,abc\n"
        with pytest.raises(ParseError) as err:
            parse_profile(text)
        assert "line 3" in str(err.value)
        assert "line 4" in str(err.value)

    def test_unknown_unit_rejected(self):
        with pytest.raises(ParseError):
            parse_profile("depth_nm,N_bananas\n1.0,2.0\n")

    def test_non_monotonic_depth_rejected(self):
        with pytest.raises(ParseError):
            parse_profile("depth_nm,N_ppm\n2.0,1.0\n1.0,1.0\n")

    def test_nan_rejected(self):
        with pytest.raises(ParseError):
            parse_profile("depth_nm,N_ppm\n1.0,nan\n2.0,1.0\n")


class TestPeakMetrics:
    def test_sample_a_synthetic_instance(self):
        # The published delta-layer values as a synthetic oracle: 5.8 nm FWHM,
        # 1500 ppm nm areal density.
        prof = gaussian_profile(fwhm=5.8, areal_ppm_nm=1500.0)
        m = peak_metrics(prof)
        assert m.fwhm_nm == pytest.approx(5.8, rel=0.01)
        assert m.areal_density_ppm_nm == pytest.approx(1500.0, rel=0.02)
        assert m.center_nm == pytest.approx(30.0, abs=0.1)

    @pytest.mark.parametrize("fwhm,areal", [(3.0, 200.0), (8.0, 5000.0), (12.0, 900.0)])
    def test_parameter_recovery(self, fwhm, areal):
        prof = gaussian_profile(fwhm=fwhm, areal_ppm_nm=areal, span=(0.0, 120.0), n=600)
        m = peak_metrics(prof)
        assert m.fwhm_nm == pytest.approx(fwhm, rel=0.01)
        assert m.areal_density_ppm_nm == pytest.approx(areal, rel=0.02)

    def test_volume_density_is_areal_over_fwhm(self):
        m = peak_metrics(gaussian_profile())
        assert m.volume_density_ppm == pytest.approx(
            m.areal_density_ppm_nm / m.fwhm_nm, rel=1e-12
        )

    def test_atoms_cm3_input_converted(self):
        prof = gaussian_profile()
        prof_abs = DepthProfile(
            prof.depth_nm,
            convert_units(prof.concentration, "ppm", "atoms_cm3"),
            "atoms_cm3",
            prof.species,
        )
        m1, m2 = peak_metrics(prof), peak_metrics(prof_abs)
        assert m2.areal_density_ppm_nm == pytest.approx(
            m1.areal_density_ppm_nm, rel=1e-9
        )

    def test_window_selects_peak(self):
        depth = np.linspace(0, 200, 1000)
        sigma = 2.0
        conc = 1.0
        for center in (50.0, 150.0):
            conc = conc + 100 * np.exp(-((depth - center) ** 2) / (2 * sigma**2))
        prof = DepthProfile(depth, conc, "ppm")
        with pytest.raises(AnalysisError):  # two candidate peaks, no window
            peak_metrics(prof)
        m = peak_metrics(prof, window_nm=(100.0, 200.0))
        assert m.center_nm == pytest.approx(150.0, abs=0.2)

    def test_no_peak_rejected(self):
        prof = DepthProfile(np.linspace(0, 10, 50), np.full(50, 3.0), "ppm")
        with pytest.raises(AnalysisError):
            peak_metrics(prof)

    def test_json_output(self, tmp_path):
        m = peak_metrics(gaussian_profile())
        path = tmp_path / "m.json"
        metrics_to_json(m, path)
        assert path.read_text().startswith("{")


class TestUnitConversion:
    def test_published_areal_value(self):
        # 1.9e4 ppm nm -> 3.344e14 atoms/cm^2, within 3% of the quoted 3.43e14.
        got = convert_units(1.9e4, "ppm_nm", "atoms_cm2")
        assert got == pytest.approx(1.9e4 * 1.76e10, rel=1e-12)
        assert abs(got - 3.43e14) / 3.43e14 < 0.03

    def test_round_trip_exact(self):
        for a, b in [("ppm", "atoms_cm3"), ("ppm_nm", "atoms_cm2")]:
            x = 123.456
            assert convert_units(convert_units(x, a, b), b, a) == pytest.approx(
                x, rel=1e-12
            )

    def test_identity(self):
        assert convert_units(5.0, "ppm", "ppm") == 5.0

    def test_unsupported_rejected(self):
        with pytest.raises(ConversionError):
            convert_units(1.0, "ppm", "atoms_cm2")


class TestRegression:
    def test_exact_line_recovered(self):
        x = np.linspace(0, 10, 12)
        data = TrendDataset(x, 3.0 * x + 1.5)
        fit = weighted_linreg(data)
        assert fit.slope == pytest.approx(3.0, abs=1e-12)
        assert fit.intercept == pytest.approx(1.5, abs=1e-12)
        assert fit.slope_stderr == pytest.approx(0.0, abs=1e-9)

    def test_equal_sigmas_match_ols(self):
        rng = np.random.default_rng(11)
        x = np.linspace(0, 5, 30)
        y = 2.0 * x - 1.0 + rng.normal(0, 0.3, len(x))
        unweighted = weighted_linreg(TrendDataset(x, y))
        weighted = weighted_linreg(TrendDataset(x, y, np.full(len(x), 0.3)))
        assert weighted.slope == pytest.approx(unweighted.slope, rel=1e-12)
        assert weighted.intercept == pytest.approx(unweighted.intercept, rel=1e-12)

    def test_weights_prioritize_precise_points(self):
        x = np.array([0.0, 1.0, 2.0, 3.0])
        y = np.array([0.0, 1.0, 2.0, 30.0])  # outlier with huge sigma
        sigma = np.array([0.01, 0.01, 0.01, 100.0])
        fit = weighted_linreg(TrendDataset(x, y, sigma))
        assert fit.slope == pytest.approx(1.0, abs=1e-3)

    def test_coverage_noisy_slope(self):
        rng = np.random.default_rng(5)
        x = np.linspace(0, 3, 40)
        y = 14.0 * x + 10.0 + rng.normal(0, 2.0, len(x))
        fit = weighted_linreg(TrendDataset(x, y, np.full(len(x), 2.0)))
        assert abs(fit.slope - 14.0) < 3 * fit.slope_stderr
        assert abs(fit.intercept - 10.0) < 3 * fit.intercept_stderr

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(AnalysisError):
            weighted_linreg(TrendDataset(np.array([1.0, 2.0]), np.array([1.0, 2.0])))
        with pytest.raises(AnalysisError):
            weighted_linreg(
                TrendDataset(np.full(5, 2.0), np.arange(5, dtype=float))
            )
        with pytest.raises(ParseError):
            TrendDataset(np.arange(4.0), np.arange(4.0), np.array([1.0, -1.0, 1.0, 1.0]))
