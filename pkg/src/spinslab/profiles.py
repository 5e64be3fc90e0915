"""Depth-profile ingestion, delta-layer peak metrics, and trend regression.

Input format: delimited text (comma or tab), one header line naming the
columns and units, e.g. ``depth_nm,15N_ppm`` or ``depth_nm<TAB>N_atoms_cm3``.
Concentrations in ppm integrate to areal densities in ppm nm; the shared
lattice density converts to atoms/cm^2.
"""

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import find_peaks

from .constants import PPM_NM_TO_ATOMS_PER_CM2, PPM_TO_ATOMS_PER_CM3
from .errors import AnalysisError, ConversionError, ParseError

GAUSSIAN_FWHM_FACTOR = 2 * math.sqrt(2 * math.log(2))  # 2.3548...

_SUPPORTED_UNITS = ("ppm", "atoms_cm3")


@dataclass(frozen=True)
class DepthProfile:
    """Depth (nm, strictly increasing) vs concentration, unit-tagged."""

    depth_nm: np.ndarray
    concentration: np.ndarray
    unit: str  # "ppm" or "atoms_cm3"
    species: str = ""

    def __post_init__(self):
        d = np.asarray(self.depth_nm, dtype=float)
        c = np.asarray(self.concentration, dtype=float)
        if d.ndim != 1 or d.shape != c.shape or len(d) < 2:
            raise ParseError("depth and concentration must be 1D arrays of equal length >= 2")
        if np.any(np.diff(d) <= 0):
            raise ParseError("depth must be strictly increasing")
        if np.any(c < 0):
            raise ParseError("concentrations must be >= 0")
        if self.unit not in _SUPPORTED_UNITS:
            raise ParseError(f"unsupported unit {self.unit!r}")
        object.__setattr__(self, "depth_nm", d)
        object.__setattr__(self, "concentration", c)

    def to_text(self, delimiter: str = ",") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        w.writerow(["depth_nm", f"{self.species or 'conc'}_{self.unit}"])
        for d, c in zip(self.depth_nm, self.concentration):
            w.writerow([f"{d:.12g}", f"{c:.12g}"])
        return buf.getvalue()


def parse_profile(text: str) -> DepthProfile:
    """Parse delimited depth-profile text; malformed rows raise with line numbers."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ParseError("profile needs a header and at least one data row")
    delimiter = "\t" if "\t" in lines[0] else ","
    header = [h.strip() for h in lines[0].split(delimiter)]
    if len(header) != 2 or header[0].lower() != "depth_nm":
        raise ParseError(
            f"header must be 'depth_nm{delimiter}<species>_<unit>', got {lines[0]!r}"
        )
    name = header[1]
    unit = None
    for u in _SUPPORTED_UNITS:
        if name.lower().endswith("_" + u):
            unit = u
            species = name[: -(len(u) + 1)]
            break
    if unit is None:
        raise ParseError(f"unknown unit in column {name!r}; expected one of {_SUPPORTED_UNITS}")

    depths, concs, bad = [], [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(delimiter)
        if len(parts) != 2:
            bad.append(f"line {lineno}: expected 2 fields, got {len(parts)}")
            continue
        try:
            d, c = float(parts[0]), float(parts[1])
        except ValueError:
            bad.append(f"line {lineno}: non-numeric value")
            continue
        if not (math.isfinite(d) and math.isfinite(c)):
            bad.append(f"line {lineno}: non-finite value")
            continue
        depths.append(d)
        concs.append(c)
    if bad:
        raise ParseError("malformed rows: " + "; ".join(bad))
    return DepthProfile(np.array(depths), np.array(concs), unit, species)


def parse_profile_file(path) -> DepthProfile:
    with open(path) as fh:
        return parse_profile(fh.read())


@dataclass(frozen=True)
class PeakMetrics:
    center_nm: float
    sigma_nm: float
    fwhm_nm: float
    areal_density_ppm_nm: float
    areal_density_atoms_cm2: float
    volume_density_ppm: float
    baseline: float


def _gaussian(x, amp, center, sigma, baseline):
    return baseline + amp * np.exp(-((x - center) ** 2) / (2 * sigma**2))


def peak_metrics(
    profile: DepthProfile,
    window_nm: tuple | None = None,
    subtract_baseline: bool = True,
) -> PeakMetrics:
    """Delta-layer metrics from a Gaussian fit plus 3-sigma integration.

    sigma comes from the fit (instrument-limited tails make moment
    estimates unreliable); the areal density is the trapezoidal integral of
    the baseline-subtracted trace over center +/- 3 sigma, the baseline the
    median outside center +/- 5 sigma.
    """
    if profile.unit != "ppm":
        profile = DepthProfile(
            profile.depth_nm,
            convert_units(profile.concentration, "atoms_cm3", "ppm"),
            "ppm",
            profile.species,
        )
    x, y = profile.depth_nm, profile.concentration
    if window_nm is not None:
        sel = (x >= window_nm[0]) & (x <= window_nm[1])
        xw, yw = x[sel], y[sel]
    else:
        xw, yw = x, y
    if len(xw) < 5:
        raise AnalysisError("window contains too few points")

    rough_base = float(np.median(yw))
    height = float(yw.max() - rough_base)
    if height <= 0 or yw.max() < 3 * max(rough_base, 1e-300):
        raise AnalysisError("no peak above 3x baseline in the window")
    idx, _ = find_peaks(yw, height=3 * max(rough_base, 1e-300),
                        prominence=0.5 * height)
    if len(idx) == 0:
        idx = np.array([int(np.argmax(yw))])
    if len(idx) > 1:
        cands = ", ".join(f"{xw[i]:.3g} nm" for i in idx)
        raise AnalysisError(f"multiple candidate peaks in window: {cands}")

    i0 = int(idx[0])
    span = xw[-1] - xw[0]
    p0 = [height, float(xw[i0]), max(span / 10, (xw[1] - xw[0])), rough_base]
    try:
        popt, _ = curve_fit(_gaussian, xw, yw, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise AnalysisError("Gaussian peak fit did not converge") from exc
    amp, center, sigma, fit_base = popt
    sigma = abs(float(sigma))
    fwhm = GAUSSIAN_FWHM_FACTOR * sigma

    outside = (x < center - 5 * sigma) | (x > center + 5 * sigma)
    baseline = float(np.median(y[outside])) if outside.any() else float(fit_base)
    if not subtract_baseline:
        baseline = 0.0

    lo, hi = center - 3 * sigma, center + 3 * sigma
    sel = (x >= lo) & (x <= hi)
    if sel.sum() < 3:
        raise AnalysisError("fewer than 3 samples in the 3-sigma window")
    areal = float(np.trapezoid(np.clip(y[sel] - baseline, 0, None), x[sel]))
    return PeakMetrics(
        center_nm=float(center),
        sigma_nm=sigma,
        fwhm_nm=float(fwhm),
        areal_density_ppm_nm=areal,
        areal_density_atoms_cm2=convert_units(areal, "ppm_nm", "atoms_cm2"),
        volume_density_ppm=areal / fwhm,
        baseline=baseline,
    )


_CONVERSIONS = {
    ("ppm", "atoms_cm3"): PPM_TO_ATOMS_PER_CM3,
    ("atoms_cm3", "ppm"): 1.0 / PPM_TO_ATOMS_PER_CM3,
    ("ppm_nm", "atoms_cm2"): PPM_NM_TO_ATOMS_PER_CM2,
    ("atoms_cm2", "ppm_nm"): 1.0 / PPM_NM_TO_ATOMS_PER_CM2,
}


def convert_units(value, from_unit: str, to_unit: str):
    """Exact lattice-density conversions between ppm-based and absolute units."""
    if from_unit == to_unit:
        return value
    try:
        factor = _CONVERSIONS[(from_unit, to_unit)]
    except KeyError:
        raise ConversionError(
            f"unsupported conversion {from_unit!r} -> {to_unit!r}"
        ) from None
    return value * factor


@dataclass(frozen=True)
class TrendDataset:
    """x/y trend points with optional per-point 1-sigma uncertainties."""

    x: np.ndarray
    y: np.ndarray
    y_sigma: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ParseError("x and y must be 1D arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.y_sigma is not None:
            s = np.asarray(self.y_sigma, dtype=float)
            if s.shape != x.shape:
                raise ParseError("y_sigma must match x")
            if np.any(s <= 0):
                raise ParseError("uncertainties must be > 0")
            object.__setattr__(self, "y_sigma", s)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    covariance: tuple


def weighted_linreg(data: TrendDataset) -> LinearFit:
    """Closed-form weighted least squares (weights 1/sigma^2) with covariance.

    Equal weights reduce exactly to ordinary least squares.
    """
    if len(data.x) < 3:
        raise AnalysisError("need at least 3 points")
    if np.ptp(data.x) == 0:
        raise AnalysisError("all x identical; design matrix is singular")
    w = (
        1.0 / data.y_sigma**2
        if data.y_sigma is not None
        else np.ones_like(data.x)
    )
    A = np.vstack([data.x, np.ones_like(data.x)]).T
    ata = A.T @ (w[:, None] * A)
    coef = np.linalg.solve(ata, A.T @ (w * data.y))
    resid = data.y - A @ coef
    if data.y_sigma is not None:
        cov = np.linalg.inv(ata)
    else:
        dof = max(len(data.x) - 2, 1)
        s2 = float(resid @ (w * resid)) / dof
        cov = np.linalg.inv(ata) * s2
    return LinearFit(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        slope_stderr=float(np.sqrt(max(cov[0, 0], 0.0))),
        intercept_stderr=float(np.sqrt(max(cov[1, 1], 0.0))),
        covariance=tuple(map(tuple, cov)),
    )


def metrics_to_json(metrics: PeakMetrics, path) -> None:
    payload = {
        "schema": "spinslab.peak_metrics",
        "schema_version": 1,
        "center_nm": metrics.center_nm,
        "sigma_nm": metrics.sigma_nm,
        "fwhm_nm": metrics.fwhm_nm,
        "areal_density_ppm_nm": metrics.areal_density_ppm_nm,
        "areal_density_atoms_cm2": metrics.areal_density_atoms_cm2,
        "volume_density_ppm": metrics.volume_density_ppm,
        "baseline": metrics.baseline,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
