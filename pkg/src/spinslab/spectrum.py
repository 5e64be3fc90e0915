"""Lineshape synthesis from mean-field histograms, plus width/asymmetry analysis.

Spectra live on a uniform frequency grid in kHz of detuning.  The synthesis
pipeline mirrors the measurement model: mix in a fraction of the mirrored
histogram for imperfect initialization, deposit the histogram on the grid,
convolve with a Lorentzian of width 2*alpha*Omega (power broadening plus
residual disorder), and normalize to unit area.
"""

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit

from .errors import AnalysisError, FitError, InputError, ResolutionError
from .sampler import InitializationModel, MeanFieldHistogram

RAD_S_TO_KHZ = 1.0 / (2 * np.pi * 1e3)


@dataclass
class Spectrum:
    """Amplitude vs detuning on a strictly increasing uniform grid (kHz)."""

    frequencies_khz: np.ndarray
    amplitudes: np.ndarray
    normalization: str = "none"  # "none" or "unit_area"
    center_khz: float | None = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        f = np.asarray(self.frequencies_khz, dtype=float)
        a = np.asarray(self.amplitudes, dtype=float)
        if f.ndim != 1 or f.shape != a.shape or len(f) < 2:
            raise InputError("frequency and amplitude arrays must match, length >= 2")
        steps = np.diff(f)
        if steps.min() <= 0:
            raise InputError("frequency grid must be strictly increasing")
        # Tolerance covers both relative step jitter and the float rounding
        # of linspace-style grids with large endpoint magnitudes.
        tol = 1e-9 * abs(steps.mean()) + 16 * np.finfo(float).eps * np.abs(f).max()
        if (steps.max() - steps.min()) > tol:
            raise InputError("frequency grid must be uniform")
        self.frequencies_khz = f
        self.amplitudes = a

    @property
    def step_khz(self) -> float:
        return float(self.frequencies_khz[1] - self.frequencies_khz[0])

    def area(self) -> float:
        return float(np.trapezoid(self.amplitudes, self.frequencies_khz))

    def normalized(self) -> "Spectrum":
        a = self.area()
        if a == 0:
            raise InputError("cannot area-normalize a zero spectrum")
        return replace(self, amplitudes=self.amplitudes / a, normalization="unit_area")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency_khz", "amplitude"])
            for f, a in zip(self.frequencies_khz, self.amplitudes):
                w.writerow([f"{f:.12g}", f"{a:.12g}"])

    def to_json_dict(self) -> dict:
        return {
            "schema": "spinslab.spectrum",
            "schema_version": 1,
            "frequencies_khz": [float(x) for x in self.frequencies_khz],
            "amplitudes": [float(x) for x in self.amplitudes],
            "normalization": self.normalization,
            "center_khz": self.center_khz,
            "warnings": list(self.warnings),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class BroadeningModel:
    """Lorentzian broadening of FWHM 2*alpha*Omega plus initialization mixing."""

    probe_rabi_rad_s: float
    alpha: float = 1.0
    initialization: InitializationModel = field(default_factory=InitializationModel)

    def __post_init__(self):
        if self.probe_rabi_rad_s <= 0:
            raise InputError("probe Rabi frequency must be > 0")
        if not 1.0 <= self.alpha <= 1.2:
            raise InputError("alpha must be in [1, 1.2]")

    @property
    def fwhm_khz(self) -> float:
        return 2 * self.alpha * self.probe_rabi_rad_s * RAD_S_TO_KHZ


def _lorentzian(x, center, fwhm, amplitude, background):
    hw = fwhm / 2.0
    return background + amplitude * hw**2 / ((x - center) ** 2 + hw**2)


def convolve_lorentzian(spec: Spectrum, fwhm_khz: float) -> Spectrum:
    """Convolve with a unit-area Lorentzian; output on the same grid.

    The discrete kernel is renormalized on the grid and the output area is
    restored to the input area, so the heavy Lorentzian tails truncated by
    the finite window do not leak normalization.
    """
    if fwhm_khz <= 0:
        raise InputError("fwhm must be > 0")
    step = spec.step_khz
    if step > fwhm_khz / 4:
        raise ResolutionError(
            f"grid step {step:.4g} kHz too coarse for fwhm {fwhm_khz:.4g} kHz"
        )
    warnings = list(spec.warnings)
    span = spec.frequencies_khz[-1] - spec.frequencies_khz[0]
    if span < 10 * fwhm_khz:
        warnings.append(
            f"grid span {span:.4g} kHz < 10 x fwhm {fwhm_khz:.4g} kHz; "
            "tails are truncated"
        )
    n = len(spec.frequencies_khz)
    offsets = (np.arange(2 * n - 1) - (n - 1)) * step
    hw = fwhm_khz / 2.0
    kernel = hw / np.pi / (offsets**2 + hw**2)
    kernel /= kernel.sum() * step
    # Kernel center sits at index n-1 of the (2n-1)-long kernel, so output
    # sample i is full-convolution sample i + (n-1).
    full = np.convolve(spec.amplitudes, kernel, mode="full")
    out = full[n - 1 : 2 * n - 1] * step
    area_in = spec.area()
    area_out = float(np.trapezoid(out, spec.frequencies_khz))
    if area_out > 0 and area_in > 0:
        out *= area_in / area_out
    return replace(spec, amplitudes=out, warnings=warnings)


def synthesize_spectrum(
    hist: MeanFieldHistogram,
    model: BroadeningModel,
    schedule=None,
    n_points: int = 1001,
    half_span_khz: float | None = None,
    normalize: bool = True,
) -> Spectrum:
    """Predicted probe lineshape for a mean-field histogram.

    When a pulse schedule is supplied the detuning axis is the probe offset
    from the comb-shifted carrier: the decoupling drive halves the
    interaction shift, and the grid center is recorded as the comb offset
    1/(4*tau_p).  Without a schedule the raw mean-field axis is used.
    """
    if hist.counts.sum() == 0:
        raise InputError("histogram is empty")
    centers_khz = hist.bin_centers * RAD_S_TO_KHZ
    counts = hist.counts.astype(float)

    f = model.initialization.flipped_fraction
    if model.initialization.polarity == "dark":
        counts = counts[::-1].copy()
    counts = (1 - f) * counts + f * counts[::-1]

    scale = 1.0
    center_khz = 0.0
    if schedule is not None:
        scale = 0.5
        center_khz = schedule.comb_offset_hz() / 1e3
    values_khz = centers_khz * scale

    fwhm = model.fwhm_khz
    if half_span_khz is None:
        support = float(np.max(np.abs(values_khz[counts > 0]), initial=0.0))
        half_span_khz = max(25 * fwhm, 1.1 * support + 5 * fwhm)
    grid = np.linspace(-half_span_khz, half_span_khz, n_points)
    step = grid[1] - grid[0]

    # Linear deposition preserves total weight and first moment.
    amps = np.zeros_like(grid)
    pos = (values_khz - grid[0]) / step
    lo = np.clip(np.floor(pos).astype(int), 0, n_points - 2)
    frac = np.clip(pos - lo, 0.0, 1.0)
    np.add.at(amps, lo, counts * (1 - frac))
    np.add.at(amps, lo + 1, counts * frac)
    amps /= step

    spec = Spectrum(grid + center_khz, amps, center_khz=center_khz)
    spec = convolve_lorentzian(spec, fwhm)
    return spec.normalized() if normalize else spec


def _background(spec: Spectrum, edge_fraction: float = 0.10) -> float:
    n = max(2, int(len(spec.frequencies_khz) * edge_fraction))
    edges = np.concatenate([spec.amplitudes[:n], spec.amplitudes[-n:]])
    return float(np.median(edges))


def asymmetry_beta(
    spec: Spectrum,
    center_khz: float | None = None,
    subtract_background: bool = True,
) -> float:
    """Normalized left/right area difference about the spectrum center.

    beta = (A_right - A_left) / (A_right + A_left); positive beta means more
    area at higher probe frequency.  Center priority: explicit argument, the
    spectrum's recorded drive center, then a Lorentzian-fit center.
    """
    if center_khz is None:
        center_khz = spec.center_khz
    if center_khz is None:
        center_khz = fit_lorentzian(spec).center_khz
    amps = spec.amplitudes - (_background(spec) if subtract_background else 0.0)
    # Negative residuals after background subtraction carry no area; clipping
    # also keeps beta inside [-1, 1] by construction.
    amps = np.clip(amps, 0.0, None)
    f = spec.frequencies_khz
    # Split the trapezoidal integral exactly at the center (interpolated), so
    # beta varies smoothly when the center moves by a sub-grid amount.
    cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (amps[1:] + amps[:-1]) * np.diff(f))]
    )
    total = float(cum[-1])
    if total == 0:
        raise AnalysisError("zero total area; beta undefined")
    a_left = float(np.interp(center_khz, f, cum))
    a_right = total - a_left
    return (a_right - a_left) / total


@dataclass(frozen=True)
class LorentzianFit:
    center_khz: float
    fwhm_khz: float
    amplitude: float
    background: float
    stderr: tuple  # (center, fwhm, amplitude, background)
    converged: bool
    residual_norm: float


def fit_lorentzian(spec: Spectrum, maxfev: int = 10000) -> LorentzianFit:
    """Nonlinear least-squares Lorentzian fit (center, fwhm, amplitude, bg)."""
    x = spec.frequencies_khz
    y = spec.amplitudes
    if len(x) < 10:
        raise FitError("need at least 10 points for a Lorentzian fit")
    bg0 = _background(spec)
    i_peak = int(np.argmax(y))
    amp0 = float(y[i_peak] - bg0)
    if amp0 <= 0:
        raise FitError("no peak above background")
    half = bg0 + amp0 / 2
    above = np.nonzero(y >= half)[0]
    fwhm0 = max(float(x[above[-1]] - x[above[0]]), 2 * spec.step_khz)
    p0 = [float(x[i_peak]), fwhm0, amp0, bg0]
    try:
        popt, pcov = curve_fit(_lorentzian, x, y, p0=p0, maxfev=maxfev)
    except RuntimeError as exc:
        resid = float(np.linalg.norm(y - _lorentzian(x, *p0)))
        raise FitError(f"Lorentzian fit did not converge (residual {resid:.3g})") from exc
    resid = float(np.linalg.norm(y - _lorentzian(x, *popt)))
    err = np.sqrt(np.clip(np.diag(pcov), 0, None))
    return LorentzianFit(
        center_khz=float(popt[0]),
        fwhm_khz=abs(float(popt[1])),
        amplitude=float(popt[2]),
        background=float(popt[3]),
        stderr=tuple(float(e) for e in err),
        converged=True,
        residual_norm=resid,
    )


def delta_spectrum(
    center_khz: float, half_span_khz: float, n_points: int = 1001
) -> Spectrum:
    """Unit-weight spike at the grid point nearest ``center_khz`` (test helper)."""
    grid = np.linspace(-half_span_khz, half_span_khz, n_points)
    amps = np.zeros_like(grid)
    idx = int(np.argmin(np.abs(grid - center_khz)))
    amps[idx] = 1.0 / (grid[1] - grid[0])
    return Spectrum(grid, amps, center_khz=center_khz)
