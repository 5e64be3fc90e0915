"""AC magnetometry sensitivity budget and dipolar-limited scaling analysis.

The echo sensitivity is

    eta = (pi/2) (hbar / g_e mu_B) exp((tau/T2)^p) / (C_eff sqrt(N))
          * sqrt(t_m + tau) / tau        [T / sqrt(Hz)]

with sensing time tau, stretch exponent p, overhead t_m, readout efficiency
C_eff, and N participating spins.  Volume normalization replaces sqrt(N)
with sqrt(rho_3d * V) (equivalently multiplies by sqrt(V) when N = rho V).
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import GAMMA_E_RAD_PER_S_T, PPM_TO_ATOMS_PER_CM3
from .errors import ConfigurationError, DomainError, InputError
from .pulses import t2_from_density

# ppm -> spins per um^3 (1 cm^3 = 1e12 um^3).
PPM_TO_PER_UM3 = PPM_TO_ATOMS_PER_CM3 * 1e-12

_PREFACTOR_T_S = (np.pi / 2) / GAMMA_E_RAD_PER_S_T  # (pi/2) hbar/(g_e mu_B), T s


@dataclass(frozen=True)
class SensitivityBudget:
    """Inputs of one sensitivity evaluation (times in seconds)."""

    t2_s: float
    tau_s: float
    t_m_s: float
    c_eff: float
    n_spins: float
    stretch_p: float = 2.0 / 3.0
    rho_3d_ppm: float | None = None
    volume_um3: float | None = None
    layer_thickness_nm: float | None = None

    def __post_init__(self):
        if min(self.t2_s, self.tau_s) <= 0 or self.t_m_s < 0:
            raise ConfigurationError("t2 and tau must be > 0, t_m >= 0")
        if not 0 < self.c_eff <= 1:
            raise ConfigurationError("c_eff must be in (0, 1]")
        if self.n_spins <= 0:
            raise ConfigurationError("n_spins must be > 0")
        if not 0 < self.stretch_p <= 2:
            raise ConfigurationError("stretch_p must be in (0, 2]")

    @property
    def rho_per_um3(self) -> float | None:
        if self.rho_3d_ppm is None:
            return None
        return self.rho_3d_ppm * PPM_TO_PER_UM3


def _eta(tau, t2, p, t_m, c_eff, sqrt_n):
    return (
        _PREFACTOR_T_S
        * math.exp((tau / t2) ** p)
        / (c_eff * sqrt_n)
        * math.sqrt(t_m + tau)
        / tau
    )


def eta_echo(budget: SensitivityBudget) -> float:
    """Echo sensitivity in T / sqrt(Hz), using sqrt(N)."""
    return _eta(
        budget.tau_s,
        budget.t2_s,
        budget.stretch_p,
        budget.t_m_s,
        budget.c_eff,
        math.sqrt(budget.n_spins),
    )


@dataclass(frozen=True)
class VolumeNormalizedResult:
    value_t_um32: float  # T um^{3/2} / sqrt(Hz)
    consistency_warning: str | None


def volume_normalized(budget: SensitivityBudget) -> VolumeNormalizedResult:
    """Volume-normalized sensitivity: sqrt(N) replaced by sqrt(rho_3d).

    Identical to eta_echo * sqrt(V) when N = rho * V; a >1% inconsistency in
    the (N, rho, V) triple is reported as a warning, not an error.
    """
    rho = budget.rho_per_um3
    if rho is None:
        raise ConfigurationError("rho_3d_ppm is required for volume normalization")
    value = _eta(
        budget.tau_s,
        budget.t2_s,
        budget.stretch_p,
        budget.t_m_s,
        budget.c_eff,
        math.sqrt(rho),
    )
    warning = None
    if budget.volume_um3 is not None:
        implied = rho * budget.volume_um3
        if implied > 0 and abs(implied - budget.n_spins) / implied > 0.01:
            warning = (
                f"N = {budget.n_spins:g} differs from rho*V = {implied:.4g} "
                "by more than 1%"
            )
    return VolumeNormalizedResult(value_t_um32=value, consistency_warning=warning)


@dataclass(frozen=True)
class OptimalTau:
    tau_s: float
    alpha_p: float
    eta: float
    warning: str | None


def optimal_tau(t2_s: float, p: float, t_m_s: float) -> OptimalTau:
    """Sensing time minimizing eta over (0, 10 T2]; alpha_p = tau*/T2.

    The minimizer is checked against 64 log-spaced candidates; if the grid
    beats the scalar minimizer the grid minimum is returned with a warning.
    """
    if t2_s <= 0 or p <= 0 or t_m_s < 0:
        raise DomainError("t2 and p must be > 0, t_m >= 0")

    def f(tau):
        return _eta(tau, t2_s, p, t_m_s, 1.0, 1.0)

    res = minimize_scalar(
        f, bounds=(1e-6 * t2_s, 10 * t2_s), method="bounded",
        options={"xatol": 1e-12 * t2_s},
    )
    tau_star, eta_star = float(res.x), float(res.fun)
    grid = np.logspace(np.log10(1e-4 * t2_s), np.log10(10 * t2_s), 64)
    etas = np.array([f(t) for t in grid])
    warning = None
    if etas.min() < eta_star:
        i = int(np.argmin(etas))
        tau_star, eta_star = float(grid[i]), float(etas[i])
        warning = "scalar minimization beaten by grid; returning grid minimum"
    return OptimalTau(tau_s=tau_star, alpha_p=tau_star / t2_s, eta=eta_star,
                      warning=warning)


@dataclass(frozen=True)
class ScalingExponent:
    exponent: float
    stderr: float
    densities: tuple
    normalized_eta: tuple
    mode: str


def scaling_report(
    dimension: int,
    densities_ppm_nm=None,
    thickness_nm: float = 10.0,
    densities_ppm=None,
    calibration: float = 1.0,
    p: float | None = None,
) -> dict:
    """Log-log scaling of normalized optimal-tau sensitivity with density.

    3D: sweep the volume density (ppm); the dipolar-limited T2 falls as
    1/rho and the volume-normalized sensitivity is density-independent.

    2D: sweep the areal density (ppm nm) at fixed volume density, i.e. the
    layer thickness grows with the areal density (rho_2d = rho_3d * w with
    rho_3d pinned by ``thickness_nm`` at the first sweep point).  The
    area-normalized sensitivity then scales as rho_2d^{1/4} and the
    volume-normalized one as rho_2d^{3/4}.
    """
    if dimension == 3:
        if densities_ppm is None:
            raise InputError("3D sweep requires densities_ppm")
        rho = np.asarray(densities_ppm, dtype=float)
        _check_sweep(rho)
        t2 = np.array([t2_from_density(r, 3, calibration) for r in rho])
        p_eff = 1.0 if p is None else p
        eta_vol = _optimal_eta_over(t2, p_eff) / np.sqrt(rho)
        exp_vol = _loglog_fit(rho, eta_vol)
        return {
            "dimension": 3,
            "volume_normalized": ScalingExponent(
                *exp_vol, tuple(rho), tuple(eta_vol), "volume"
            ),
        }
    if dimension == 2:
        if densities_ppm_nm is None:
            raise InputError("2D sweep requires densities_ppm_nm")
        rho2 = np.asarray(densities_ppm_nm, dtype=float)
        _check_sweep(rho2)
        if thickness_nm <= 0:
            raise InputError("thickness must be > 0")
        rho3_fixed = rho2[0] / thickness_nm  # ppm, held constant
        w = rho2 / rho3_fixed  # nm, grows with areal density
        t2 = np.array([t2_from_density(r, 2, calibration) for r in rho2])
        p_eff = 2.0 / 3.0 if p is None else p
        eta0 = _optimal_eta_over(t2, p_eff)
        eta_area = eta0 / np.sqrt(rho2)
        eta_vol = eta_area * np.sqrt(w)
        return {
            "dimension": 2,
            "rho_3d_ppm_fixed": rho3_fixed,
            "area_normalized": ScalingExponent(
                *_loglog_fit(rho2, eta_area), tuple(rho2), tuple(eta_area), "area"
            ),
            "volume_normalized": ScalingExponent(
                *_loglog_fit(rho2, eta_vol), tuple(rho2), tuple(eta_vol), "volume"
            ),
        }
    raise InputError("dimension must be 2 or 3")


def _check_sweep(rho: np.ndarray) -> None:
    if len(rho) < 5 or rho.min() <= 0:
        raise InputError("density sweep needs >= 5 positive points")
    if rho.max() / rho.min() < 10:
        raise InputError("density sweep must span at least one decade")


def _optimal_eta_over(t2s: np.ndarray, p: float) -> np.ndarray:
    return np.array([optimal_tau(t2, p, 0.0).eta for t2 in t2s])


def _loglog_fit(x, y) -> tuple[float, float]:
    lx, ly = np.log(np.asarray(x)), np.log(np.asarray(y))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    dof = max(len(lx) - 2, 1)
    s2 = float(res[0]) / dof if len(res) else 0.0
    cov = np.linalg.inv(A.T @ A) * s2
    return float(coef[0]), float(np.sqrt(max(cov[0, 0], 0.0)))


@dataclass(frozen=True)
class DroidCondition:
    favorable: bool
    margin: float


def droid_condition(t2_xy8_s: float, t2_droid_s: float) -> DroidCondition:
    """Interaction-decoupled sensing beats the echo iff T2_droid > 3 T2_xy8."""
    if t2_xy8_s <= 0 or t2_droid_s <= 0:
        raise DomainError("coherence times must be > 0")
    margin = t2_droid_s / (3.0 * t2_xy8_s)
    return DroidCondition(favorable=margin > 1.0, margin=margin)


def c_eff_from_readout(contrast: float, pl_count_rate_hz: float,
                       t_readout_s: float, n_spins: float) -> float:
    """Helper for C_eff = C sqrt(PL t_R / N); never substituted implicitly."""
    if min(contrast, pl_count_rate_hz, t_readout_s, n_spins) <= 0:
        raise DomainError("all readout inputs must be > 0")
    return contrast * math.sqrt(pl_count_rate_hz * t_readout_s / n_spins)


def convention_report(budget: SensitivityBudget) -> dict:
    """Sensitivity under each plausible normalization convention.

    The published per-sample values do not follow from one unambiguous
    normalization, so every candidate is reported side by side instead of
    asserted: sqrt(N) (raw), eta * sqrt(V), sqrt(rho V), and the direct
    rho substitution.
    """
    out = {
        "inputs": {
            "t2_us": budget.t2_s * 1e6,
            "tau_us": budget.tau_s * 1e6,
            "t_m_us": budget.t_m_s * 1e6,
            "c_eff": budget.c_eff,
            "n_spins": budget.n_spins,
            "stretch_p": budget.stretch_p,
            "rho_3d_ppm": budget.rho_3d_ppm,
            "volume_um3": budget.volume_um3,
        },
        "eta_sqrtN_t_hz": eta_echo(budget),
    }
    if budget.volume_um3 is not None:
        out["eta_sqrtN_times_sqrtV_t_um32"] = eta_echo(budget) * math.sqrt(
            budget.volume_um3
        )
        if budget.rho_3d_ppm is not None:
            n_rho_v = budget.rho_per_um3 * budget.volume_um3
            out["eta_sqrt_rhoV_times_sqrtV_t_um32"] = _eta(
                budget.tau_s, budget.t2_s, budget.stretch_p, budget.t_m_s,
                budget.c_eff, math.sqrt(n_rho_v),
            ) * math.sqrt(budget.volume_um3)
    if budget.rho_3d_ppm is not None:
        res = volume_normalized(budget)
        out["eta_rho_substitution_t_um32"] = res.value_t_um32
        if res.consistency_warning:
            out["consistency_warning"] = res.consistency_warning
    return out


def report_to_json(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=str)
