"""Decoupled-probe (XY8-ODMR) sequence machinery.

Covers: the piecewise +/-1 toggling-frame coefficients of the eight-pulse
block, time averages of the toggled Hamiltonian terms, the frequency comb
seen by the weak probe drive, stretched-exponential coherence modeling and
fitting, the coherence-time/density scaling relation, and a brute-force
propagation oracle for small systems.

The eight pi pulses divide one period 8*tau_p into intervals
n = floor(t / tau_p) in {0..7}.  The interaction term is active only on
even-n intervals (the driven spin alternates between its coupled and
uncoupled states), while the sign coefficient c_z alternates every pulse, so
static detunings average to zero and the interaction survives at half
strength.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, FitError, InputError
from .sampler import SpinConfiguration, mean_field
from .constants import J0_DEFAULT
from .dipolar import SpinAxis
from .spectrum import Spectrum

# Interval sets (n = floor(t/tau_p) mod 8) on which each coefficient is +1.
_CX_PLUS = frozenset({0, 3, 6, 7})
_CY_PLUS = frozenset({2, 3, 4, 7})


@dataclass(frozen=True)
class PulseSchedule:
    """Timing and drive parameters of one decoupled-probe run.

    ``tau_p_s`` is the pi-pulse spacing in seconds.  The probe pi-pulse
    length pi/omega_probe should match the total decoupling duration
    8 * n_reps * tau_p; a mismatch beyond half a period raises, smaller
    mismatches are allowed (experimental parameter sets round n_reps).
    """

    tau_p_s: float
    n_reps: int
    omega_probe_rad_s: float
    omega_pump_rad_s: float = 2 * np.pi * 12.5e6
    phase: float = 0.0
    f_nv_hz: float = 0.0

    def __post_init__(self):
        if self.tau_p_s <= 0 or self.n_reps < 1 or self.omega_probe_rad_s <= 0:
            raise ConfigurationError("tau_p, n_reps, omega_probe must be positive")
        mismatch = abs(self.total_duration_s - np.pi / self.omega_probe_rad_s)
        if mismatch > 4 * self.tau_p_s:
            raise ConfigurationError(
                "decoupling duration 8*n_reps*tau_p differs from the probe "
                f"pi-pulse length by {mismatch:.3g} s (> half a period)"
            )

    @classmethod
    def matched(cls, tau_p_s: float, n_reps: int, **kwargs) -> "PulseSchedule":
        """Schedule whose probe pi-pulse length equals the decoupling duration."""
        omega_probe = np.pi / (8 * n_reps * tau_p_s)
        return cls(tau_p_s, n_reps, omega_probe, **kwargs)

    @classmethod
    def from_probe(
        cls, tau_p_s: float, omega_probe_rad_s: float, **kwargs
    ) -> "PulseSchedule":
        """Schedule with n_reps rounded to match a given probe Rabi frequency."""
        n = max(1, round(np.pi / (omega_probe_rad_s * 8 * tau_p_s)))
        return cls(tau_p_s, int(n), omega_probe_rad_s, **kwargs)

    @property
    def period_s(self) -> float:
        return 8 * self.tau_p_s

    @property
    def total_duration_s(self) -> float:
        return self.n_reps * self.period_s

    def comb_spacing_hz(self) -> float:
        return 1.0 / self.period_s

    def comb_offset_hz(self) -> float:
        """Offset of the probe sweep center from the carrier: 1/(4 tau_p)."""
        return 2.0 / self.period_s


def toggling_coefficients(t, tau_p: float):
    """Toggling-frame coefficients (c_x, c_y, c_z) at time(s) t, values +/-1.

    Periodic with period 8*tau_p; t is reduced modulo the period.
    """
    if tau_p <= 0:
        raise DomainError("tau_p must be > 0")
    n = (np.floor(np.asarray(t, dtype=float) / tau_p).astype(int)) % 8
    cx = np.where(np.isin(n, list(_CX_PLUS)), 1, -1)
    cy = np.where(np.isin(n, list(_CY_PLUS)), 1, -1)
    cz = np.where(n % 2 == 0, 1, -1)
    if np.isscalar(t):
        return int(cx), int(cy), int(cz)
    return cx, cy, cz


def interaction_gate(t, tau_p: float):
    """1 on even intervals (interaction active), 0 on odd intervals."""
    n = (np.floor(np.asarray(t, dtype=float) / tau_p).astype(int)) % 8
    g = (n % 2 == 0).astype(float)
    return float(g) if np.isscalar(t) else g


def average_hamiltonian(
    schedule: PulseSchedule, omega_disorder: float, omega_nv: float
) -> tuple[float, float]:
    """Period averages of the toggled detuning terms (exact, piecewise).

    Returns (disorder_avg, interaction_avg): the static detuning averages to
    zero, the gated interaction to omega_nv / 2.
    """
    # Piecewise-constant integrands: sum over the 8 unit intervals.
    cz = np.array([1 if n % 2 == 0 else -1 for n in range(8)], dtype=float)
    gate = np.array([1.0 if n % 2 == 0 else 0.0 for n in range(8)])
    disorder_avg = omega_disorder * cz.mean()
    interaction_avg = omega_nv * float((gate * cz).mean())
    return float(disorder_avg), interaction_avg


@dataclass(frozen=True)
class CombTooth:
    index: int
    offset_hz: float  # effective drive offset from the swept frequency
    amplitude: float  # fraction of the bare probe Rabi frequency


@dataclass(frozen=True)
class FrequencyComb:
    spacing_hz: float
    teeth: tuple
    probe_tooth: int = -2

    def tooth(self, index: int) -> CombTooth:
        for t in self.teeth:
            if t.index == index:
                return t
        raise InputError(f"tooth {index} not computed")

    def resonance_offset_hz(self, index: int | None = None) -> float:
        """Sweep offset at which tooth ``index`` hits a zero-detuning spin."""
        if index is None:
            index = self.probe_tooth
        return -index * self.spacing_hz


def frequency_comb(
    schedule: PulseSchedule, n_teeth: int = 8, probe_tooth: int = -2
) -> FrequencyComb:
    """Fourier decomposition of the toggled probe drive.

    The toggled drive c_x cos(w_d t + phi) S_x + c_y sin(w_d t + phi) S_y
    couples to the spin through the co-rotating envelope
    m(t) = (c_x(t) + c_y(t)) / 2, whose Fourier series over one period gives
    effective drive components at w_d + n / (8 tau_p) with relative
    amplitude |m_{-n}|.  Tooth n = -2 reproduces the +1/(4 tau_p) sweep
    center offset.
    """
    tau = schedule.tau_p_s
    T = schedule.period_s
    ns = np.arange(8)
    cx = np.where(np.isin(ns, list(_CX_PLUS)), 1.0, -1.0)
    cy = np.where(np.isin(ns, list(_CY_PLUS)), 1.0, -1.0)
    m = (cx + cy) / 2.0  # piecewise constant on [n tau, (n+1) tau)
    teeth = []
    for k in range(-n_teeth, n_teeth + 1):
        if k == 0:
            coeff = m.mean() + 0j
        else:
            w = 2 * np.pi * k / T
            # Exact integral of the piecewise-constant envelope.
            seg = (np.exp(-1j * w * (ns + 1) * tau) - np.exp(-1j * w * ns * tau)) / (
                -1j * w
            )
            coeff = np.sum(m * seg) / T
        teeth.append(
            CombTooth(index=-k, offset_hz=-k / T, amplitude=float(np.abs(coeff)))
        )
    teeth.sort(key=lambda t: t.index)
    return FrequencyComb(
        spacing_hz=schedule.comb_spacing_hz(),
        teeth=tuple(teeth),
        probe_tooth=probe_tooth,
    )


def coherence_model(t, t2: float, n: float):
    """Stretched-exponential coherence exp(-(t/T2)^n)."""
    if t2 <= 0 or n <= 0:
        raise DomainError("T2 and n must be > 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    return np.exp(-((t / t2) ** n))


@dataclass(frozen=True)
class StretchFit:
    t2: float
    n: float
    t2_stderr: float
    n_stderr: float
    n_points_used: int


def fit_stretch(
    times,
    coherence,
    early_time_cutoff: float | None = None,
    sigma=None,
) -> StretchFit:
    """Early-time stretched-exponential fit via log(-log C) regression.

    Uses points with t <= cutoff and C in (0.02, 0.98); the default cutoff
    is the first time the curve crosses C = 0.5.  Slope of
    log(-log C) vs log t is the stretch exponent; the intercept fixes T2.
    """
    t = np.asarray(times, dtype=float)
    c = np.asarray(coherence, dtype=float)
    if early_time_cutoff is None:
        below = np.nonzero(c <= 0.5)[0]
        early_time_cutoff = t[below[0]] if len(below) else t[-1]
    keep = (t > 0) & (t <= early_time_cutoff) & (c > 0.02) & (c < 0.98)
    if keep.sum() < 8:
        raise FitError(
            f"only {int(keep.sum())} usable points below the cutoff; need >= 8"
        )
    x = np.log(t[keep])
    y = np.log(-np.log(c[keep]))
    if sigma is not None:
        s = np.asarray(sigma, dtype=float)[keep]
        # Propagate coherence uncertainty onto the doubly-logged ordinate.
        w = np.abs(c[keep] * np.log(c[keep])) / s
    else:
        w = np.ones_like(x)
    W = np.diag(w**2)
    A = np.vstack([x, np.ones_like(x)]).T
    ata = A.T @ W @ A
    coef = np.linalg.solve(ata, A.T @ W @ y)
    slope, intercept = coef
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    scale = float(resid @ W @ resid) / dof if sigma is None else 1.0
    cov = np.linalg.inv(ata) * scale
    n = float(slope)
    t2 = float(np.exp(-intercept / n))
    # Delta method for T2 = exp(-b/a).
    grad = np.array([intercept / n**2, -1.0 / n]) * t2
    t2_var = float(grad @ cov @ grad)
    return StretchFit(
        t2=t2,
        n=n,
        t2_stderr=float(np.sqrt(max(t2_var, 0.0))),
        n_stderr=float(np.sqrt(max(cov[0, 0], 0.0))),
        n_points_used=int(keep.sum()),
    )


def density_from_t2(
    t2: float, dimension: int, calibration: float, j0: float = J0_DEFAULT
) -> float:
    """Dipolar-limited density from a coherence time: rho = T2^{-D/3} / (c J^{D/3}).

    ``calibration`` is the dimensionless proportionality constant; there is
    no default because the absolute constant is sample-protocol specific.
    """
    if t2 <= 0:
        raise DomainError("T2 must be > 0")
    if dimension not in (2, 3):
        raise DomainError("dimension must be 2 or 3")
    if calibration is None or calibration <= 0:
        raise ConfigurationError("a positive calibration constant is required")
    d3 = dimension / 3.0
    return (1.0 / t2**d3) / (calibration * j0**d3)


def t2_from_density(
    rho: float, dimension: int, calibration: float, j0: float = J0_DEFAULT
) -> float:
    """Inverse of density_from_t2; round-trips exactly."""
    if rho <= 0:
        raise DomainError("density must be > 0")
    if dimension not in (2, 3):
        raise DomainError("dimension must be 2 or 3")
    if calibration is None or calibration <= 0:
        raise ConfigurationError("a positive calibration constant is required")
    d3 = dimension / 3.0
    return (1.0 / (rho * calibration * j0**d3)) ** (1.0 / d3)


def _su2_apply(psi, hx, hy, hz, dt):
    """Apply exp(-i (h . sigma) dt / 2) to each state row of psi (F, 2)."""
    mag = np.sqrt(hx * hx + hy * hy + hz * hz)
    a = mag * dt / 2.0
    c = np.cos(a)
    s = np.where(mag > 0, np.sin(a) / np.where(mag > 0, mag, 1.0), dt / 2.0)
    nxs, nys, nzs = hx * s, hy * s, hz * s
    u00 = c - 1j * nzs
    u01 = -1j * nxs - nys
    u10 = -1j * nxs + nys
    u11 = c + 1j * nzs
    p0, p1 = psi[:, 0], psi[:, 1]
    return np.stack([u00 * p0 + u01 * p1, u10 * p0 + u11 * p1], axis=1)


def exact_small_n_oracle(
    config: SpinConfiguration,
    schedule: PulseSchedule,
    sweep_offsets_hz,
    axis: SpinAxis | None = None,
    omega_disorder: float = 0.0,
    j0: float = J0_DEFAULT,
    steps_per_tau: int = 64,
) -> Spectrum:
    """Brute-force propagation of the driven probe spin through the sequence.

    The probe couples to the (classical, static) bath spins through the
    secular Ising sum; pulses are ideal and the full time-dependent
    toggling-frame Hamiltonian is integrated step by step for every probe
    offset in ``sweep_offsets_hz`` (relative to the carrier).  Returns the
    final-state transfer population spectrum; for a weak probe the peak
    sits at half the Ising shift plus the comb offset 1/(4 tau_p).
    """
    if len(config.spins) > 10:
        raise DomainError("oracle is limited to at most 10 bath spins")
    if axis is None:
        axis = SpinAxis((0.0, 0.0, 1.0))
    b = mean_field(config, axis, j0) if len(config.spins) else 0.0

    offsets = np.asarray(sweep_offsets_hz, dtype=float)
    omega_d = 2 * np.pi * offsets  # rad/s, per sweep point
    tau = schedule.tau_p_s
    dt = tau / steps_per_tau
    omega = schedule.omega_probe_rad_s
    phi = schedule.phase

    psi = np.zeros((len(offsets), 2), dtype=complex)
    psi[:, 0] = 1.0

    n_steps = 8 * schedule.n_reps * steps_per_tau
    for step in range(n_steps):
        t_mid = (step + 0.5) * dt
        n = int(t_mid / tau) % 8
        cx = 1.0 if n in _CX_PLUS else -1.0
        cy = 1.0 if n in _CY_PLUS else -1.0
        cz = 1.0 if n % 2 == 0 else -1.0
        gate = 1.0 if n % 2 == 0 else 0.0
        hz = (omega_disorder + gate * b) * cz
        ph = omega_d * t_mid + phi
        hx = omega * np.cos(ph) * cx
        hy = omega * np.sin(ph) * cy
        psi = _su2_apply(psi, hx, hy, np.full_like(hx, hz), dt)

    pop = np.abs(psi[:, 1]) ** 2
    return Spectrum(offsets / 1e3, pop, center_khz=schedule.comb_offset_hz() / 1e3)
