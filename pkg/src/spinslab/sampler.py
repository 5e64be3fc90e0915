"""Random slab configurations and the dipolar mean-field distribution.

A probe spin sits at the origin of an Lx x Ly x t prism; bath spins are
placed uniformly at random inside the prism and each carries s = +/-1/2.
The mean field is the exact sum of secular pair couplings times s_i.

Reproducibility: sample ``i`` of a histogram run uses the RNG stream seeded
by ``SeedSequence([master_seed, i])``, which is platform-independent and
order-independent, so serial and parallel runs agree bit-exactly.
"""

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import EXCLUSION_RADIUS_NM, PPM_NM_TO_ATOMS_PER_NM2
from .dipolar import SpinAxis, angular_factor_many
from .constants import J0_DEFAULT
from .errors import ConfigurationError, DomainError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class InitializationModel:
    """Imperfect spin initialization: each spin flips with a fixed probability."""

    flipped_fraction: float = 0.33
    polarity: str = "bright"  # "bright": base s = +1/2; "dark": base s = -1/2

    def __post_init__(self):
        if not 0.0 <= self.flipped_fraction <= 1.0:
            raise ConfigurationError("flipped_fraction must be in [0, 1]")
        if self.polarity not in ("bright", "dark"):
            raise ConfigurationError("polarity must be 'bright' or 'dark'")


@dataclass(frozen=True)
class SlabEnsemble:
    """Slab dimensions, spin budget, axis, and RNG seed for sampling.

    Give either ``spin_count`` or ``areal_density_ppm_nm`` (converted to
    spins/nm^2 with the shared lattice density and rounded over the window).
    """

    axis: SpinAxis
    lateral_nm: tuple = (400.0, 400.0)
    thickness_nm: float = 0.0
    spin_count: int | None = None
    areal_density_ppm_nm: float | None = None
    rng_seed: int = 0
    init: InitializationModel = field(default_factory=InitializationModel)
    j0: float = J0_DEFAULT
    exclusion_radius_nm: float = EXCLUSION_RADIUS_NM

    def __post_init__(self):
        if (self.spin_count is None) == (self.areal_density_ppm_nm is None):
            raise ConfigurationError(
                "give exactly one of spin_count or areal_density_ppm_nm"
            )
        if self.spin_count is not None and self.spin_count < 0:
            raise ConfigurationError("spin_count must be >= 0")
        if self.thickness_nm < 0:
            raise ConfigurationError("thickness must be >= 0")

    def count_for(self, density_factor: float = 1.0) -> int:
        """Number of bath spins at ``density_factor`` times the base density."""
        if self.spin_count is not None:
            k = self.spin_count * density_factor
        else:
            area = self.lateral_nm[0] * self.lateral_nm[1]
            k = (
                self.areal_density_ppm_nm
                * PPM_NM_TO_ATOMS_PER_NM2
                * area
                * density_factor
            )
        k = int(round(k))
        if k < 0 or k > 10_000_000:
            raise ConfigurationError(f"spin count {k} out of range")
        return k


@dataclass(frozen=True)
class SpinConfiguration:
    """One concrete positional configuration with spin values +/-1/2."""

    positions_nm: np.ndarray  # (K, 3)
    spins: np.ndarray  # (K,), values +/-0.5

    def __post_init__(self):
        p = np.asarray(self.positions_nm, dtype=float).reshape(-1, 3)
        s = np.asarray(self.spins, dtype=float).reshape(-1)
        if len(p) != len(s):
            raise ConfigurationError("positions and spins length mismatch")
        object.__setattr__(self, "positions_nm", p)
        object.__setattr__(self, "spins", s)

    def flipped(self) -> "SpinConfiguration":
        """Same positions with every spin inverted (global flip)."""
        return SpinConfiguration(self.positions_nm, -self.spins)


@dataclass
class MeanFieldHistogram:
    """Binned on-site dipolar detunings (rad/s bins)."""

    bin_edges: np.ndarray
    counts: np.ndarray
    n_samples: int
    n_clipped: int
    metadata: dict

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def mirrored(self) -> "MeanFieldHistogram":
        """Histogram of the negated values; exact on symmetric bin edges."""
        edges = self.bin_edges
        if not np.allclose(edges, -edges[::-1]):
            raise ConfigurationError("mirroring requires bin edges symmetric about 0")
        return MeanFieldHistogram(
            bin_edges=edges.copy(),
            counts=self.counts[::-1].copy(),
            n_samples=self.n_samples,
            n_clipped=self.n_clipped,
            metadata={**self.metadata, "mirrored": True},
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "count"])
            for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
                w.writerow([f"{lo:.12g}", f"{hi:.12g}", int(c)])

    def to_json_dict(self) -> dict:
        return {
            "schema": "spinslab.mean_field_histogram",
            "schema_version": SCHEMA_VERSION,
            "bin_edges_rad_s": [float(x) for x in self.bin_edges],
            "counts": [int(c) for c in self.counts],
            "n_samples": self.n_samples,
            "n_clipped": self.n_clipped,
            "metadata": self.metadata,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def from_json_dict(cls, payload: dict) -> "MeanFieldHistogram":
        if payload.get("schema") != "spinslab.mean_field_histogram":
            raise ConfigurationError(
                f"not a mean-field histogram payload: {payload.get('schema')!r}"
            )
        return cls(
            bin_edges=np.asarray(payload["bin_edges_rad_s"], dtype=float),
            counts=np.asarray(payload["counts"], dtype=int),
            n_samples=int(payload["n_samples"]),
            n_clipped=int(payload["n_clipped"]),
            metadata=dict(payload.get("metadata", {})),
        )

    @classmethod
    def from_json(cls, path) -> "MeanFieldHistogram":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def _sample_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def _draw(rng, ensemble: SlabEnsemble, k: int) -> SpinConfiguration:
    lx, ly = ensemble.lateral_nm
    t = ensemble.thickness_nm
    for _ in range(100):
        pos = np.empty((k, 3))
        pos[:, 0] = rng.uniform(-lx / 2, lx / 2, k)
        pos[:, 1] = rng.uniform(-ly / 2, ly / 2, k)
        pos[:, 2] = rng.uniform(-t / 2, t / 2, k) if t > 0 else 0.0
        if k == 0 or np.linalg.norm(pos, axis=1).min() >= ensemble.exclusion_radius_nm:
            break
    else:
        raise DomainError("could not place spins outside the exclusion radius")
    base = 0.5 if ensemble.init.polarity == "bright" else -0.5
    flips = rng.random(k) < ensemble.init.flipped_fraction
    spins = np.where(flips, -base, base)
    return SpinConfiguration(pos, spins)


def sample_configuration(ensemble: SlabEnsemble, density_factor: float = 1.0) -> SpinConfiguration:
    """Draw one configuration from the ensemble's own seed."""
    rng = _sample_rng(ensemble.rng_seed, 0)
    return _draw(rng, ensemble, ensemble.count_for(density_factor))


def mean_field(
    config: SpinConfiguration,
    axis: SpinAxis,
    j0: float = J0_DEFAULT,
    exclusion_radius_nm: float = EXCLUSION_RADIUS_NM,
) -> float:
    """Net dipolar detuning at the origin, rad/s: sum_i (j0/r_i^3) f_i s_i."""
    if len(config.spins) == 0:
        return 0.0
    r = np.linalg.norm(config.positions_nm, axis=1)
    if r.min() < exclusion_radius_nm:
        raise DomainError(
            f"bath spin at {r.min():.4g} nm violates the exclusion radius"
        )
    f = angular_factor_many(axis, config.positions_nm)
    return float(np.sum(j0 / r**3 * f * config.spins))


def _histogram_chunk(ensemble: SlabEnsemble, k: int, indices) -> np.ndarray:
    vals = np.empty(len(indices))
    axis = ensemble.axis
    for j, i in enumerate(indices):
        rng = _sample_rng(ensemble.rng_seed, i)
        cfg = _draw(rng, ensemble, k)
        vals[j] = mean_field(cfg, axis, ensemble.j0, ensemble.exclusion_radius_nm)
    return vals


def mean_field_samples(
    ensemble: SlabEnsemble,
    n_samples: int,
    density_factor: float = 1.0,
    jobs: int = 1,
) -> np.ndarray:
    """Mean-field values for samples 0..n-1, in index order (rad/s).

    Deterministic for a given (seed, parameters) at any ``jobs`` setting.
    """
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    k = ensemble.count_for(density_factor)
    indices = np.arange(n_samples)
    if jobs <= 1:
        return _histogram_chunk(ensemble, k, indices)
    from concurrent.futures import ProcessPoolExecutor

    chunks = np.array_split(indices, jobs * 4)
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        parts = list(ex.map(_histogram_chunk, [ensemble] * len(chunks),
                            [k] * len(chunks), chunks))
    return np.concatenate(parts)


def mean_field_histogram(
    ensemble: SlabEnsemble,
    n_samples: int,
    density_factor: float = 0.70,
    clip_rad_s: float = 2 * np.pi * 2e6,
    n_bins: int = 400,
    jobs: int = 1,
) -> MeanFieldHistogram:
    """Histogram of mean fields over fresh configurations.

    Values outside +/-clip_rad_s are dropped from the bins and counted in
    ``n_clipped`` (the 1/r^3 near-neighbor tail is heavy, so raw moments are
    unstable; use median/quantile summaries).
    """
    if clip_rad_s <= 0 or n_bins < 2:
        raise ConfigurationError("need clip_rad_s > 0 and n_bins >= 2")
    vals = mean_field_samples(ensemble, n_samples, density_factor, jobs)
    edges = np.linspace(-clip_rad_s, clip_rad_s, n_bins + 1)
    inside = (vals >= edges[0]) & (vals <= edges[-1])
    counts, _ = np.histogram(vals[inside], bins=edges)
    meta = {
        "lateral_nm": list(ensemble.lateral_nm),
        "thickness_nm": ensemble.thickness_nm,
        "axis": list(ensemble.axis.unit_vector),
        "rng_seed": ensemble.rng_seed,
        "spin_count": ensemble.count_for(density_factor),
        "density_factor": density_factor,
        "flipped_fraction": ensemble.init.flipped_fraction,
        "polarity": ensemble.init.polarity,
        "clip_rad_s": clip_rad_s,
    }
    return MeanFieldHistogram(
        bin_edges=edges,
        counts=counts,
        n_samples=n_samples,
        n_clipped=int(n_samples - inside.sum()),
        metadata=meta,
    )


def flipped_ensemble(ensemble: SlabEnsemble) -> SlabEnsemble:
    """Same ensemble with the opposite initialization polarity."""
    pol = "dark" if ensemble.init.polarity == "bright" else "bright"
    return replace(ensemble, init=replace(ensemble.init, polarity=pol))


def histogram_sign_fraction(values: np.ndarray) -> dict:
    """Fractions of samples with negative / zero / positive mean field."""
    n = len(values)
    return {
        "negative": float(np.sum(values < 0)) / n,
        "zero": float(np.sum(values == 0)) / n,
        "positive": float(np.sum(values > 0)) / n,
    }


def asymmetry_about_zero(values: np.ndarray) -> float:
    """(N_right - N_left) / (N_right + N_left) about zero."""
    right = np.sum(values > 0)
    left = np.sum(values < 0)
    if right + left == 0:
        return 0.0
    return float(right - left) / float(right + left)


def bootstrap_se(values: np.ndarray, stat, n_boot: int = 200, seed: int = 1) -> float:
    """Bootstrap standard error of ``stat`` over resampled value sets."""
    rng = np.random.default_rng(seed)
    n = len(values)
    reps = [stat(values[rng.integers(0, n, n)]) for _ in range(n_boot)]
    return float(np.std(reps, ddof=1))
