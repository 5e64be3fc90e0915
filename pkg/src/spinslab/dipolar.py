"""Dipolar coupling between co-aligned point spins and configurational averages.

All spins share one quantization axis ``m``.  For a pair separated by ``r``
the secular (Ising) coupling is

    J(r) = (j0 / |r|^3) * (3 (m . r_hat)^2 - 1),

with ``j0`` a signed prefactor in rad/s * nm^3.  The default ``j0`` is the
calibrated +2*pi*52 MHz nm^3; the textbook magnetostatic form
-mu0 m^2 / (4 pi r^3) corresponds to a negative prefactor of the same
structure, so the sign convention is carried entirely by ``j0``.

Configurational averages are normalized (measure-weighted) means of the
angular factor over a geometry, so they are pure numbers; multiply by the
geometry's measure to recover unnormalized integral forms.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

from .constants import EXCLUSION_RADIUS_NM, J0_DEFAULT
from .errors import DomainError, NormalizationError, NumericalError

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class SpinAxis:
    """Unit vector of the common spin quantization axis, in slab coordinates.

    z is the slab normal.
    """

    unit_vector: tuple

    def __post_init__(self):
        v = np.asarray(self.unit_vector, dtype=float)
        if v.shape != (3,):
            raise NormalizationError("spin axis must be a 3-vector")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-12:
            raise NormalizationError(
                f"spin axis must be unit-normalized (|v| = {norm:.15g})"
            )
        object.__setattr__(self, "unit_vector", tuple(float(x) for x in v))

    @classmethod
    def from_direction(cls, v) -> "SpinAxis":
        """Normalize an arbitrary non-zero direction into a SpinAxis."""
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise NormalizationError("zero vector has no direction")
        return cls(tuple(v / norm))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.unit_vector)


# Spins along the slab normal: the native axis of a (111)-oriented slab.
NORMAL_111 = SpinAxis((0.0, 0.0, 1.0))

# The [1,1,1] axis of a slab whose normal is [0,0,1]; tilted from the plane
# by the magic angle 54.7356 deg.
MAGIC_001 = SpinAxis((1 / np.sqrt(3), 1 / np.sqrt(3), 1 / np.sqrt(3)))


class GeometryKind(Enum):
    ISOTROPIC_3D = "isotropic_3d"
    SLAB_2D = "slab_2d"


@dataclass(frozen=True)
class EnsembleGeometry:
    """Ensemble geometry: an isotropic 3D bath or a finite slab.

    ``thickness_nm`` = 0 confines the slab to the z = 0 plane.
    """

    kind: GeometryKind
    thickness_nm: float = 0.0
    lateral_nm: float = 400.0

    def __post_init__(self):
        if self.thickness_nm < 0:
            raise DomainError("thickness must be >= 0")
        if self.lateral_nm <= 0:
            raise DomainError("lateral extent must be > 0")


@dataclass(frozen=True)
class DipolarCoupling:
    """A single spin pair: prefactor j0 (rad/s nm^3) and separation (nm)."""

    r_vec: tuple
    j0: float = J0_DEFAULT
    exclusion_radius_nm: float = EXCLUSION_RADIUS_NM

    def __post_init__(self):
        r = np.asarray(self.r_vec, dtype=float)
        if r.shape != (3,):
            raise DomainError("separation must be a 3-vector")
        object.__setattr__(self, "r_vec", tuple(float(x) for x in r))


def _check_unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise NormalizationError(f"{name} must be a 3-vector")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > _UNIT_TOL:
        raise NormalizationError(f"{name} must be unit-normalized (|v| = {norm:.15g})")
    return v


def angular_factor(axis: SpinAxis, r_hat) -> float:
    """Angular part of the coupling, 3 (m . r_hat)^2 - 1, in [-1, 2].

    Vanishes when the axis-to-separation angle is the magic angle
    (54.7356 deg); equals -1 for perpendicular and +2 for parallel geometry.
    """
    r_hat = _check_unit(r_hat, "r_hat")
    c = float(np.dot(axis.as_array(), r_hat))
    return 3.0 * c * c - 1.0


def angular_factor_many(axis: SpinAxis, r_vecs: np.ndarray) -> np.ndarray:
    """Vectorized angular factor for an (N, 3) array of separations.

    Separations need not be normalized (only their directions enter).
    """
    r_vecs = np.asarray(r_vecs, dtype=float)
    norms = np.linalg.norm(r_vecs, axis=-1)
    c = r_vecs @ axis.as_array() / norms
    return 3.0 * c * c - 1.0


def coupling(c: DipolarCoupling, axis: SpinAxis) -> float:
    """Secular pair coupling in rad/s: (j0 / r^3) * angular_factor.

    Raises DomainError when the pair is closer than the exclusion radius.
    """
    r_vec = np.asarray(c.r_vec)
    r = float(np.linalg.norm(r_vec))
    if r < c.exclusion_radius_nm:
        raise DomainError(
            f"pair separation {r:.4g} nm is below the exclusion radius "
            f"{c.exclusion_radius_nm:.4g} nm (r_vec = {c.r_vec})"
        )
    return c.j0 / r**3 * angular_factor(axis, r_vec / r)


def _slab_mean_quadrature(axis: SpinAxis, geom: EnsembleGeometry, tol: float) -> float:
    """Volume mean of the angular factor over the slab prism.

    Directions are taken from the prism center to uniformly distributed
    points; only the direction enters, so the mean is finite even at the
    origin (the angular factor is bounded).
    """
    m = axis.as_array()
    L = geom.lateral_nm / 2.0
    t = geom.thickness_nm / 2.0

    if t == 0.0:

        def f(y, x):
            r2 = x * x + y * y
            if r2 == 0.0:
                return 0.0
            c = (m[0] * x + m[1] * y) ** 2 / r2
            return 3.0 * c - 1.0

        area = (2 * L) ** 2
        val, err = integrate.dblquad(f, -L, L, -L, L, epsabs=tol * area, epsrel=tol)
        if err > max(tol * area * 10, 1e-30):
            raise NumericalError(f"slab quadrature achieved {err / area:.3g}")
        return val / area

    def f(z, y, x):
        r2 = x * x + y * y + z * z
        if r2 == 0.0:
            return 0.0
        c = (m[0] * x + m[1] * y + m[2] * z) ** 2 / r2
        return 3.0 * c - 1.0

    vol = (2 * L) ** 2 * (2 * t)
    val, err = integrate.tplquad(
        f, -L, L, -L, L, -t, t, epsabs=tol * vol, epsrel=tol
    )
    if err > max(tol * vol * 10, 1e-30):
        raise NumericalError(f"slab quadrature achieved {err / vol:.3g}")
    return val / vol


def _sphere_mean_quadrature(axis: SpinAxis, tol: float) -> float:
    """Solid-angle mean of the angular factor over the full sphere."""
    m = axis.as_array()

    def f(phi, theta):
        s, c = np.sin(theta), np.cos(theta)
        rh = (np.cos(phi) * s, np.sin(phi) * s, c)
        d = m[0] * rh[0] + m[1] * rh[1] + m[2] * rh[2]
        return (3.0 * d * d - 1.0) * s

    val, err = integrate.dblquad(
        f, 0, np.pi, 0, 2 * np.pi, epsabs=tol * 4 * np.pi, epsrel=tol
    )
    if err > max(tol * 4 * np.pi * 10, 1e-30):
        raise NumericalError(f"sphere quadrature achieved {err:.3g}")
    return val / (4 * np.pi)


def _closed_form_average(axis: SpinAxis, geom: EnsembleGeometry):
    """Closed form of the normalized average where one exists, else None."""
    if geom.kind is GeometryKind.ISOTROPIC_3D:
        # <3 cos^2 - 1> over the sphere is 0 for any axis.
        return 0.0
    if geom.thickness_nm == 0.0:
        m = axis.as_array()
        mz2 = m[2] ** 2
        # In-plane circular mean of 3 (mx cos + my sin)^2 - 1; the square
        # lateral window shares the fourfold symmetry, so the circular mean
        # applies whenever the in-plane component is symmetric.  It is exact
        # for any axis because the cross term averages out over the square.
        return 1.5 * (1.0 - mz2) - 1.0
    return None


def configurational_average(
    axis: SpinAxis, geometry: EnsembleGeometry, tol: float = 1e-9
) -> float:
    """Normalized mean of the angular factor over the geometry.

    Computed by adaptive quadrature and, when a closed form exists, checked
    against it; disagreement beyond ``tol`` raises NumericalError.
    """
    if geometry.kind is GeometryKind.ISOTROPIC_3D:
        quad = _sphere_mean_quadrature(axis, tol)
    else:
        quad = _slab_mean_quadrature(axis, geometry, tol)
    closed = _closed_form_average(axis, geometry)
    if closed is not None and abs(quad - closed) > max(tol, 1e-9):
        raise NumericalError(
            f"quadrature ({quad:.3e}) and closed form ({closed:.3e}) disagree"
        )
    return closed if closed is not None else quad


def unnormalized_average(
    axis: SpinAxis, geometry: EnsembleGeometry, tol: float = 1e-9
) -> float:
    """Measure-weighted integral of the angular factor (mean times measure).

    For the ideal 2D slab the measure is the full 2*pi azimuthal angle, so a
    normal-axis slab returns -2*pi; for the 3D sphere it is 4*pi steradians.
    """
    mean = configurational_average(axis, geometry, tol)
    if geometry.kind is GeometryKind.ISOTROPIC_3D:
        return mean * 4 * np.pi
    if geometry.thickness_nm == 0.0:
        return mean * 2 * np.pi
    raise DomainError("unnormalized form is defined for the sphere and t=0 slab")


def monte_carlo_average(
    axis: SpinAxis,
    geometry: EnsembleGeometry,
    n_samples: int = 1_000_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo estimate of the configurational average.

    Returns (estimate, standard_error).  Directions are drawn from the
    geometry's measure: uniform on the sphere for the 3D case, uniform
    positions in the prism for a slab.
    """
    rng = np.random.default_rng(seed)
    if geometry.kind is GeometryKind.ISOTROPIC_3D:
        v = rng.normal(size=(n_samples, 3))
    else:
        L = geometry.lateral_nm / 2.0
        t = geometry.thickness_nm / 2.0
        v = np.empty((n_samples, 3))
        v[:, 0] = rng.uniform(-L, L, n_samples)
        v[:, 1] = rng.uniform(-L, L, n_samples)
        v[:, 2] = rng.uniform(-t, t, n_samples) if t > 0 else 0.0
        nz = np.linalg.norm(v, axis=1) > 0
        v = v[nz]
    vals = angular_factor_many(axis, v)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))
