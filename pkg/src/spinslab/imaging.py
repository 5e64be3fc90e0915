"""Forward model for wide-field magnetic imaging with a 2D sensor layer.

A point dipole above (or below) the sensor plane produces the textbook
field B(r) = mu0/(4 pi) [3 (m.r_hat) r_hat - m] / r^3; the observable is
its projection onto the sensor quantization axis, evaluated on a pixel
grid.  Contours come from marching squares; a circular quench mask flags
pixels where the sensor signal is unusable.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .constants import FE_ATOM_DENSITY_M3, MU_0, MU_B
from .dipolar import SpinAxis
from .errors import DomainError, InputError


@dataclass(frozen=True)
class MagneticDipole:
    """Point dipole: moment in A m^2, orientation angles in degrees.

    Polar angle theta is measured from +z (the outward plane normal);
    theta > 90 deg points into the sensor ("into the page" in map view).
    """

    moment_am2: float
    theta_deg: float = 0.0
    phi_deg: float = 0.0
    position_um: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.moment_am2 < 0:
            raise DomainError("moment must be >= 0")

    def moment_vector(self) -> np.ndarray:
        th = math.radians(self.theta_deg)
        ph = math.radians(self.phi_deg)
        return self.moment_am2 * np.array(
            [math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)]
        )


@dataclass(frozen=True)
class SensorPlane:
    """Pixel grid of sensors in the z = 0 plane."""

    nx: int = 100
    ny: int = 100
    lx_um: float = 10.0
    ly_um: float = 10.0
    nv_axis: SpinAxis = field(default_factory=lambda: SpinAxis((0.0, 0.0, 1.0)))

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2 or self.lx_um <= 0 or self.ly_um <= 0:
            raise InputError("grid must have >= 2 pixels per side, positive extent")

    def pixel_coords_um(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(-self.lx_um / 2, self.lx_um / 2, self.nx)
        y = np.linspace(-self.ly_um / 2, self.ly_um / 2, self.ny)
        return x, y


@dataclass
class FieldMap:
    """Projected field per pixel (mT), with an optional validity mask."""

    x_um: np.ndarray
    y_um: np.ndarray
    b_mt: np.ndarray  # shape (ny, nx)
    mask: np.ndarray | None = None  # True = invalid

    def masked_values(self) -> np.ndarray:
        if self.mask is None:
            return self.b_mt
        out = self.b_mt.copy()
        out[self.mask] = np.nan
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_um", "y_um", "b_mt", "masked"])
            mask = self.mask if self.mask is not None else np.zeros_like(
                self.b_mt, dtype=bool
            )
            for j, y in enumerate(self.y_um):
                for i, x in enumerate(self.x_um):
                    w.writerow(
                        [f"{x:.9g}", f"{y:.9g}", f"{self.b_mt[j, i]:.12g}",
                         int(mask[j, i])]
                    )

    def to_json_dict(self) -> dict:
        return {
            "schema": "spinslab.field_map",
            "schema_version": 1,
            "x_um": [float(v) for v in self.x_um],
            "y_um": [float(v) for v in self.y_um],
            "b_mt": [[float(v) for v in row] for row in self.b_mt],
            "mask": None
            if self.mask is None
            else [[bool(v) for v in row] for row in self.mask],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)


def particle_moment(
    radius_um: float,
    moment_per_atom_mu_b: float,
    atomic_density_m3: float = FE_ATOM_DENSITY_M3,
) -> float:
    """Saturated moment of a uniformly magnetized sphere, A m^2."""
    if radius_um <= 0:
        raise DomainError("radius must be > 0")
    volume_m3 = 4.0 / 3.0 * math.pi * (radius_um * 1e-6) ** 3
    return volume_m3 * atomic_density_m3 * moment_per_atom_mu_b * MU_B


def field_map(dipole: MagneticDipole, plane: SensorPlane) -> FieldMap:
    """Dipole field projected onto the sensor axis on each pixel, in mT.

    Pixels coinciding with the dipole position are masked, not an error.
    """
    x, y = plane.pixel_coords_um()
    xx, yy = np.meshgrid(x, y)
    r = np.stack(
        [
            xx - dipole.position_um[0],
            yy - dipole.position_um[1],
            np.full_like(xx, -dipole.position_um[2]),
        ],
        axis=-1,
    ) * 1e-6  # meters
    rnorm = np.linalg.norm(r, axis=-1)
    singular = rnorm == 0.0
    rsafe = np.where(singular, 1.0, rnorm)
    rhat = r / rsafe[..., None]
    m = dipole.moment_vector()
    mdotr = rhat @ m
    b_vec = MU_0 / (4 * math.pi) * (
        3 * mdotr[..., None] * rhat - m
    ) / rsafe[..., None] ** 3
    b_proj = b_vec @ plane.nv_axis.as_array() * 1e3  # T -> mT
    b_proj = np.where(singular, np.nan, b_proj)
    mask = singular if singular.any() else None
    return FieldMap(x_um=x, y_um=y, b_mt=b_proj, mask=mask)


def add_maps(a: FieldMap, b: FieldMap) -> FieldMap:
    """Pixelwise sum of two maps on the same grid (superposition)."""
    if a.b_mt.shape != b.b_mt.shape:
        raise InputError("maps must share a grid")
    mask = None
    if a.mask is not None or b.mask is not None:
        ma = a.mask if a.mask is not None else np.zeros_like(a.b_mt, dtype=bool)
        mb = b.mask if b.mask is not None else np.zeros_like(b.b_mt, dtype=bool)
        mask = ma | mb
    return FieldMap(a.x_um, a.y_um, a.b_mt + b.b_mt, mask)


def extract_contours(fmap: FieldMap, levels_mt) -> dict:
    """Marching-squares contour polylines per level, in um coordinates.

    Levels outside the data range yield empty lists.  Masked pixels are
    excluded (treated as NaN).
    """
    values = fmap.masked_values()
    dx = fmap.x_um[1] - fmap.x_um[0]
    dy = fmap.y_um[1] - fmap.y_um[0]
    out = {}
    for level in levels_mt:
        finite = np.isfinite(values)
        if not finite.any() or not (
            np.nanmin(values) < level < np.nanmax(values)
        ):
            out[float(level)] = []
            continue
        polylines = []
        for seg in measure.find_contours(values, level):
            xs = fmap.x_um[0] + seg[:, 1] * dx
            ys = fmap.y_um[0] + seg[:, 0] * dy
            polylines.append(np.stack([xs, ys], axis=1))
        out[float(level)] = polylines
    return out


def contours_to_json(contours: dict, path) -> None:
    payload = {
        "schema": "spinslab.contours",
        "schema_version": 1,
        "levels_mt": {
            str(level): [[[float(x), float(y)] for x, y in line] for line in lines]
            for level, lines in contours.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def quench_mask(fmap: FieldMap, center_um, radius_um: float) -> FieldMap:
    """Flag pixels within a circle as invalid (e.g. quenched sensor signal)."""
    if radius_um < 0:
        raise DomainError("radius must be >= 0")
    xx, yy = np.meshgrid(fmap.x_um, fmap.y_um)
    inside = (xx - center_um[0]) ** 2 + (yy - center_um[1]) ** 2 < radius_um**2
    mask = inside if fmap.mask is None else (fmap.mask | inside)
    return FieldMap(fmap.x_um, fmap.y_um, fmap.b_mt.copy(), mask)
