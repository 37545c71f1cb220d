"""Post-processing: reflected fields, singularity removal, rate fits.

The lens analysis works with two reflections of the solved field: u1 is u
reflected through the circle r2 (living on B_r3 \\ B_r2) and u2 is u1
reflected through r3 (living on B_r3; the composition is the plain dilation
x -> (r2^2/r3^2) x).  Subtracting u1 - u2 from u on the middle annulus removes
the localized resonance and leaves a field that converges in the whole domain,
which is how the sharpened exterior rates are measured.

``fit_rate`` turns a (delta, error) sweep into a log-log slope with an R^2
quality gate; points below the supplied discretization floor are excluded so
mesh error cannot masquerade as a convergence rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Mesh, MeshLocator
from .helmholtz import ComplexNodalField, subdomain_norm
from .transforms import Diffeomorphism

__all__ = [
    "RateFit",
    "RateFitError",
    "fit_rate",
    "reflect_field",
    "remove_localized_singularity",
    "blowup_indicator",
]


class RateFitError(ValueError):
    """Too few usable points or an uncertifiable fit."""


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (log delta, log error)."""

    slope: float
    intercept: float
    r_squared: float
    included: np.ndarray  # mask over the input points

    @property
    def n_points(self) -> int:
        return int(np.sum(self.included))

    def certified(self, r2_threshold: float = 0.98) -> bool:
        return self.r_squared >= r2_threshold

    def require_certified(self, r2_threshold: float = 0.98) -> "RateFit":
        if not self.certified(r2_threshold):
            raise RateFitError(
                f"refusing to certify slope {self.slope:.3f}: "
                f"R^2={self.r_squared:.4f} < {r2_threshold}"
            )
        return self


def fit_rate(points, floor=0.0) -> RateFit:
    """Fit log(error) = slope*log(delta) + intercept on points above the floor.

    Args:
        points: iterable of (delta, error) pairs, error > 0.
        floor: exclusion threshold; points with error < floor are masked out
            (they sit on the discretization floor, not the rate).  A scalar
            applies uniformly; a sequence gives one threshold per point.

    Raises:
        RateFitError: fewer than 3 points survive the floor.
    """
    pts = np.asarray([(d, e) for d, e in points], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (delta, error) pairs")
    floor_arr = np.broadcast_to(np.asarray(floor, dtype=float), pts[:, 1].shape)
    included = pts[:, 1] >= floor_arr
    if np.sum(included) < 3:
        raise RateFitError(
            f"only {int(np.sum(included))} points above the discretization "
            f"floor (max {float(np.max(floor_arr)):.3e}); need at least 3 "
            "for a rate fit"
        )
    x = np.log(pts[included, 0])
    y = np.log(pts[included, 1])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=min(1.0, r2),
        included=included,
    )


def _radius(mesh: Mesh) -> np.ndarray:
    return np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])


def reflect_field(
    u: ComplexNodalField,
    mapping: Diffeomorphism,
    target_region,
    locator: MeshLocator | None = None,
) -> ComplexNodalField:
    """Evaluate u at map preimages of the target-region vertices.

    ``target_region`` is a radius interval (lo, hi) or a vertex mask; vertices
    outside it keep value zero.  The preimages must land inside the meshed
    source region; points escaping the mesh raise.
    """
    mesh = u.mesh
    loc = locator or MeshLocator(mesh)
    if isinstance(target_region, tuple):
        lo, hi = target_region
        r = _radius(mesh)
        tol = 1e-12 * mesh.outer_radius
        mask = (r >= lo - tol) & (r <= hi + tol)
    else:
        mask = np.asarray(target_region, dtype=bool)
    out = np.zeros(mesh.num_vertices, dtype=complex)
    pts = mesh.vertices[mask]
    if len(pts):
        pre = mapping.inverse(pts)
        pre_r = np.hypot(pre[:, 0], pre[:, 1])
        if np.any(pre_r > mesh.outer_radius * (1 + 1e-9)):
            raise ValueError("map preimage escapes the meshed source region")
        out[mask] = u.at(pre, loc)
    return ComplexNodalField(values=out, mesh=mesh)


def remove_localized_singularity(
    u: ComplexNodalField,
    u1: ComplexNodalField,
    u2: ComplexNodalField,
    radii: tuple[float, float],
    variant: str = "lens",
) -> ComplexNodalField:
    """Glue the resonance-subtracted field.

    Piecewise: u outside B_r_outer; u - (u1 - u2) on the middle annulus;
    u2 inside B_r_inner.  ``radii = (r_inner, r_outer)`` is (r2, r3) for the
    lens and object variants and (2*r2, r3) for the cloak.  Vertices exactly
    on r_outer take the exterior value, on r_inner the middle value (the two
    sides agree wherever the construction is continuous).
    """
    if variant not in ("lens", "cloak", "alr"):
        raise ValueError(f"unknown variant '{variant}'")
    for other in (u1, u2):
        if other.mesh is not u.mesh:
            raise ValueError("all fields must live on the same mesh")
    r_inner, r_outer = radii
    if not 0 < r_inner < r_outer:
        raise ValueError("need 0 < r_inner < r_outer")
    r = _radius(u.mesh)
    tol = 1e-12 * u.mesh.outer_radius
    out = u.values.copy()
    middle = (r < r_outer - tol) & (r > r_inner + tol)
    inner = r <= r_inner + tol
    # Nodes on the circles themselves count as middle at r_inner so the glued
    # value matches the annulus formula there.
    on_inner = np.abs(r - r_inner) <= tol
    middle |= on_inner
    inner &= ~on_inner
    out[middle] = u.values[middle] - (u1.values[middle] - u2.values[middle])
    out[inner] = u2.values[inner]
    return ComplexNodalField(values=out, mesh=u.mesh)


def blowup_indicator(
    u: ComplexNodalField,
    delta: float,
    lens_region,
) -> tuple[float, float]:
    """Gradient energy on the lens annulus and the dissipated power.

    Returns ``(grad_energy, power)`` with grad_energy = |grad u|^2 integrated
    over the lens region and power = delta * grad_energy.  Bounded gradient
    energy as delta -> 0 signals a stable device; blow-up signals localized
    resonance.
    """
    ge = subdomain_norm(u, u.mesh, lens_region, "H1-semi") ** 2
    return float(ge), float(delta * ge)
