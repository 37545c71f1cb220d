"""Piecewise coefficient fields for negative-index devices.

A ``Medium`` is an ordered list of radial regions, each carrying a symmetric
matrix coefficient A and a complex scalar coefficient Sigma as vectorized
point evaluators.  Regions flagged ``lens`` receive the loss factor
s = -1 - i*delta at assembly time; everywhere else s = 1.  Coefficients are
closures, not sampled arrays: the lens layers are pushforwards along Kelvin
transforms with steep gradients near the sign-change circles, and evaluator
composition keeps them exact at quadrature points.

Device builders:

* ``superlens_quasistatic`` / ``superlens_finite_freq`` -- two-layer lens that
  magnifies an object in B_r0 by m (r1 = sqrt(m) r0, r2 = m r0, r3 = r2^2/r1),
  paired with the magnified-object reference medium.
* ``cloak`` / ``cloak_finite_freq`` -- complementary-media cloak of the shell
  B_2r2 \\ B_r2: the lens layer carries the reflected shell coefficient and a
  homogeneous core fills the cancelled volume.
* ``alr_lens_with_objects`` -- plain lens plus two small objects hugging the
  lens circles; anomalous resonance hides them from outside B_r3.
* ``defective_cloak`` -- the negative control: the object sits on the outer
  circle where complementary cancellation cannot reach, so it stays visible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .transforms import KelvinMap, pushforward_at_target

__all__ = [
    "DeviceRadii",
    "Region",
    "Medium",
    "SourceTerm",
    "bump_source",
    "constant_matrix_field",
    "constant_sigma_field",
    "smoothed_shell_profile",
    "radial_matrix_field",
    "homogeneous",
    "superlens_quasistatic",
    "superlens_finite_freq",
    "cloak",
    "cloak_finite_freq",
    "alr_lens_with_objects",
    "defective_cloak",
]

_EYE2 = np.eye(2)


@dataclass(frozen=True)
class DeviceRadii:
    """The radii ladder 0 < r0 < r1 < r2 < r3 with r3 = r2^2/r1 exactly.

    For the default superlens preset r1 = sqrt(m) r0 and r2 = m r0; the
    alternate preset allows any r1 >= m^(1/4) r0 with r2 = sqrt(m) r1.
    """

    r0: float
    r1: float
    r2: float
    r3: float
    m: float
    d: int = 2

    def __post_init__(self):
        if not (0 < self.r0 < self.r1 < self.r2 < self.r3):
            raise ValueError(f"radii must be ordered 0<r0<r1<r2<r3: {self}")
        if abs(self.r3 - self.r2**2 / self.r1) > 1e-12 * self.r3:
            raise ValueError("r3 must equal r2^2/r1")
        if self.d not in (2, 3):
            raise ValueError("dimension must be 2 or 3")

    @classmethod
    def superlens(cls, m: float, r0: float, d: int = 2) -> "DeviceRadii":
        if m <= 1:
            raise ValueError("magnification m must exceed 1")
        r1 = np.sqrt(m) * r0
        r2 = m * r0
        return cls(r0=r0, r1=r1, r2=r2, r3=r2**2 / r1, m=m, d=d)

    @classmethod
    def superlens_alternate(cls, m: float, r0: float, r1: float, d: int = 2):
        """Preset with r1 >= m^(1/4) r0 and r2 = sqrt(m) r1."""
        if r1 < m**0.25 * r0 * (1 - 1e-12):
            raise ValueError("alternate preset requires r1 >= m^(1/4) r0")
        r2 = np.sqrt(m) * r1
        return cls(r0=r0, r1=r1, r2=r2, r3=r2**2 / r1, m=m, d=d)

    @classmethod
    def cloak(cls, r2: float, shell_ratio: float = 4.0, d: int = 2):
        """Cloak ladder with r3 = shell_ratio * r2 (hence r1 = r2/shell_ratio)."""
        if shell_ratio <= 2.0:
            raise ValueError("cloak needs r3 > 2*r2 so the shell fits")
        r3 = shell_ratio * r2
        r1 = r2**2 / r3
        return cls(r0=0.5 * r1, r1=r1, r2=r2, r3=r3, m=(r3 / r2) ** 2, d=d)

    @classmethod
    def lens_pair(cls, r1: float, r2: float, r0: float, d: int = 2):
        """Ladder from an explicit (r1, r2) lens, as in the object-cloak setup."""
        return cls(r0=r0, r1=r1, r2=r2, r3=r2**2 / r1, m=(r2 / r1) ** 2, d=d)


MatrixField = Callable[[np.ndarray], np.ndarray]
SigmaField = Callable[[np.ndarray], np.ndarray]


def constant_matrix_field(value) -> MatrixField:
    mat = np.asarray(value, dtype=float)
    if mat.ndim == 0:
        mat = float(mat) * _EYE2
    if mat.shape != (2, 2) or abs(mat[0, 1] - mat[1, 0]) > 1e-14:
        raise ValueError("coefficient matrix must be symmetric 2x2")
    ev = np.linalg.eigvalsh(mat)
    if ev[0] <= 0:
        raise ValueError(f"coefficient matrix is not elliptic: eigenvalues {ev}")

    def eval_(pts: np.ndarray) -> np.ndarray:
        return np.broadcast_to(mat, (len(pts), 2, 2))

    return eval_


def constant_sigma_field(value: complex) -> SigmaField:
    v = complex(value)
    if v.real <= 0 or v.imag < 0:
        raise ValueError("sigma must have positive real part and Im >= 0")

    def eval_(pts: np.ndarray) -> np.ndarray:
        return np.full(len(pts), v, dtype=complex)

    return eval_


def as_matrix_field(value) -> MatrixField:
    if callable(value):
        return value
    return constant_matrix_field(value)


def as_sigma_field(value) -> SigmaField:
    if callable(value):
        return value
    return constant_sigma_field(value)


@dataclass(frozen=True)
class Region:
    """One radial band [r_lo, r_hi) with its coefficient evaluators."""

    name: str
    r_lo: float
    r_hi: float
    a: MatrixField
    sigma: SigmaField
    lens: bool = False
    varying: bool = False  # pushforward or profiled coefficients: order-4 quadrature

    def contains(self, pts: np.ndarray) -> np.ndarray:
        r = np.hypot(pts[:, 0], pts[:, 1])
        return (r >= self.r_lo) & (r < self.r_hi)


@dataclass(frozen=True)
class Medium:
    """Ordered, non-overlapping radial regions covering the plane."""

    regions: tuple[Region, ...]
    label: str
    radii: DeviceRadii | None = None
    suggested_circles: tuple[float, ...] = ()

    def __post_init__(self):
        lo = 0.0
        for reg in self.regions:
            if abs(reg.r_lo - lo) > 1e-12 * max(1.0, lo):
                raise ValueError(f"regions of {self.label} leave a gap at r={lo}")
            lo = reg.r_hi
        if not np.isinf(lo):
            raise ValueError(f"regions of {self.label} do not cover the plane")

    def region_index(self, pts: np.ndarray) -> np.ndarray:
        r = np.hypot(pts[:, 0], pts[:, 1])
        edges = np.array([reg.r_hi for reg in self.regions[:-1]])
        return np.searchsorted(edges, r, side="right")

    def lens_band(self) -> tuple[float, float] | None:
        for reg in self.regions:
            if reg.lens:
                return (reg.r_lo, reg.r_hi)
        return None

    def has_lens(self) -> bool:
        return any(reg.lens for reg in self.regions)

    def s_factors(self, delta: float) -> np.ndarray:
        return np.array(
            [(-1.0 - 1j * delta) if reg.lens else 1.0 for reg in self.regions],
            dtype=complex,
        )

    def eval_region(self, idx: int, pts: np.ndarray):
        reg = self.regions[idx]
        return np.asarray(reg.a(pts), dtype=float), np.asarray(
            reg.sigma(pts), dtype=complex
        )

    def interface_radii(self) -> tuple[float, ...]:
        return tuple(reg.r_hi for reg in self.regions[:-1])

    def sampled_ellipticity(self, n_radial: int = 48, n_angular: int = 32):
        """Eigenvalue range of A over a deterministic polar sample grid."""
        lam_min, lam_max = np.inf, 0.0
        for reg in self.regions:
            hi = reg.r_hi if np.isfinite(reg.r_hi) else 2.0 * reg.r_lo + 1.0
            lo = max(reg.r_lo, 1e-6 * hi)
            rr = np.linspace(lo + 1e-9 * hi, hi - 1e-9 * hi, n_radial)
            th = np.linspace(0, 2 * np.pi, n_angular, endpoint=False)
            R, TH = np.meshgrid(rr, th, indexing="ij")
            pts = np.stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()], 1)
            ev = np.linalg.eigvalsh(np.asarray(reg.a(pts)))
            lam_min = min(lam_min, float(ev.min()))
            lam_max = max(lam_max, float(ev.max()))
        return lam_min, lam_max


@dataclass(frozen=True)
class SourceTerm:
    """Complex source density with a declared radial support range."""

    f: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    label: str = "source"

    def check_clears(self, r3: float) -> None:
        if self.support[0] < r3:
            raise ValueError(
                f"source support starts at r={self.support[0]:.3g}, "
                f"inside the device radius r3={r3:.3g}"
            )


def bump_source(
    center: tuple[float, float], width: float, amplitude: float = 1.0
) -> SourceTerm:
    """Smooth compactly supported bump f = A exp(1 - 1/(1 - s^2)) on B(c, w)."""
    cx, cy = float(center[0]), float(center[1])
    w = float(width)

    def f(pts: np.ndarray) -> np.ndarray:
        s2 = ((pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2) / w**2
        out = np.zeros(len(pts), dtype=complex)
        inside = s2 < 1.0
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
        return out

    rc = float(np.hypot(cx, cy))
    return SourceTerm(f=f, support=(rc - w, rc + w), label=f"bump@{center}")


def smoothed_shell_profile(
    value: float, r2: float, flat_until: float = 1.5, outer: float = 2.0
):
    """C^1 radial profile: `value` on [r2, flat_until*r2], smoothstep to 1 at outer*r2.

    Used to mollify a constant cloaked coefficient so the shell medium is C^1
    up to its boundary, as the cloak construction requires.
    """
    t0, t1 = flat_until * r2, outer * r2

    def profile(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        u = np.clip((t1 - r) / (t1 - t0), 0.0, 1.0)
        s = u * u * (3.0 - 2.0 * u)
        return 1.0 + (value - 1.0) * s

    return profile


def radial_matrix_field(profile) -> MatrixField:
    """Isotropic matrix field c(|x|) I from a radial profile."""

    def eval_(pts: np.ndarray) -> np.ndarray:
        r = np.hypot(pts[:, 0], pts[:, 1])
        c = profile(r)
        out = np.zeros((len(pts), 2, 2))
        out[:, 0, 0] = c
        out[:, 1, 1] = c
        return out

    return eval_


_I_FIELD = constant_matrix_field(1.0)
_ONE_FIELD = constant_sigma_field(1.0)


def _band(name, lo, hi, a=None, sigma=None, lens=False, varying=False) -> Region:
    return Region(
        name=name,
        r_lo=lo,
        r_hi=hi,
        a=a if a is not None else _I_FIELD,
        sigma=sigma if sigma is not None else _ONE_FIELD,
        lens=lens,
        varying=varying,
    )


def homogeneous(label: str = "homogeneous") -> Medium:
    return Medium(regions=(_band("all", 0.0, np.inf),), label=label)


def _check_object_ellipticity(a_eval: MatrixField, radius: float, center=(0.0, 0.0)):
    rr = np.linspace(1e-3 * radius, radius * (1 - 1e-9), 24)
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    R, TH = np.meshgrid(rr, th, indexing="ij")
    pts = np.stack(
        [center[0] + (R * np.cos(TH)).ravel(), center[1] + (R * np.sin(TH)).ravel()], 1
    )
    ev = np.linalg.eigvalsh(np.asarray(a_eval(pts)))
    if ev.min() <= 0:
        raise ValueError(f"object coefficient loses ellipticity: min eig {ev.min():.3g}")


def superlens_quasistatic(object_a, m: float, r0: float) -> tuple[Medium, Medium]:
    """Quasistatic magnifying lens and its magnified-object reference.

    The device keeps A = I outside the object; only the sign factor varies on
    the lens annulus B_r2 \\ B_r1.  The reference carries a(./m) in B_r2.
    """
    radii = DeviceRadii.superlens(m, r0)
    a_obj = as_matrix_field(object_a)
    _check_object_ellipticity(a_obj, radii.r0)

    device = Medium(
        regions=(
            _band("object", 0.0, radii.r0, a=a_obj, varying=callable(object_a)),
            _band("matching", radii.r0, radii.r1),
            _band("lens", radii.r1, radii.r2, lens=True),
            _band("halo", radii.r2, radii.r3),
            _band("exterior", radii.r3, np.inf),
        ),
        label="superlens-qs",
        radii=radii,
        suggested_circles=(radii.r0, radii.r1, radii.r2, radii.r3),
    )

    def a_magnified(pts: np.ndarray) -> np.ndarray:
        return np.asarray(a_obj(pts / m))

    reference = Medium(
        regions=(
            _band(
                "magnified-object",
                0.0,
                radii.r2,
                a=a_magnified,
                varying=callable(object_a),
            ),
            _band("exterior", radii.r2, np.inf),
        ),
        label="superlens-qs-reference",
        radii=radii,
        suggested_circles=(radii.r0, radii.r1, radii.r2, radii.r3),
    )
    return device, reference


def superlens_finite_freq(
    object_a, object_sigma, m: float, r0: float
) -> tuple[Medium, Medium]:
    """Finite-frequency lens: the lens layer carries the reflected exterior
    coefficients and the reference scales by m^(2-d), m^(-d)."""
    radii = DeviceRadii.superlens(m, r0)
    a_obj = as_matrix_field(object_a)
    s_obj = as_sigma_field(object_sigma)
    _check_object_ellipticity(a_obj, radii.r0)
    F = KelvinMap(radii.r2)

    def lens_a(pts: np.ndarray) -> np.ndarray:
        return pushforward_at_target(_I_FIELD, _ONE_FIELD, F, pts)[0]

    def lens_sigma(pts: np.ndarray) -> np.ndarray:
        return pushforward_at_target(_I_FIELD, _ONE_FIELD, F, pts)[1].astype(complex)

    device = Medium(
        regions=(
            _band("object", 0.0, radii.r0, a=a_obj, sigma=s_obj,
                  varying=callable(object_a)),
            _band("matching", radii.r0, radii.r1),
            _band("lens", radii.r1, radii.r2, a=lens_a, sigma=lens_sigma,
                  lens=True, varying=True),
            _band("halo", radii.r2, radii.r3),
            _band("exterior", radii.r3, np.inf),
        ),
        label="superlens-k",
        radii=radii,
        suggested_circles=(radii.r0, radii.r1, radii.r2, radii.r3),
    )

    d = radii.d

    def a_ref(pts: np.ndarray) -> np.ndarray:
        return m ** (2 - d) * np.asarray(a_obj(pts / m))

    def sigma_ref(pts: np.ndarray) -> np.ndarray:
        return m ** (-d) * np.asarray(s_obj(pts / m))

    reference = Medium(
        regions=(
            _band("magnified-object", 0.0, radii.r2, a=a_ref, sigma=sigma_ref,
                  varying=True),
            _band("exterior", radii.r2, np.inf),
        ),
        label="superlens-k-reference",
        radii=radii,
        suggested_circles=(radii.r0, radii.r1, radii.r2, radii.r3),
    )
    return device, reference


def _shell_coefficient(cloaked_a, radii: DeviceRadii) -> MatrixField:
    """Extend the cloaked-shell coefficient by I on B_r3 \\ B_2r2."""
    a_in = as_matrix_field(cloaked_a)
    two_r2 = 2.0 * radii.r2

    def a_e(pts: np.ndarray) -> np.ndarray:
        out = np.broadcast_to(_EYE2, (len(pts), 2, 2)).copy()
        r = np.hypot(pts[:, 0], pts[:, 1])
        inner = r < two_r2
        if inner.any():
            out[inner] = np.asarray(a_in(pts[inner]))
        return out

    return a_e


def _check_shell_smoothness(a_e: MatrixField, radii: DeviceRadii) -> None:
    two_r2 = 2.0 * radii.r2
    eps = 1e-7 * two_r2
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    ring = np.stack([np.cos(th), np.sin(th)], axis=1)
    lo = np.asarray(a_e(ring * (two_r2 - eps)))
    hi = np.asarray(a_e(ring * (two_r2 + eps)))
    if np.max(np.abs(lo - hi)) > 1e-4:
        raise ValueError(
            "cloaked coefficient is not continuous at the shell boundary 2*r2; "
            "mollify it (see smoothed_shell_profile)"
        )


def cloak(cloaked_a, r1: float, r2: float, r3: float, d: int = 2) -> Medium:
    """Complementary-media cloak of the shell B_2r2 \\ B_r2 (quasistatic).

    Four regions: the shell coefficient a_e on B_r3 \\ B_r2, its Kelvin
    pushforward on the lens annulus, the homogeneous core (r3^2/r2^2)^(d-2) I,
    and I outside.
    """
    radii = DeviceRadii(r0=0.5 * r1, r1=r1, r2=r2, r3=r3, m=(r3 / r2) ** 2, d=d)
    if 2.0 * r2 > r3:
        raise ValueError("cloaked shell B_2r2 exits the annulus (need 2*r2 <= r3)")
    a_e = _shell_coefficient(cloaked_a, radii)
    if 2.0 * r2 < r3:
        _check_shell_smoothness(a_e, radii)
    F = KelvinMap(r2)

    def lens_a(pts: np.ndarray) -> np.ndarray:
        return pushforward_at_target(a_e, _ONE_FIELD, F, pts)[0]

    core = (r3**2 / r2**2) ** (d - 2)
    return Medium(
        regions=(
            _band("core", 0.0, r1, a=constant_matrix_field(core)),
            _band("lens", r1, r2, a=lens_a, lens=True, varying=True),
            _band("shell", r2, r3, a=a_e, varying=True),
            _band("exterior", r3, np.inf),
        ),
        label="cloak-qs",
        radii=radii,
        suggested_circles=(r1, r2, 2.0 * r2, r3),
    )


def cloak_finite_freq(
    cloaked_a, cloaked_sigma, r1: float, r2: float, r3: float, d: int = 2
) -> Medium:
    """Finite-frequency cloak; adds the Sigma ladder with core (r3^2/r2^2)^d."""
    radii = DeviceRadii(r0=0.5 * r1, r1=r1, r2=r2, r3=r3, m=(r3 / r2) ** 2, d=d)
    if 2.0 * r2 > r3:
        raise ValueError("cloaked shell B_2r2 exits the annulus (need 2*r2 <= r3)")
    a_e = _shell_coefficient(cloaked_a, radii)
    if 2.0 * r2 < r3:
        _check_shell_smoothness(a_e, radii)
    s_in = as_sigma_field(cloaked_sigma)
    two_r2 = 2.0 * radii.r2

    def sigma_e(pts: np.ndarray) -> np.ndarray:
        out = np.ones(len(pts), dtype=complex)
        r = np.hypot(pts[:, 0], pts[:, 1])
        inner = r < two_r2
        if inner.any():
            out[inner] = np.asarray(s_in(pts[inner]))
        return out

    F = KelvinMap(r2)

    def lens_a(pts: np.ndarray) -> np.ndarray:
        return pushforward_at_target(a_e, sigma_e, F, pts)[0]

    def lens_sigma(pts: np.ndarray) -> np.ndarray:
        return pushforward_at_target(a_e, sigma_e, F, pts)[1]

    core_a = (r3**2 / r2**2) ** (d - 2)
    core_sigma = (r3**2 / r2**2) ** d
    return Medium(
        regions=(
            _band("core", 0.0, r1, a=constant_matrix_field(core_a),
                  sigma=constant_sigma_field(core_sigma)),
            _band("lens", r1, r2, a=lens_a, sigma=lens_sigma, lens=True,
                  varying=True),
            _band("shell", r2, r3, a=a_e, sigma=sigma_e, varying=True),
            _band("exterior", r3, np.inf),
        ),
        label="cloak-k",
        radii=radii,
        suggested_circles=(r1, r2, 2.0 * r2, r3),
    )


def _clipped_disk_field(a_obj: MatrixField, center, r0: float) -> MatrixField:
    cx, cy = center

    def eval_(pts: np.ndarray) -> np.ndarray:
        out = np.broadcast_to(_EYE2, (len(pts), 2, 2)).copy()
        inside = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) < r0
        if inside.any():
            out[inside] = np.asarray(a_obj(pts[inside]))
        return out

    return eval_


def alr_lens_with_objects(
    object_a, x1, x2, r0: float, r1: float, r2: float
) -> tuple[Medium, Medium]:
    """Lens with two objects clipped to the circles through x1, x2.

    The object coefficient lives on (B(x1,r0) inter B_r1) union
    (B(x2,r0) inter (B_r3 \\ B_r2)); the lens annulus itself stays at I so the
    cloaking is purely an anomalous-resonance effect.  The paired reference is
    the homogeneous medium.
    """
    radii = DeviceRadii.lens_pair(r1, r2, r0)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if abs(np.hypot(*x1) - r1) > 1e-9 * r1:
        raise ValueError(f"x1={x1} must lie exactly on the circle r1={r1}")
    if abs(np.hypot(*x2) - r2) > 1e-9 * r2:
        raise ValueError(f"x2={x2} must lie exactly on the circle r2={r2}")
    if np.hypot(*(x1 - x2)) <= 2 * r0:
        raise ValueError("object disks overlap")
    if r0 >= min(r1, r2 - r1, radii.r3 - r2):
        raise ValueError(f"object radius {r0} is not small relative to the layers")
    a_obj = as_matrix_field(object_a)
    _check_object_ellipticity(a_obj, r0, center=x1)

    device = Medium(
        regions=(
            _band("core+object1", 0.0, r1, a=_clipped_disk_field(a_obj, x1, r0),
                  varying=True),
            _band("lens", r1, r2, lens=True),
            _band("halo+object2", r2, radii.r3,
                  a=_clipped_disk_field(a_obj, x2, r0), varying=True),
            _band("exterior", radii.r3, np.inf),
        ),
        label="alr-objects",
        radii=radii,
        suggested_circles=(r1, r2, radii.r3),
    )
    return device, homogeneous("alr-reference")


def defective_cloak(
    object_a, x3, r0: float, r1: float, r2: float
) -> tuple[Medium, Medium]:
    """Cloak whose object sits on the outer circle r3: cancellation fails.

    Returns the device and the visible-object reference (a_c in
    B(x3,r0) inter B_r3, I otherwise) that the lossless limit actually sees.
    """
    radii = DeviceRadii.lens_pair(r1, r2, r0)
    r3 = radii.r3
    x3 = np.asarray(x3, dtype=float)
    if abs(np.hypot(*x3) - r3) > 1e-9 * r3:
        raise ValueError(f"x3={x3} must lie exactly on the circle r3={r3}")
    if r0 >= r3 - r2:
        raise ValueError(f"object radius {r0} reaches the lens layer")
    a_obj = as_matrix_field(object_a)
    _check_object_ellipticity(a_obj, r0, center=x3)

    a_e = _clipped_disk_field(a_obj, x3, r0)
    F = KelvinMap(r2)

    def lens_a(pts: np.ndarray) -> np.ndarray:
        return pushforward_at_target(a_e, _ONE_FIELD, F, pts)[0]

    device = Medium(
        regions=(
            _band("core", 0.0, r1),
            _band("lens", r1, r2, a=lens_a, lens=True, varying=True),
            _band("shell+object", r2, r3, a=a_e, varying=True),
            _band("exterior", r3, np.inf),
        ),
        label="defective-cloak",
        radii=radii,
        suggested_circles=(r1, r2, r3),
    )
    reference = Medium(
        regions=(
            _band("visible-object", 0.0, r3, a=a_e, varying=True),
            _band("exterior", r3, np.inf),
        ),
        label="defective-cloak-reference",
        radii=radii,
        suggested_circles=(r1, r2, r3),
    )
    return device, reference
