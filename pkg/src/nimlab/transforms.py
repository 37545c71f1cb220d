"""Kelvin transforms and coefficient pushforwards.

The change-of-variables rule for div-form operators transports a coefficient
pair (a, sigma) along a diffeomorphism T as

    (T_* a)(y)     = DT(x) a(x) DT(x)^T / |det DT(x)|
    (T_* sigma)(y) = sigma(x) / |det DT(x)|,        x = T^{-1}(y),

which leaves the weak form invariant.  Every device in this package is built
from this algebra applied to circle inversions (Kelvin transforms) and
dilations.  Jacobians of the built-in maps are closed-form; user-supplied
diffeomorphisms provide their own.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Diffeomorphism",
    "KelvinMap",
    "AffineMap",
    "Dilation",
    "IdentityMap",
    "ComposedMap",
    "DiffeoSample",
    "kelvin_apply",
    "kelvin_jacobian",
    "pushforward",
    "pushforward_at_target",
    "sample_diffeo",
    "weak_form_transport_check",
]


def _as_points(x) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


def kelvin_apply(pivot_radius: float, x) -> np.ndarray:
    """Inversion through the circle of radius rho: x -> rho^2 x / |x|^2."""
    pts, single = _as_points(x)
    r2 = np.einsum("ni,ni->n", pts, pts)
    if np.any(r2 == 0.0):
        raise ValueError("Kelvin transform is singular at the origin")
    out = (pivot_radius**2 / r2)[:, None] * pts
    return out[0] if single else out


def kelvin_jacobian(pivot_radius: float, x) -> np.ndarray:
    """Exact Jacobian (rho^2/|x|^2)(I - 2 xhat xhat^T) of the inversion."""
    pts, single = _as_points(x)
    r2 = np.einsum("ni,ni->n", pts, pts)
    if np.any(r2 == 0.0):
        raise ValueError("Kelvin transform is singular at the origin")
    d = pts.shape[1]
    eye = np.eye(d)
    outer = np.einsum("ni,nj->nij", pts, pts) / r2[:, None, None]
    jac = (pivot_radius**2 / r2)[:, None, None] * (eye - 2.0 * outer)
    return jac[0] if single else jac


class Diffeomorphism:
    """Minimal interface: apply, inverse, jacobian (all vectorized)."""

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, y) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)


@dataclass(frozen=True)
class KelvinMap(Diffeomorphism):
    """Inversion through the circle |x| = pivot_radius; an involution."""

    pivot_radius: float

    def apply(self, x):
        return kelvin_apply(self.pivot_radius, x)

    def inverse(self, y):
        return kelvin_apply(self.pivot_radius, y)

    def jacobian(self, x):
        return kelvin_jacobian(self.pivot_radius, x)


@dataclass(frozen=True)
class AffineMap(Diffeomorphism):
    """x -> A x + b with constant invertible A."""

    matrix: tuple  # nested tuple for hashability
    offset: tuple = (0.0, 0.0)

    def _A(self):
        return np.asarray(self.matrix, dtype=float)

    def apply(self, x):
        pts, single = _as_points(x)
        out = pts @ self._A().T + np.asarray(self.offset)
        return out[0] if single else out

    def inverse(self, y):
        pts, single = _as_points(y)
        out = (pts - np.asarray(self.offset)) @ np.linalg.inv(self._A()).T
        return out[0] if single else out

    def jacobian(self, x):
        pts, single = _as_points(x)
        jac = np.broadcast_to(self._A(), (len(pts),) + self._A().shape).copy()
        return jac[0] if single else jac


def Dilation(factor: float) -> AffineMap:
    return AffineMap(matrix=((factor, 0.0), (0.0, factor)))


def IdentityMap() -> AffineMap:
    return AffineMap(matrix=((1.0, 0.0), (0.0, 1.0)))


@dataclass(frozen=True)
class ComposedMap(Diffeomorphism):
    """outer after inner, with chain-rule Jacobian."""

    outer: Diffeomorphism
    inner: Diffeomorphism

    def apply(self, x):
        return self.outer.apply(self.inner.apply(x))

    def inverse(self, y):
        return self.inner.inverse(self.outer.inverse(y))

    def jacobian(self, x):
        pts, single = _as_points(x)
        ji = np.atleast_3d(self.inner.jacobian(pts))
        jo = np.atleast_3d(self.outer.jacobian(self.inner.apply(pts)))
        jac = np.einsum("nij,njk->nik", jo, ji)
        return jac[0] if single else jac


@dataclass(frozen=True)
class DiffeoSample:
    """A map evaluated at one point: image, Jacobian, determinant."""

    point: np.ndarray
    image: np.ndarray
    jacobian: np.ndarray
    det: float

    def __post_init__(self):
        if self.det == 0.0:
            raise ValueError("singular Jacobian at sampled point")


def sample_diffeo(T: Diffeomorphism, x) -> DiffeoSample:
    x = np.asarray(x, dtype=float)
    jac = T.jacobian(x)
    return DiffeoSample(
        point=x, image=T.apply(x), jacobian=jac, det=float(np.linalg.det(jac))
    )


def pushforward(a_eval, sigma_eval, T: Diffeomorphism, x):
    """Transport (a, sigma) along T; values returned live at y = T(x).

    ``a_eval(points) -> (n,2,2)`` and ``sigma_eval(points) -> (n,)`` are
    vectorized evaluators in the source coordinates.  Symmetry of a is
    preserved exactly by the congruence DT a DT^T.
    """
    pts, single = _as_points(x)
    jac = np.atleast_3d(T.jacobian(pts))
    det = np.abs(np.linalg.det(jac))
    if np.any(det == 0.0):
        raise ValueError("singular Jacobian in pushforward")
    a = np.asarray(a_eval(pts))
    sig = np.asarray(sigma_eval(pts))
    a_push = np.einsum("nij,njk,nlk->nil", jac, a, jac) / det[:, None, None]
    s_push = sig / det
    if single:
        return a_push[0], s_push[0]
    return a_push, s_push


def pushforward_at_target(a_eval, sigma_eval, T: Diffeomorphism, y):
    """Evaluate (T_* a, T_* sigma) at target points y (pulling back x = T^{-1} y)."""
    pts, single = _as_points(y)
    x = T.inverse(pts)
    out = pushforward(a_eval, sigma_eval, T, x)
    return out if not single else out


@dataclass(frozen=True)
class SmoothField:
    """Smooth scalar field with gradient, for transport checks."""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]


def _polar_quadrature(r_in: float, r_out: float, order: int):
    """Composite Gauss(r) x trapezoid(theta) rule on an annulus.

    ``order`` Gauss points per radial panel on ``order`` panels; mapped
    integrands are rational, so the composite refinement carries the accuracy
    past per-panel polynomial exactness.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(r_in, r_out, order + 1)
    r = np.concatenate(
        [0.5 * (b - a) * nodes + 0.5 * (a + b) for a, b in zip(edges, edges[1:])]
    )
    wr = np.concatenate(
        [0.5 * (b - a) * weights for a, b in zip(edges, edges[1:])]
    )
    n_th = max(8 * order, 32)
    th = 2.0 * np.pi * np.arange(n_th) / n_th
    wth = 2.0 * np.pi / n_th
    R, TH = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()], axis=1)
    w = (np.outer(wr * r, np.full(n_th, wth))).ravel()
    return pts, w


def _bilinear(a_vals, sig_vals, u, gu, phi, gphi, w) -> complex:
    grad_term = np.einsum("nij,nj,ni->n", a_vals, gu, gphi)
    return complex(np.sum(w * (grad_term - sig_vals * u * phi)))


def weak_form_transport_check(
    a_eval,
    sigma_eval,
    u: SmoothField,
    phi: SmoothField,
    T: Diffeomorphism,
    source_annulus: tuple[float, float],
    quadrature_order: int = 8,
) -> float:
    """Residual of the weak-form invariance under the coefficient pushforward.

    Both sides of

        int_{source} (a grad u . grad phi - sigma u phi)
          = int_{target} (T_*a grad v . grad psi - T_*sigma v psi),

    with v = u o T^{-1}, psi = phi o T^{-1}, are quadratured independently
    (the target side on its own annulus grid), so the residual measures real
    quadrature disagreement, not an algebraic identity.

    The target side assumes T maps circles about the origin to circles
    (Kelvin, dilations, rotations); pass maps of that class.
    """
    r_in, r_out = source_annulus
    pts_s, w_s = _polar_quadrature(r_in, r_out, quadrature_order)
    lhs = _bilinear(
        np.asarray(a_eval(pts_s)),
        np.asarray(sigma_eval(pts_s)),
        u.value(pts_s),
        u.gradient(pts_s),
        phi.value(pts_s),
        phi.gradient(pts_s),
        w_s,
    )

    img = T.apply(np.array([[r_in, 0.0], [r_out, 0.0]]))
    radii = sorted(np.hypot(img[:, 0], img[:, 1]))
    pts_t, w_t = _polar_quadrature(radii[0], radii[1], quadrature_order)
    x_back = T.inverse(pts_t)
    if np.unique(np.round(x_back, 12), axis=0).shape[0] < len(x_back):
        raise ValueError("non-bijective sampling detected (duplicate preimages)")
    jac = np.atleast_3d(T.jacobian(x_back))
    det = np.abs(np.linalg.det(jac))
    if np.any(det == 0.0):
        raise ValueError("singular Jacobian on target quadrature grid")
    a_push = (
        np.einsum("nij,njk,nlk->nil", jac, np.asarray(a_eval(x_back)), jac)
        / det[:, None, None]
    )
    sig_push = np.asarray(sigma_eval(x_back)) / det
    # grad(u o T^{-1})(y) = DT(x)^{-T} grad u(x)
    jinv_t = np.linalg.inv(jac).transpose(0, 2, 1)
    gv = np.einsum("nij,nj->ni", jinv_t, u.gradient(x_back))
    gpsi = np.einsum("nij,nj->ni", jinv_t, phi.gradient(x_back))
    rhs = _bilinear(
        a_push, sig_push, u.value(x_back), gv, phi.value(x_back), gpsi, w_t
    )
    return abs(lhs - rhs)
