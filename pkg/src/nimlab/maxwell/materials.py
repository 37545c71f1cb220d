"""Lorentz-model susceptibilities with causality and passivity validators.

Frequency-domain susceptibility (Fourier convention
X^(w) = (2 pi)^(-1/2) int X(t) e^{i w t} dt):

    chi^(w) = sum_l  wp_l^2 / (w0_l^2 - w^2 - 2 i g_l w)

whose causal inverse transform is

    chi(t) = sqrt(2 pi) theta(t) sum_l wp_l^2 sin(nu_l t)/nu_l e^{-g_l t},
    nu_l^2 = w0_l^2 - g_l^2,

with sin(nu t)/nu continued to sinh for overdamped poles.  The convolution
kernel acting on fields is lambda = chi' (lambda^ = -i w chi^); it vanishes
for t < 0 (causality) and its quadratic form is nonnegative (passivity),
equivalently w Im(eps^), w Im(mu^) >= 0 in the anisotropic case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "LorentzPole",
    "EMMaterials",
    "PassivityReport",
    "chi_freq",
    "chi_time",
    "lambda_time",
    "passivity_check",
    "passivity_matrix_check",
    "convolution_positivity_test",
]

SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class LorentzPole:
    """One resonance: plasma frequency, resonance frequency, damping."""

    omega_p: float
    omega_0: float
    gamma: float

    def __post_init__(self):
        if self.omega_p <= 0:
            raise ValueError("omega_p must be positive")
        if self.omega_0 < 0 or self.gamma < 0:
            raise ValueError("omega_0 and gamma must be nonnegative")

    def nu(self) -> complex:
        """sqrt(omega_0^2 - gamma^2); imaginary for overdamped poles."""
        val = self.omega_0**2 - self.gamma**2
        return complex(np.sqrt(val)) if val >= 0 else 1j * np.sqrt(-val)

    @property
    def coupling(self) -> float:
        """Drive strength kappa = sqrt(2 pi) omega_p^2 of the auxiliary ODE."""
        return SQRT_2PI * self.omega_p**2


def chi_freq(poles: Sequence[LorentzPole], omega) -> np.ndarray:
    """Scalar susceptibility (times identity) at the given frequencies."""
    w = np.asarray(omega, dtype=float)
    out = np.zeros(w.shape, dtype=complex)
    for p in poles:
        denom = p.omega_0**2 - w**2 - 2j * p.gamma * w
        if np.any(denom == 0):
            raise ZeroDivisionError(
                f"undamped pole hit exactly at resonance omega={p.omega_0}"
            )
        out = out + p.omega_p**2 / denom
    return out


def _sinc_nu(nu: complex, t: np.ndarray) -> np.ndarray:
    """sin(nu t)/nu, analytic through nu = 0 (-> t)."""
    if abs(nu) < 1e-300:
        return t.astype(complex)
    return np.sin(nu * t) / nu


def chi_time(poles: Sequence[LorentzPole], t) -> np.ndarray:
    """Causal time-domain susceptibility kernel; exactly zero for t < 0."""
    tt = np.asarray(t, dtype=float)
    out = np.zeros(tt.shape)
    pos = tt >= 0
    tp = tt[pos]
    acc = np.zeros(tp.shape, dtype=complex)
    for p in poles:
        acc += p.omega_p**2 * _sinc_nu(p.nu(), tp) * np.exp(-p.gamma * tp)
    out[pos] = SQRT_2PI * acc.real
    return out if out.ndim else float(out)


def lambda_time(poles: Sequence[LorentzPole], t) -> np.ndarray:
    """Convolution kernel lambda = chi' (jump to sqrt(2 pi) sum wp^2 at t=0+)."""
    tt = np.asarray(t, dtype=float)
    out = np.zeros(tt.shape)
    pos = tt >= 0
    tp = tt[pos]
    acc = np.zeros(tp.shape, dtype=complex)
    for p in poles:
        nu = p.nu()
        acc += (
            p.omega_p**2
            * np.exp(-p.gamma * tp)
            * (np.cos(nu * tp) - p.gamma * _sinc_nu(nu, tp))
        )
    out[pos] = SQRT_2PI * acc.real
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PassivityReport:
    passed: bool
    worst: float
    worst_omega: float
    detail: str = ""


def passivity_check(
    poles_e: Sequence[LorentzPole],
    poles_m: Sequence[LorentzPole],
    omegas,
    tol: float = 1e-12,
) -> PassivityReport:
    """Verify w Im(eps^), w Im(mu^) >= -tol on the frequency grid.

    Failures are reported, not raised; a fabricated anti-passive kernel
    (negative damping) shows up as a negative worst margin.
    """
    w = np.asarray(omegas, dtype=float)
    worst = np.inf
    worst_w = 0.0
    for poles in (poles_e, poles_m):
        if not poles:
            continue
        margin = w * chi_freq(poles, w).imag
        i = int(np.argmin(margin))
        if margin[i] < worst:
            worst = float(margin[i])
            worst_w = float(w[i])
    if not np.isfinite(worst):
        worst = 0.0
    return PassivityReport(
        passed=worst >= -tol,
        worst=worst,
        worst_omega=worst_w,
        detail="w*Im(chi) over both susceptibility families",
    )


def passivity_matrix_check(
    lambda_hat: Callable[[float], np.ndarray],
    omegas,
    n_vectors: int = 8,
    seed: int = 0,
    tol: float = 1e-12,
) -> PassivityReport:
    """General 6x6 kernel test: Re(Lambda^(w) X . conj(X)) >= 0.

    For user-supplied bi-anisotropic kernels; checked via the smallest
    eigenvalue of the Hermitian part plus random probe vectors.  Report form
    only; the stepper itself is wired to the block-diagonal Lorentz class.
    """
    rng = np.random.default_rng(seed)
    worst = np.inf
    worst_w = 0.0
    for w in np.asarray(omegas, dtype=float):
        lam = np.asarray(lambda_hat(float(w)), dtype=complex)
        herm = 0.5 * (lam + lam.conj().T)
        ev = float(np.linalg.eigvalsh(herm)[0])
        if ev < worst:
            worst, worst_w = ev, float(w)
        for _ in range(n_vectors):
            x = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            x /= np.linalg.norm(x)
            val = float(np.real(np.vdot(x, lam @ x)))
            if val < worst:
                worst, worst_w = val, float(w)
    return PassivityReport(
        passed=worst >= -tol,
        worst=worst,
        worst_omega=worst_w,
        detail="min Re(Lambda X . conj X) over probes",
    )


def convolution_positivity_test(
    poles: Sequence[LorentzPole],
    v: np.ndarray,
    T: float,
    dt: float,
) -> float:
    """Trapezoid value of int_0^T <(lambda * v)(s), v(s)> ds (must be >= -tol).

    ``v`` holds samples of the field on the uniform grid 0, dt, ..., T; a
    trailing axis of components is allowed.  The truncated causal convolution
    (lambda * v)(t) = int_0^t lambda(t - tau) v(tau) d tau is quadratured with
    the trapezoid rule on the same grid.
    """
    v = np.asarray(v, dtype=float)
    nt = v.shape[0]
    if not np.isclose((nt - 1) * dt, T, rtol=1e-9):
        raise ValueError("v must sample the uniform grid 0..T with step dt")
    lam = lambda_time(poles, np.arange(nt) * dt)
    flat = v.reshape(nt, -1)
    conv = np.empty_like(flat)
    # Trapezoid-in-tau truncated convolution: full discrete convolution with
    # the endpoint weights (tau = 0 and tau = t) halved.
    for c in range(flat.shape[1]):
        full = np.convolve(lam, flat[:, c])[:nt]
        conv[:, c] = dt * (full - 0.5 * lam * flat[0, c] - 0.5 * lam[0] * flat[:, c])
    conv[0] = 0.0
    integrand = np.sum(conv * flat, axis=1)
    wt = np.ones(nt)
    wt[0] = wt[-1] = 0.5
    return float(np.sum(wt * integrand) * dt)


@dataclass(frozen=True)
class EMMaterials:
    """Background tensors plus Lorentz pole lists for both field families.

    ``eps_rel`` and ``mu_rel`` are positive scalars or per-axis triples
    (diagonal anisotropy), optionally spatially varying arrays broadcastable
    to the grid.  Cross susceptibilities are fixed to zero; the concrete
    Lorentz class is block-diagonal.
    """

    eps_rel: object = 1.0
    mu_rel: object = 1.0
    poles_e: tuple[LorentzPole, ...] = ()
    poles_m: tuple[LorentzPole, ...] = ()

    def _minmax(self, value) -> tuple[float, float]:
        comps = value if isinstance(value, (tuple, list)) else (value,)
        lo = min(float(np.min(np.asarray(c))) for c in comps)
        hi = max(float(np.max(np.asarray(c))) for c in comps)
        return lo, hi

    def __post_init__(self):
        for name, value in (("eps_rel", self.eps_rel), ("mu_rel", self.mu_rel)):
            lo, _ = self._minmax(value)
            if lo <= 0:
                raise ValueError(f"{name} must be uniformly positive (min {lo})")

    def component(self, which: str, axis: int):
        value = self.eps_rel if which == "eps" else self.mu_rel
        if isinstance(value, (tuple, list)):
            return np.asarray(value[axis], dtype=float)
        return np.asarray(value, dtype=float)

    def ellipticity(self) -> tuple[float, float]:
        lo_e, hi_e = self._minmax(self.eps_rel)
        lo_m, hi_m = self._minmax(self.mu_rel)
        return min(lo_e, lo_m), max(hi_e, hi_m)

    def wave_speed_bound(self) -> float:
        """max over space of gamma_e * gamma_m with gamma the largest
        eigenvalue of the inverse square roots of eps_rel, mu_rel."""
        lo_e, _ = self._minmax(self.eps_rel)
        lo_m, _ = self._minmax(self.mu_rel)
        return 1.0 / np.sqrt(lo_e * lo_m)
