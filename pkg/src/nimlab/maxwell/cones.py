"""Finite-speed-of-propagation certificates on the staggered grid.

The background tensors alone bound the wave speed: with gamma_e, gamma_m the
largest eigenvalues of eps_rel^(-1/2) and mu_rel^(-1/2),

    c(x) = gamma_e(x) gamma_m(x),    c_{a,R} = ess sup_{B(a,R)} c(x),

and solutions starting (and forced) outside the shrinking balls B(a, R - c t)
stay out of them; dispersive currents never enlarge the cone.  The discrete
certificate measures max |u| over grid points in B(a, R - c t - 2h) -- the 2h
margin absorbs component staggering -- against a relative threshold, and it
refuses to certify when the hypotheses themselves fail (initial data or
sources meeting B(a, R)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fdtd import EMState, GridSpec, PointSource, fdtd_step
from .materials import EMMaterials

__all__ = ["LightCone", "CertificateRefusal", "ConeRecord", "light_cone_certificate"]


class CertificateRefusal(RuntimeError):
    """Hypotheses violated: the certificate refuses rather than failing."""


@dataclass(frozen=True)
class LightCone:
    """Ball B(center, radius) with its local speed bound."""

    center: tuple[float, float, float]
    radius: float
    speed: float

    @classmethod
    def around(
        cls, grid: GridSpec, materials: EMMaterials, center, radius: float
    ) -> "LightCone":
        # Uniform-in-space tensors: the ball sup equals the global bound.
        return cls(
            center=tuple(float(c) for c in center),
            radius=float(radius),
            speed=materials.wave_speed_bound(),
        )


@dataclass
class ConeRecord:
    t: float
    ball_radius: float
    max_inside: float
    max_global: float

    @property
    def ratio(self) -> float:
        if self.max_global == 0.0:
            return 0.0
        return self.max_inside / self.max_global


@dataclass
class ConeReport:
    passed: bool
    threshold: float
    records: list[ConeRecord]

    @property
    def max_violation(self) -> float:
        return max((r.ratio for r in self.records), default=0.0)


def _component_masks(grid: GridSpec, cone: LightCone):
    """Per-component squared distances to the cone center (periodic metric)."""
    masks = []
    L = [n * grid.h for n in grid.shape]
    for comp in ("Ex", "Ey", "Ez", "Hx", "Hy", "Hz"):
        x, y, z = grid.positions(comp)
        d2 = 0
        for coord, c0, period in zip((x, y, z), cone.center, L):
            d = np.abs(coord - c0)
            d = np.minimum(d, period - d)
            d2 = d2 + d**2
        masks.append(d2)
    return masks


def _max_inside(state: EMState, dist2, radius: float) -> float:
    if radius <= 0:
        return 0.0
    r2 = radius**2
    worst = 0.0
    for a, d2 in zip(state.E + state.H, dist2):
        m = d2 <= r2
        if m.any():
            worst = max(worst, float(np.max(np.abs(a[m]))))
    return worst


def light_cone_certificate(
    state: EMState,
    cone: LightCone,
    threshold: float = 1e-12,
    sources: Sequence[PointSource] = (),
    record_every: int = 5,
) -> ConeReport:
    """Run until the cone closes, checking the shrinking balls stay empty.

    At each recorded time t < R/c the max of |u| over grid points within
    B(a, R - c t - 2h) must not exceed ``threshold`` times the global max.

    Raises:
        CertificateRefusal: initial data intersect B(a, R), or a source fires
            inside the shrinking ball for its time slot.
    """
    grid = state.grid
    dist2 = _component_masks(grid, cone)
    margin = 2.0 * grid.h
    if _max_inside(state, dist2, cone.radius) > 0.0:
        raise CertificateRefusal(
            f"initial data intersect B(center, R={cone.radius:g}); "
            "the finite-speed hypotheses do not hold"
        )
    t_max = cone.radius / cone.speed
    n_steps = int(np.floor(t_max / state.dt))
    for src in sources:
        comp_i = ("Ex", "Ey", "Ez", "Hx", "Hy", "Hz").index(src.component)
        d = float(np.sqrt(dist2[comp_i][src.index]))
        for n in range(n_steps):
            t = n * state.dt
            ball = cone.radius - cone.speed * t
            if ball > 0 and d < ball and src.waveform(t) != 0.0:
                raise CertificateRefusal(
                    f"source at distance {d:g} fires inside the shrinking ball "
                    f"at t={t:g}; refusing to certify"
                )

    records: list[ConeRecord] = []
    passed = True
    for n in range(n_steps):
        fdtd_step(state, sources)
        if state.step % record_every and n != n_steps - 1:
            continue
        ball = cone.radius - cone.speed * state.t - margin
        if ball <= 0:
            break
        rec = ConeRecord(
            t=state.t,
            ball_radius=ball,
            max_inside=_max_inside(state, dist2, ball),
            max_global=state.max_field(),
        )
        records.append(rec)
        if rec.max_global > 0 and rec.ratio > threshold:
            passed = False
    return ConeReport(passed=passed, threshold=threshold, records=records)
