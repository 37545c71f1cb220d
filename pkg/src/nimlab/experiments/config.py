"""Experiment configuration models and per-subcommand acceptance defaults.

Every default reproduces the desk-scale acceptance setup, so running a
subcommand with no config file re-runs the corresponding acceptance
experiment.  All knobs are overridable from a JSON config or CLI flags.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class DeltaSweep(BaseModel):
    """Geometric loss sweep from start down to stop (inclusive)."""

    start: float = 1e-1
    stop: float = 1e-3
    count: int = 7

    @model_validator(mode="after")
    def _check(self):
        if not (0.0 < self.stop <= self.start < 1.0):
            raise ValueError("need 0 < stop <= start < 1 for the loss sweep")
        if self.count < 4:
            raise ValueError("rate fits need at least 4 sweep points")
        return self

    def values(self) -> list[float]:
        if self.count == 1 or self.start == self.stop:
            return [self.start] * 1
        return list(
            np.exp(np.linspace(np.log(self.start), np.log(self.stop), self.count))
        )


class MeshParams(BaseModel):
    angular_count: int = 320
    radial_grading: float = 2.0
    refine_levels: int = 1
    floor_refine: float = 1.5  # angular factor for the discretization-floor mesh

    @model_validator(mode="after")
    def _check(self):
        if self.angular_count < 16:
            raise ValueError("angular_count must be >= 16")
        if not (1.0 <= self.radial_grading <= 2.5):
            raise ValueError("radial_grading outside the supported [1, 2.5]")
        return self


class RadiiParams(BaseModel):
    """Device ladder knobs; which ones apply depends on the preset."""

    m: float = 4.0
    r0: float = 1.0
    r1: Optional[float] = None
    r2: Optional[float] = None
    shell_ratio: float = 4.0  # cloak presets: r3 = shell_ratio * r2
    object_angle_deg: tuple[float, float, float] = (0.0, 90.0, 0.0)


class LorentzPoleParams(BaseModel):
    omega_p: float = 0.5
    omega_0: float = 0.4
    gamma: float = 0.08


class MaxwellParams(BaseModel):
    grid_n: int = 96
    h: float = 1.0
    cfl: float = 0.95
    steps: int = 240
    source_steps: int = 150
    poles: list[LorentzPoleParams] = Field(
        default_factory=lambda: [LorentzPoleParams()]
    )
    pulse_width: float = 8.0
    source_omega: float = 0.5
    cone_radius_cells: float = 30.0
    cone_pulse_width: float = 6.0
    record_every: int = 5

    @model_validator(mode="after")
    def _check(self):
        if not (0 < self.cfl <= 0.95):
            raise ValueError("cfl must lie in (0, 0.95]")
        if self.grid_n < 16:
            raise ValueError("grid_n must be >= 16")
        return self


class ExperimentConfig(BaseModel):
    """Full configuration for one experiment run."""

    preset: str = "superlens-qs"
    object_value: float = 2.0
    object_sigma: float = 1.0
    radii: RadiiParams = Field(default_factory=RadiiParams)
    sweep: DeltaSweep = Field(default_factory=DeltaSweep)
    k: float = 0.0
    domain_radius: float = 10.0
    source_center: tuple[float, float] = (9.0, 0.0)
    source_width: float = 0.45
    mesh: MeshParams = Field(default_factory=MeshParams)
    alpha_target: float = 0.5
    maxwell: MaxwellParams = Field(default_factory=MaxwellParams)
    out_dir: str = "nimlab-out"
    seed: int = 0
    workers: int = 1
    write_vtk: bool = False

    def delta_ref(self) -> float:
        """Negligible loss standing in for the lossless device limit."""
        return max(1e-9, 0.01 * self.sweep.stop)


_DEFAULTS: dict[str, dict] = {
    "superlens-rate": dict(
        preset="superlens-qs",
        object_value=2.0,
        radii=RadiiParams(m=4.0, r0=1.0),
        sweep=DeltaSweep(start=1e-1, stop=1e-3, count=7),
        domain_radius=10.0,
        source_center=(9.0, 0.0),
        source_width=0.45,
        mesh=MeshParams(angular_count=320),
    ),
    "superlens-k": dict(
        preset="superlens-k",
        object_value=2.0,
        object_sigma=1.0,
        radii=RadiiParams(m=4.0, r0=1.0),
        k=1.0,
        # The resonant transient at k=1 is still O(1) above 1e-2; the linear
        # regime the rate band targets lives below it.
        sweep=DeltaSweep(start=1e-2, stop=1e-4, count=7),
        domain_radius=24.0,  # 3 * r3: absorbing circle well away from the lens
        source_center=(9.0, 0.0),
        source_width=0.45,
        mesh=MeshParams(angular_count=288),
    ),
    "cloak-rate": dict(
        preset="cloak-qs",
        object_value=3.0,
        radii=RadiiParams(r2=1.0, shell_ratio=4.0),
        sweep=DeltaSweep(start=1e-1, stop=1e-3, count=7),
        domain_radius=6.0,
        source_center=(5.0, 0.0),
        source_width=0.4,
        mesh=MeshParams(angular_count=288),
    ),
    "alr-cloak": dict(
        preset="alr-objects",
        object_value=5.0,
        radii=RadiiParams(r1=2.0, r2=4.0, r0=0.1),
        sweep=DeltaSweep(start=1e-1, stop=1e-3, count=7),
        domain_radius=10.0,
        source_center=(9.0, 0.0),
        source_width=0.45,
        mesh=MeshParams(angular_count=384, refine_levels=2),
    ),
    "defective-cloak": dict(
        preset="defective-cloak",
        object_value=5.0,
        # A visible-size object right on the outer circle, near the source.
        radii=RadiiParams(r1=2.0, r2=4.0, r0=0.5, object_angle_deg=(0.0, 90.0, 0.0)),
        sweep=DeltaSweep(start=1e-1, stop=1e-3, count=7),
        domain_radius=10.0,
        source_center=(9.0, 0.0),
        source_width=0.45,
        mesh=MeshParams(angular_count=256),
    ),
    "stability-scan": dict(
        preset="superlens-qs",
        object_value=2.0,
        radii=RadiiParams(m=4.0, r0=1.0),
        sweep=DeltaSweep(start=1e-1, stop=1e-4, count=7),
        domain_radius=10.0,
        source_center=(9.0, 0.0),
        source_width=0.45,
        mesh=MeshParams(angular_count=192),
    ),
    "maxwell-energy": dict(maxwell=MaxwellParams(steps=240)),
    "maxwell-speed": dict(maxwell=MaxwellParams()),
    "passivity": dict(),
    "selftest": dict(),
}

SUBCOMMANDS: tuple[str, ...] = tuple(_DEFAULTS)


def default_config(subcommand: str) -> ExperimentConfig:
    if subcommand not in _DEFAULTS:
        raise ConfigError(
            f"unknown subcommand '{subcommand}'; choose from {', '.join(SUBCOMMANDS)}"
        )
    return ExperimentConfig(**_DEFAULTS[subcommand])


def load_config(subcommand: str, overrides: dict | None = None) -> ExperimentConfig:
    """Acceptance defaults for the subcommand, updated by override fields."""
    cfg = default_config(subcommand)
    if overrides:
        try:
            cfg = ExperimentConfig(**{**cfg.model_dump(), **overrides})
        except Exception as exc:
            raise ConfigError(str(exc)) from exc
    return cfg
