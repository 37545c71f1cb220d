"""Experiment implementations behind the service endpoints and CLI.

Each subcommand reproduces one acceptance experiment: it solves the
configured device problems, measures the convergence/blow-up quantities,
writes CSV/VTK artifacts plus a versioned ``summary.json``, and returns the
summary as a dict with one pass/fail entry per criterion.

Rate conventions.  Superlens loss sweeps are measured inside the device
family: the lossless comparison field is realized as the solve at a
negligible loss (two orders below the sweep bottom), which discretizes the
reflection-built limit field directly and lets mesh errors cancel in the
difference; such errors vanish identically at the reference loss, so they
carry no discretization plateau.  The device-limit-equals-reference identity
is gated separately (magnification semantics) against the actual reference
solution.  Cloaking experiments compare against their reference media
directly; their fits exclude sweep points sitting below three times the
estimated discretization plateau, measured per sweep point by a
Richardson-amplified metric comparison against a refined, rotated mesh.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import media
from ..diagnostics import RateFitError, blowup_indicator, fit_rate
from ..geometry import MeshLocator, build_annular_mesh, embed_disk_inclusions
from ..helmholtz import (
    ComplexNodalField,
    SolverError,
    assemble,
    solve,
    stability_ratio,
    subdomain_norm,
)
from ..io_artifacts import write_csv, write_field_vtk, write_mesh_vtk
from ..maxwell import cones as mx_cones
from ..maxwell import fdtd as mx_fdtd
from ..maxwell import materials as mx_mat
from .config import ConfigError, ExperimentConfig, SUBCOMMANDS
from . import selftest as selftest_mod

SCHEMA_VERSION = 1


class SolverFailure(RuntimeError):
    """A solver error bubbled out of an experiment, with context."""


def _try_fit(points, floors):
    """Rate fit or the refusal message when the floor dominates the sweep."""
    try:
        return fit_rate(points, floors), None
    except RateFitError as exc:
        return None, str(exc)


def _fit_criterion(name, fit, err, threshold, predicate):
    if fit is None:
        return _criterion(name, 0.0, f"{threshold} [rate fit refused: {err}]", False)
    return _criterion(name, fit.slope, threshold, predicate(fit))


def _criterion(name: str, measured, threshold: str, passed) -> dict:
    return {
        "criterion": name,
        "measured": float(measured) if np.isscalar(measured) else measured,
        "threshold": threshold,
        "pass": bool(passed),
    }


def _summary(subcommand, cfg, criteria, artifacts, t0) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommand": subcommand,
        "pass": all(c["pass"] for c in criteria),
        "runtime_seconds": time.time() - t0,
        "criteria": criteria,
        "artifacts": [str(a) for a in artifacts],
        "config": json.loads(cfg.model_dump_json()),
    }


def _write_summary(out: Path, summary: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    summary["artifacts"].append(str(path))
    return path


def _sweep_solve(mesh, medium, deltas, k, src, boundary, workers):
    def one(d):
        return solve(assemble(mesh, medium, d, k, src, boundary))

    if workers <= 1:
        return [one(d) for d in deltas]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, deltas))


def _exterior_mask(r3):
    return lambda c: np.hypot(c[:, 0], c[:, 1]) > r3


def _lens_mask(r1, r2):
    def mask(c):
        r = np.hypot(c[:, 0], c[:, 1])
        return (r > r1) & (r < r2)

    return mask


def _diff(u, v) -> ComplexNodalField:
    return ComplexNodalField(u.values - v.values, u.mesh)


# ---------------------------------------------------------------------------
# problem builders


def _superlens_problem(cfg: ExperimentConfig):
    if cfg.preset == "superlens-k":
        device, reference = media.superlens_finite_freq(
            cfg.object_value, cfg.object_sigma, cfg.radii.m, cfg.radii.r0
        )
    else:
        device, reference = media.superlens_quasistatic(
            cfg.object_value, cfg.radii.m, cfg.radii.r0
        )
    R = device.radii
    if cfg.domain_radius <= R.r3:
        raise ConfigError("domain must contain the device (R > r3)")
    mesh = build_annular_mesh(
        cfg.domain_radius,
        list(device.suggested_circles),
        cfg.mesh.angular_count,
        cfg.mesh.radial_grading,
    )
    src = media.bump_source(cfg.source_center, cfg.source_width)
    src.check_clears(R.r3)
    return device, reference, mesh, src


def _cloak_problem(cfg: ExperimentConfig):
    r2 = cfg.radii.r2 if cfg.radii.r2 is not None else 1.0
    r3 = cfg.radii.shell_ratio * r2
    r1 = r2**2 / r3
    profile = media.smoothed_shell_profile(cfg.object_value, r2)
    shell = media.radial_matrix_field(profile)
    if cfg.preset == "cloak-k":
        if cfg.k <= 0:
            raise ConfigError("the cloak-k preset needs k > 0")
        device = media.cloak_finite_freq(shell, cfg.object_sigma, r1, r2, r3)
    else:
        device = media.cloak(shell, r1, r2, r3)
    reference = media.homogeneous("cloak-reference")
    circles = sorted(
        set(device.suggested_circles) | {1.5 * r2, r2**2 / (1.5 * r2), r2 / 2.0}
    )
    mesh = build_annular_mesh(
        cfg.domain_radius, circles, cfg.mesh.angular_count, cfg.mesh.radial_grading
    )
    src = media.bump_source(cfg.source_center, cfg.source_width)
    src.check_clears(r3)
    return device, reference, mesh, src


def _alr_points(cfg: ExperimentConfig):
    r1, r2 = cfg.radii.r1, cfg.radii.r2
    a1, a2, _ = np.deg2rad(np.asarray(cfg.radii.object_angle_deg))
    return (r1 * np.cos(a1), r1 * np.sin(a1)), (r2 * np.cos(a2), r2 * np.sin(a2))


def _embed_alr_inclusions(cfg: ExperimentConfig, mesh):
    x1, x2 = _alr_points(cfg)
    return embed_disk_inclusions(mesh, [x1, x2], cfg.radii.r0, cfg.mesh.refine_levels)


def _alr_problem(cfg: ExperimentConfig):
    r1, r2, r0 = cfg.radii.r1, cfg.radii.r2, cfg.radii.r0
    if r1 is None or r2 is None:
        raise ConfigError("alr preset needs explicit r1 and r2")
    x1, x2 = _alr_points(cfg)
    device, reference = media.alr_lens_with_objects(
        cfg.object_value, x1, x2, r0, r1, r2
    )
    mesh = build_annular_mesh(
        cfg.domain_radius,
        list(device.suggested_circles),
        cfg.mesh.angular_count,
        cfg.mesh.radial_grading,
    )
    mesh = _embed_alr_inclusions(cfg, mesh)
    src = media.bump_source(cfg.source_center, cfg.source_width)
    src.check_clears(device.radii.r3)
    return device, reference, mesh, src


def _defective_problem(cfg: ExperimentConfig):
    r1, r2, r0 = cfg.radii.r1, cfg.radii.r2, cfg.radii.r0
    if r1 is None or r2 is None:
        raise ConfigError("defective-cloak preset needs explicit r1 and r2")
    r3 = r2**2 / r1
    _, _, a3 = np.deg2rad(np.asarray(cfg.radii.object_angle_deg))
    x3 = (r3 * np.cos(a3), r3 * np.sin(a3))
    device, visible = media.defective_cloak(cfg.object_value, x3, r0, r1, r2)
    mesh = build_annular_mesh(
        cfg.domain_radius,
        list(device.suggested_circles),
        cfg.mesh.angular_count,
        cfg.mesh.radial_grading,
    )
    mesh = embed_disk_inclusions(mesh, [x3], r0, cfg.mesh.refine_levels)
    # The lens reflection images the object near the inner circle; resolve it.
    img_center = (r1 * np.cos(a3), r1 * np.sin(a3))
    img_radius = min(max(2.0 * r0 * (r2**2 / r3**2), 0.05), 0.5 * r1)
    mesh = embed_disk_inclusions(mesh, [img_center], img_radius, cfg.mesh.refine_levels)
    src = media.bump_source(cfg.source_center, cfg.source_width)
    src.check_clears(r3)
    return device, visible, mesh, src


def _fine_mesh(cfg: ExperimentConfig, mesh):
    n_fine = int(2 * round(cfg.mesh.angular_count * cfg.mesh.floor_refine / 2))
    return build_annular_mesh(
        mesh.outer_radius,
        list(mesh.interface_circles),
        n_fine,
        cfg.mesh.radial_grading,
        theta_offset=np.pi / n_fine,
    )


def _richardson_floors(errs_coarse, errs_fine, refine_ratio):
    """3x the Richardson-extrapolated mesh artifact of each metric value.

    Exterior-error plateaus decay first order in h, so the artifact on the
    coarse mesh is |E_c - E_f| / (1 - 1/ratio); with the default ratio 1.5
    that is 3 |E_c - E_f|.  Used for the vs-reference metrics, whose floors
    are additive plateaus.
    """
    amp = 1.0 / (1.0 - 1.0 / refine_ratio)
    return 3.0 * amp * np.abs(np.asarray(errs_coarse) - np.asarray(errs_fine))


def _per_delta_floors(coarse_fields, fine_fields, mesh, fine, region, kind):
    """3x the mesh-refinement uncertainty of each measured difference field.

    Each entry compares the coarse difference field, interpolated onto a
    refined half-sector-rotated mesh (so discretization artifacts do not
    cancel coherently), against the fine difference field in the criterion's
    own norm and region.  Points whose error sits below 3x this uncertainty
    are discretization-dominated and excluded from rate fits.
    """
    loc = MeshLocator(mesh)
    floors = []
    for d_c, d_f in zip(coarse_fields, fine_fields):
        on_fine = ComplexNodalField(d_c.at(fine.vertices, loc), fine)
        diff = ComplexNodalField(on_fine.values - d_f.values, fine)
        floors.append(3.0 * subdomain_norm(diff, fine, region, kind))
    return np.asarray(floors)


def _rows_from_fit(deltas, errors, fit):
    return [
        (d, e, bool(inc)) for (d, e, inc) in zip(deltas, errors, fit.included)
    ]


# ---------------------------------------------------------------------------
# superlens experiments (quasistatic and finite frequency)


def _run_superlens(cfg: ExperimentConfig, out: Path, finite_freq: bool):
    t0 = time.time()
    device, reference, mesh, src = _superlens_problem(cfg)
    R = device.radii
    boundary = "absorbing" if finite_freq else "dirichlet"
    k = cfg.k if finite_freq else 0.0
    ref_delta = cfg.delta_ref() if finite_freq else 0.0
    deltas = cfg.sweep.values()

    u_lim = solve(assemble(mesh, device, cfg.delta_ref(), k, src, boundary))
    u_hat = solve(assemble(mesh, reference, ref_delta, k, src, boundary))
    sweep = _sweep_solve(mesh, device, deltas, k, src, boundary, cfg.workers)

    ext = _exterior_mask(R.r3)
    e_whole = [subdomain_norm(_diff(u, u_lim), mesh, None, "H1") for u in sweep]
    e_ext = [subdomain_norm(_diff(u, u_lim), mesh, ext, "H1") for u in sweep]
    e_ref = [subdomain_norm(_diff(u, u_hat), mesh, ext, "H1") for u in sweep]
    ref_scale = subdomain_norm(u_hat, mesh, ext, "H1")

    # In-family errors vanish identically at the reference loss, so they have
    # no additive discretization plateau to exclude; the floor rule applies to
    # the vs-reference metrics (none fitted here).
    fit_whole, err_whole = _try_fit(list(zip(deltas, e_whole)), 0.0)
    fit_ext, err_ext = _try_fit(list(zip(deltas, e_ext)), 0.0)

    criteria = []
    if finite_freq:
        criteria.append(
            _fit_criterion(
                "superlens-k-exterior-slope", fit_ext, err_ext,
                "slope in [0.7, 1.3] (absorbing-boundary band)",
                lambda f: 0.7 <= f.slope <= 1.3,
            )
        )
    else:
        criteria.append(
            _fit_criterion(
                "superlens-whole-domain-slope", fit_whole, err_whole,
                "slope in [0.35, 0.65] with R^2 >= 0.98",
                lambda f: 0.35 <= f.slope <= 0.65 and f.r_squared >= 0.98,
            )
        )
        criteria.append(
            _fit_criterion(
                "superlens-exterior-slope", fit_ext, err_ext,
                "slope in [0.8, 1.2] with R^2 >= 0.98",
                lambda f: 0.8 <= f.slope <= 1.2 and f.r_squared >= 0.98,
            )
        )
        # Magnification semantics: the device agrees with the magnified-object
        # reference outside B_r3, consistently with a linear-in-delta decay.
        d_arr = np.asarray(deltas)
        i_mid = int(np.argmin(np.abs(d_arr - 1e-2)))
        i_min = len(deltas) - 1
        rel_min = e_ref[i_min] / ref_scale
        lin_ok = e_ref[i_min] <= 10.0 * (d_arr[i_min] / d_arr[i_mid]) * e_ref[i_mid]
        criteria.append(
            _criterion(
                "superlens-magnification",
                rel_min,
                "rel exterior distance <= 5% and linear-in-delta consistent",
                rel_min <= 0.05 and lin_ok,
            )
        )

    label = "superlens-k" if finite_freq else "superlens-rate"
    artifacts = [
        write_csv(
            out / "errors.csv",
            ["delta", "error", "region", "included"],
            [
                *_region_rows(deltas, e_whole, "whole-in-family", fit_whole),
                *_region_rows(deltas, e_ext, "exterior-in-family", fit_ext),
                *[(d, e, "exterior-vs-reference", True) for d, e in zip(deltas, e_ref)],
            ],
        ),
        write_csv(
            out / "fits.csv",
            ["slope", "intercept", "r2", "n_points"],
            [
                (f.slope, f.intercept, f.r_squared, f.n_points)
                for f in (fit_whole, fit_ext)
                if f is not None
            ],
        ),
        write_csv(
            out / "norms.csv",
            ["delta", "norm_kind", "region", "value"],
            [(d, "H1", "exterior-vs-reference", e) for d, e in zip(deltas, e_ref)]
            + [(0.0, "H1", "reference-exterior-scale", ref_scale)],
        ),
    ]
    if cfg.write_vtk:
        artifacts.append(write_mesh_vtk(out / "mesh.vtk", mesh))
        artifacts.append(
            write_field_vtk(out / "field_min_delta.vtk", mesh, sweep[-1].values)
        )
    summary = _summary(label, cfg, criteria, artifacts, t0)
    summary["mesh_elements"] = int(mesh.num_triangles)
    summary["fits"] = {
        "whole-in-family": _fit_info(fit_whole, 0.0),
        "exterior-in-family": _fit_info(fit_ext, 0.0),
    }
    _write_summary(out, summary)
    return summary


def _region_rows(deltas, errors, region, fit):
    included = fit.included if fit is not None else [False] * len(deltas)
    return [(d, e, region, bool(i)) for d, e, i in zip(deltas, errors, included)]


def _fit_info(fit, floors):
    if fit is None:
        return {"slope": None, "r2": None, "n_points": 0,
                "floor": float(np.max(floors))}
    return {"slope": fit.slope, "r2": fit.r_squared, "n_points": fit.n_points,
            "floor": float(np.max(floors))}


# ---------------------------------------------------------------------------
# cloak experiments


def _run_cloak(cfg: ExperimentConfig, out: Path):
    t0 = time.time()
    device, reference, mesh, src = _cloak_problem(cfg)
    R = device.radii
    deltas = cfg.sweep.values()
    finite_freq = cfg.preset == "cloak-k"
    k = cfg.k if finite_freq else 0.0
    boundary = "absorbing" if finite_freq else "dirichlet"
    ref_delta = cfg.delta_ref() if finite_freq else 0.0
    u_hat = solve(assemble(mesh, reference, ref_delta, k, src, boundary))
    sweep = _sweep_solve(mesh, device, deltas, k, src, boundary, cfg.workers)

    ext = _exterior_mask(R.r3)
    lens = _lens_mask(R.r1, R.r2)
    errs = [subdomain_norm(_diff(u, u_hat), mesh, ext, "H1") for u in sweep]
    grads = [blowup_indicator(u, d, lens) for u, d in zip(sweep, deltas)]

    fine = _fine_mesh(cfg, mesh)
    u_hat_f = solve(assemble(fine, reference, ref_delta, k, src, boundary))
    sweep_f = _sweep_solve(fine, device, deltas, k, src, boundary, cfg.workers)
    ext_f = _exterior_mask(R.r3)
    errs_f = [subdomain_norm(_diff(u, u_hat_f), fine, ext_f, "H1") for u in sweep_f]
    floors = _richardson_floors(errs, errs_f, cfg.mesh.floor_refine)
    fit, err_fit = _try_fit(list(zip(deltas, errs)), floors)
    grad_fit = fit_rate([(d, g[0]) for d, g in zip(deltas, grads)], 0.0)
    if fit is not None:
        kept = [e for e, i in zip(errs, fit.included) if i]
        decreasing = all(kept[i] > kept[i + 1] for i in range(len(kept) - 1))
    else:
        decreasing = False

    criteria = [
        _fit_criterion(
            "cloak-exterior-slope", fit, err_fit,
            f"strictly decreasing, slope >= {cfg.alpha_target} with R^2 >= 0.95",
            lambda f: decreasing and f.slope >= cfg.alpha_target
            and f.r_squared >= 0.95,
        ),
        _criterion(
            "cloak-blowup-indicator",
            grad_fit.slope,
            "lens gradient-energy slope >= -0.5",
            grad_fit.slope >= -0.5,
        ),
    ]
    artifacts = [
        write_csv(
            out / "errors.csv",
            ["delta", "error", "region", "included"],
            _region_rows(deltas, errs, "exterior-vs-reference", fit),
        ),
        write_csv(
            out / "fits.csv",
            ["slope", "intercept", "r2", "n_points"],
            [(fit.slope, fit.intercept, fit.r_squared, fit.n_points)]
            if fit is not None else [],
        ),
        write_csv(
            out / "norms.csv",
            ["delta", "norm_kind", "region", "value"],
            [(d, "gradient-energy", "lens", g[0]) for d, g in zip(deltas, grads)]
            + [(d, "power", "lens", g[1]) for d, g in zip(deltas, grads)],
        ),
    ]
    if cfg.write_vtk:
        artifacts.append(write_mesh_vtk(out / "mesh.vtk", mesh))
    summary = _summary("cloak-rate", cfg, criteria, artifacts, t0)
    summary["preset"] = cfg.preset
    summary["mesh_elements"] = int(mesh.num_triangles)
    summary["fits"] = {
        "exterior-vs-reference": _fit_info(fit, floors),
        "lens-gradient-energy": {"slope": grad_fit.slope, "r2": grad_fit.r_squared},
    }
    _write_summary(out, summary)
    return summary


def _run_alr(cfg: ExperimentConfig, out: Path):
    t0 = time.time()
    device, reference, mesh, src = _alr_problem(cfg)
    R = device.radii
    deltas = cfg.sweep.values()
    u_hat = solve(assemble(mesh, reference, 0.0, 0.0, src))
    sweep = _sweep_solve(mesh, device, deltas, 0.0, src, "dirichlet", cfg.workers)
    ext = _exterior_mask(R.r3)
    errs = [subdomain_norm(_diff(u, u_hat), mesh, ext, "H1") for u in sweep]
    errs_l2 = [subdomain_norm(_diff(u, u_hat), mesh, ext, "L2") for u in sweep]

    fine = _fine_mesh(cfg, mesh)
    fine = _embed_alr_inclusions(cfg, fine)
    u_hat_f = solve(assemble(fine, reference, 0.0, 0.0, src))
    sweep_f = _sweep_solve(fine, device, deltas, 0.0, src, "dirichlet", cfg.workers)
    errs_f = [subdomain_norm(_diff(u, u_hat_f), fine, ext, "H1") for u in sweep_f]
    floors = _richardson_floors(errs, errs_f, cfg.mesh.floor_refine)
    fit, err_fit = _try_fit(list(zip(deltas, errs)), floors)
    criteria = [
        _fit_criterion(
            "alr-exterior-slope", fit, err_fit,
            f"slope >= {cfg.alpha_target} with R^2 >= 0.95",
            lambda f: f.slope >= cfg.alpha_target and f.r_squared >= 0.95,
        )
    ]
    artifacts = [
        write_csv(
            out / "errors.csv",
            ["delta", "error", "region", "included"],
            _region_rows(deltas, errs, "exterior-vs-reference", fit)
            + [(d, e, "exterior-vs-reference-L2", True) for d, e in zip(deltas, errs_l2)],
        ),
        write_csv(
            out / "fits.csv",
            ["slope", "intercept", "r2", "n_points"],
            [(fit.slope, fit.intercept, fit.r_squared, fit.n_points)]
            if fit is not None else [],
        ),
        write_csv(
            out / "norms.csv",
            ["delta", "norm_kind", "region", "value"],
            [(d, "L2", "exterior-vs-reference", e) for d, e in zip(deltas, errs_l2)],
        ),
    ]
    summary = _summary("alr-cloak", cfg, criteria, artifacts, t0)
    summary["mesh_elements"] = int(mesh.num_triangles)
    summary["fits"] = {
        "exterior-vs-reference": _fit_info(fit, floors),
    }
    summary["alr_l2_at_stop"] = errs_l2[-1]
    _write_summary(out, summary)
    return summary


def _run_defective(cfg: ExperimentConfig, out: Path):
    t0 = time.time()
    device, visible, mesh, src = _defective_problem(cfg)
    R = device.radii
    deltas = cfg.sweep.values()
    hom = media.homogeneous()
    u_hom = solve(assemble(mesh, hom, 0.0, 0.0, src))
    u_vis = solve(assemble(mesh, visible, 0.0, 0.0, src))
    sweep = _sweep_solve(mesh, device, deltas, 0.0, src, "dirichlet", cfg.workers)
    ext = _exterior_mask(R.r3)
    d_hom = [subdomain_norm(_diff(u, u_hom), mesh, ext, "L2") for u in sweep]
    d_vis = [subdomain_norm(_diff(u, u_vis), mesh, ext, "L2") for u in sweep]
    visibility = subdomain_norm(_diff(u_vis, u_hom), mesh, ext, "L2")

    # The working-cloak yardstick: the same comparison for the object cloak at
    # the bottom of the sweep, run at its own acceptance configuration.
    from .config import default_config

    alr_cfg = default_config("alr-cloak")
    alr_dev, alr_ref, alr_mesh, alr_src = _alr_problem(alr_cfg)
    alr_u = solve(assemble(alr_mesh, alr_dev, deltas[-1], 0.0, alr_src))
    alr_ref_u = solve(assemble(alr_mesh, alr_ref, 0.0, 0.0, alr_src))
    alr_dist = subdomain_norm(
        _diff(alr_u, alr_ref_u), alr_mesh, _exterior_mask(alr_dev.radii.r3), "L2"
    )

    vis_decreasing = all(d_vis[i] > d_vis[i + 1] for i in range(len(d_vis) - 1))
    criteria = [
        _criterion(
            "defective-cloak-visible",
            d_hom[-1] / max(alr_dist, 1e-300),
            ">= 5x the object-cloak homogeneous distance at the sweep bottom",
            d_hom[-1] >= 5.0 * alr_dist,
        ),
        _criterion(
            "defective-cloak-limit",
            d_vis[-1],
            "distance to the visible-object solution decreases with delta",
            vis_decreasing,
        ),
    ]
    artifacts = [
        write_csv(
            out / "errors.csv",
            ["delta", "error", "region", "included"],
            [(d, e, "exterior-vs-homogeneous", True) for d, e in zip(deltas, d_hom)]
            + [(d, e, "exterior-vs-visible", True) for d, e in zip(deltas, d_vis)],
        ),
        write_csv(
            out / "norms.csv",
            ["delta", "norm_kind", "region", "value"],
            [(0.0, "L2", "visible-vs-homogeneous", visibility),
             (deltas[-1], "L2", "alr-baseline", alr_dist)],
        ),
    ]
    summary = _summary("defective-cloak", cfg, criteria, artifacts, t0)
    _write_summary(out, summary)
    return summary


def _run_stability(cfg: ExperimentConfig, out: Path):
    t0 = time.time()
    device, _, mesh, src = _superlens_problem(cfg)
    deltas = cfg.sweep.values()
    ratios, skipped = stability_ratio(mesh, device, deltas, src)
    vals = [r for _, r in ratios]
    head = vals[0]
    worst = max(vals)
    criteria = [
        _criterion(
            "stability-ratio-bounded",
            worst / head,
            "max ratio <= 10x its value at the largest loss",
            worst <= 10.0 * head and len(skipped) == 0,
        )
    ]
    artifacts = [
        write_csv(
            out / "norms.csv",
            ["delta", "norm_kind", "region", "value"],
            [(d, "stability-ratio", "whole", r) for d, r in ratios],
        )
    ]
    summary = _summary("stability-scan", cfg, criteria, artifacts, t0)
    _write_summary(out, summary)
    return summary


# ---------------------------------------------------------------------------
# Maxwell experiments


def _maxwell_setup(cfg: ExperimentConfig):
    p = cfg.maxwell
    grid = mx_fdtd.GridSpec((p.grid_n,) * 3, p.h)
    poles = tuple(
        mx_mat.LorentzPole(q.omega_p, q.omega_0, q.gamma) for q in p.poles
    )
    mat = mx_mat.EMMaterials(poles_e=poles)
    dt = mx_fdtd.max_stable_dt(grid, mat, p.cfl)
    return grid, mat, dt


def _run_maxwell_energy(cfg: ExperimentConfig, out: Path):
    t0 = time.time()
    p = cfg.maxwell
    grid, mat, dt = _maxwell_setup(cfg)
    mid = tuple(0.5 * p.grid_n * p.h for _ in range(3))

    # Free run: compactly supported pulse, no sources; the monotone
    # certificate functional must not increase at any step.
    u0 = mx_fdtd.bump_ball(grid, mid, p.pulse_width)
    state = mx_fdtd.fdtd_init(grid, mat, u0, dt)
    energies = []
    plain = []
    for _ in range(p.steps):
        mx_fdtd.fdtd_step(state)
        energies.append(state.certificate_energy)
        plain.append(mx_fdtd.energy(state))
    energies = np.asarray(energies)
    worst_rise = float(np.max(np.diff(energies)) / energies[0]) if len(energies) > 1 else 0.0

    # Sourced run: est-WP inequality with C = 1/sqrt(min eig of M).
    state2 = mx_fdtd.fdtd_init(grid, mat, None, dt)
    idx = tuple(int(0.5 * p.grid_n) for _ in range(3))
    omega = p.source_omega
    ramp = 10.0 * dt

    def waveform(t):
        return float(np.sin(omega * t) * min(1.0, t / ramp))

    src = [mx_fdtd.PointSource("Ez", idx, waveform)]
    probe_idx = tuple(int(0.5 * p.grid_n) + 8 for _ in range(3))
    lam_min, _ = mat.ellipticity()
    c_est = 1.0 / np.sqrt(lam_min)
    e0 = np.sqrt(mx_fdtd.energy(state2))
    acc = 0.0
    min_margin = np.inf
    rows_src = []
    probe_rows = []
    for _ in range(p.source_steps):
        w = waveform(state2.t + 0.5 * dt)
        mx_fdtd.fdtd_step(state2, src)
        acc += dt * np.sqrt(grid.cell_volume()) * abs(w)
        lhs = np.sqrt(mx_fdtd.energy(state2))
        bound = e0 + c_est * acc
        min_margin = min(min_margin, float(bound - lhs))
        rows_src.append((state2.t, lhs**2, bound**2))
        probe_rows.append(
            (state2.t, *(float(a[probe_idx]) for a in state2.E + state2.H))
        )

    criteria = [
        _criterion(
            "maxwell-energy-monotone",
            worst_rise,
            "certificate energy non-increasing within 1e-10 relative per step",
            worst_rise <= 1e-10,
        ),
        _criterion(
            "maxwell-energy-bound",
            min_margin,
            "sourced energy below the well-posedness bound every step",
            min_margin >= 0.0,
        ),
    ]
    artifacts = [
        write_csv(
            out / "energy_free.csv",
            ["t", "energy", "bound"],
            [
                ((i + 1) * dt, plain[i], energies[0])
                for i in range(len(plain))
            ],
        ),
        write_csv(out / "energy_source.csv", ["t", "energy", "bound"], rows_src),
        write_csv(
            out / "probe.csv",
            ["t", "Ex", "Ey", "Ez", "Hx", "Hy", "Hz"],
            probe_rows,
        ),
    ]
    if cfg.write_vtk:
        from ..io_artifacts import write_structured_vtk

        artifacts.append(
            write_structured_vtk(
                out / "snapshot.vtk",
                p.h,
                {"Ez": state.E[2], "Hy": state.H[1]},
            )
        )
    summary = _summary("maxwell-energy", cfg, criteria, artifacts, t0)
    _write_summary(out, summary)
    return summary


def _run_maxwell_speed(cfg: ExperimentConfig, out: Path):
    t0 = time.time()
    p = cfg.maxwell
    grid_shape = (p.grid_n,) * 3
    grid = mx_fdtd.GridSpec(grid_shape, p.h)
    R = p.cone_radius_cells * p.h
    w = p.cone_pulse_width * p.h
    # Pulse and probe center sit half a period apart; the support then clears
    # the certified ball by >= 12h on both periodic paths, which keeps the
    # discrete front's precursor below the certificate threshold.
    standoff = 0.5 * p.grid_n * p.h - R - w
    if standoff < 12.0 * p.h:
        raise ConfigError(
            "grid too small for the cone test: pulse standoff "
            f"{standoff / p.h:.1f}h < 12h"
        )
    a = (0.25 * p.grid_n * p.h, 0.5 * p.grid_n * p.h, 0.5 * p.grid_n * p.h)
    pulse_c = (0.75 * p.grid_n * p.h, 0.5 * p.grid_n * p.h, 0.5 * p.grid_n * p.h)

    criteria = []
    artifacts = []
    for label, mat in (
        ("vacuum", mx_mat.EMMaterials()),
        (
            "lorentz",
            mx_mat.EMMaterials(
                poles_e=tuple(
                    mx_mat.LorentzPole(q.omega_p, q.omega_0, q.gamma)
                    for q in p.poles
                )
            ),
        ),
    ):
        dt = mx_fdtd.max_stable_dt(grid, mat, p.cfl)
        u0 = mx_fdtd.bump_ball(grid, pulse_c, w)
        state = mx_fdtd.fdtd_init(grid, mat, u0, dt)
        cone = mx_cones.LightCone.around(grid, mat, a, R)
        report = mx_cones.light_cone_certificate(
            state, cone, threshold=1e-12, record_every=p.record_every
        )
        criteria.append(
            _criterion(
                f"finite-speed-{label}",
                report.max_violation,
                "max |u| in the shrinking balls <= 1e-12 of the global max",
                report.passed,
            )
        )
        artifacts.append(
            write_csv(
                out / f"cone_{label}.csv",
                ["t", "ball_radius", "max_inside", "max_global"],
                [
                    (r.t, r.ball_radius, r.max_inside, r.max_global)
                    for r in report.records
                ],
            )
        )
    summary = _summary("maxwell-speed", cfg, criteria, artifacts, t0)
    _write_summary(out, summary)
    return summary


def _run_passivity(cfg: ExperimentConfig, out: Path):
    t0 = time.time()
    rng = np.random.default_rng(cfg.seed)
    omegas = np.linspace(-60.0, 60.0, 4001)

    pole_sets = [
        tuple(
            mx_mat.LorentzPole(q.omega_p, q.omega_0, q.gamma)
            for q in cfg.maxwell.poles
        ),
        (mx_mat.LorentzPole(1.0, 2.0, 0.5),),
        (
            mx_mat.LorentzPole(0.7, 1.1, 0.2),
            mx_mat.LorentzPole(1.3, 3.0, 0.9),
        ),
    ]
    worst_passive = np.inf
    for poles in pole_sets:
        rep = mx_mat.passivity_check(poles, (), omegas)
        worst_passive = min(worst_passive, rep.worst)

    # causality: the kernel vanishes identically for t < 0
    t_neg = -np.linspace(1e-9, 10.0, 1001)
    causal_max = max(
        float(np.max(np.abs(mx_mat.chi_time(poles, t_neg)))) for poles in pole_sets
    )

    # negative control: a sign-flipped damping must be flagged
    class _AntiPole:
        omega_p, omega_0, gamma = 1.0, 2.0, -0.5

    anti = mx_mat.passivity_check([_AntiPole()], (), omegas)

    # positivity of the truncated-convolution quadratic form, Monte Carlo
    T_len, dt = 24.0, 0.03
    nt = int(round(T_len / dt)) + 1
    tgrid = np.arange(nt) * dt
    worst_mc = np.inf
    poles = pole_sets[0]
    for _ in range(100):
        n_modes = 5
        amps = rng.standard_normal(n_modes)
        freqs = rng.uniform(0.05, 3.0, n_modes)
        phases = rng.uniform(0, 2 * np.pi, n_modes)
        v = sum(a * np.sin(f * tgrid + ph) for a, f, ph in zip(amps, freqs, phases))
        val = mx_mat.convolution_positivity_test(poles, v, T_len, dt)
        vnorm2 = float(np.trapezoid(v**2, dx=dt))
        worst_mc = min(worst_mc, val / vnorm2)

    criteria = [
        _criterion(
            "causality-kernel",
            causal_max,
            "chi(t) = 0 exactly for t < 0",
            causal_max == 0.0,
        ),
        _criterion(
            "passivity-poles",
            worst_passive,
            "w Im(chi) >= -1e-12 for all damped pole sets",
            worst_passive >= -1e-12,
        ),
        _criterion(
            "passivity-negative-control",
            anti.worst,
            "sign-flipped damping must fail the check",
            not anti.passed,
        ),
        _criterion(
            "convolution-positivity",
            worst_mc,
            "int <(lambda*v), v> >= -1e-10 * ||v||^2 over 100 random fields",
            worst_mc >= -1e-10,
        ),
    ]
    artifacts = [
        write_csv(
            out / "passivity.csv",
            ["omega", "w_im_chi"],
            [
                (w_, w_ * float(mx_mat.chi_freq(pole_sets[0], w_).imag))
                for w_ in omegas[:: max(1, len(omegas) // 400)]
            ],
        )
    ]
    summary = _summary("passivity", cfg, criteria, artifacts, t0)
    _write_summary(out, summary)
    return summary


def _run_selftest(cfg: ExperimentConfig, out: Path):
    t0 = time.time()
    criteria = selftest_mod.run_checks(cfg.seed)
    summary = _summary("selftest", cfg, criteria, [], t0)
    _write_summary(out, summary)
    return summary


_RUNNERS = {
    "superlens-rate": lambda cfg, out: _run_superlens(cfg, out, finite_freq=False),
    "superlens-k": lambda cfg, out: _run_superlens(cfg, out, finite_freq=True),
    "cloak-rate": _run_cloak,
    "alr-cloak": _run_alr,
    "defective-cloak": _run_defective,
    "stability-scan": _run_stability,
    "maxwell-energy": _run_maxwell_energy,
    "maxwell-speed": _run_maxwell_speed,
    "passivity": _run_passivity,
    "selftest": _run_selftest,
}


def run(subcommand: str, config: ExperimentConfig | None = None) -> dict:
    """Run one named experiment; returns the summary dict (also written to disk).

    Raises:
        ConfigError: unknown subcommand or inconsistent configuration.
        SolverFailure: a linear solve failed; carries the original context.
    """
    if subcommand not in _RUNNERS:
        raise ConfigError(
            f"unknown subcommand '{subcommand}'; choose from {', '.join(SUBCOMMANDS)}"
        )
    from .config import default_config

    cfg = config or default_config(subcommand)
    out = Path(cfg.out_dir) / subcommand
    try:
        return _RUNNERS[subcommand](cfg, out)
    except (SolverError, FloatingPointError) as exc:
        raise SolverFailure(f"{subcommand}: {exc}") from exc
