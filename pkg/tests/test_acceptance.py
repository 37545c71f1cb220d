"""Acceptance suite: one test per acceptance criterion, at full scale.

Each test runs the corresponding experiment at its acceptance defaults (the
same configuration the CLI subcommands use), prints one pass/fail line, and
asserts the stated tolerance.  Shared sweeps are computed once per session.
"""

import time

import numpy as np
import pytest

from nimlab.experiments import load_config, run

pytestmark = pytest.mark.filterwarnings("ignore::DeprecationWarning")


def _line(number, name, passed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"\n[criterion {number:>2}] {status} {name}: {detail}")


def _get(summary, criterion):
    for c in summary["criteria"]:
        if c["criterion"] == criterion:
            return c
    raise KeyError(criterion)


@pytest.fixture(scope="session")
def outdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def superlens_summary(outdir):
    cfg = load_config("superlens-rate", {"out_dir": str(outdir)})
    return run("superlens-rate", cfg)


@pytest.fixture(scope="session")
def superlens_k_summary(outdir):
    cfg = load_config("superlens-k", {"out_dir": str(outdir)})
    return run("superlens-k", cfg)


@pytest.fixture(scope="session")
def cloak_summary(outdir):
    cfg = load_config("cloak-rate", {"out_dir": str(outdir)})
    return run("cloak-rate", cfg)


@pytest.fixture(scope="session")
def alr_summary(outdir):
    cfg = load_config("alr-cloak", {"out_dir": str(outdir)})
    return run("alr-cloak", cfg)


@pytest.fixture(scope="session")
def defective_summary(outdir):
    cfg = load_config("defective-cloak", {"out_dir": str(outdir)})
    return run("defective-cloak", cfg)


def test_criterion_01_superlens_whole_domain_rate(superlens_summary):
    assert superlens_summary["mesh_elements"] >= 8e4
    crit = _get(superlens_summary, "superlens-whole-domain-slope")
    fit = superlens_summary["fits"]["whole-in-family"]
    _line(
        1,
        "superlens whole-domain rate",
        crit["pass"],
        f"slope={crit['measured']:.3f} R2={fit['r2']:.4f} "
        f"target [0.35, 0.65], R2 >= 0.98",
    )
    assert superlens_summary["runtime_seconds"] <= 600
    assert crit["pass"], (
        "known-red criterion: the whole-domain error follows a knee, not a "
        "power law, over this sweep (local slopes rise from ~0.4 toward 1.0 "
        "as the loss drops below the lowest quasi-resonance detuning), so no "
        "straight-line fit certifies at R^2 >= 0.98; the half-power "
        "inequality itself holds with room to spare. See the decisions ledger."
    )


def test_criterion_02_superlens_exterior_rate(superlens_summary):
    crit = _get(superlens_summary, "superlens-exterior-slope")
    fit = superlens_summary["fits"]["exterior-in-family"]
    _line(
        2,
        "superlens exterior rate",
        crit["pass"],
        f"slope={crit['measured']:.3f} R2={fit['r2']:.4f} target [0.8, 1.2]",
    )
    assert crit["pass"]


def test_criterion_03_magnification_semantics(superlens_summary):
    crit = _get(superlens_summary, "superlens-magnification")
    _line(
        3,
        "magnification semantics",
        crit["pass"],
        f"relative exterior distance at sweep bottom = {crit['measured']:.3%} "
        "(<= 5%, linear-in-delta consistent)",
    )
    assert crit["pass"]


def test_criterion_04_finite_frequency_superlens(superlens_k_summary):
    crit = _get(superlens_k_summary, "superlens-k-exterior-slope")
    _line(
        4,
        "finite-frequency superlens",
        crit["pass"],
        f"slope={crit['measured']:.3f} target [0.7, 1.3]",
    )
    assert crit["pass"]


def test_criterion_05_cloak_exterior_convergence(cloak_summary):
    slope = _get(cloak_summary, "cloak-exterior-slope")
    blowup = _get(cloak_summary, "cloak-blowup-indicator")
    fit = cloak_summary["fits"]["exterior-vs-reference"]
    _line(
        5,
        "cloak exterior convergence",
        slope["pass"] and blowup["pass"],
        f"slope={slope['measured']:.3f} (>= 0.5, R2={fit['r2']:.4f} >= 0.95, "
        f"strictly decreasing), gradient-energy slope={blowup['measured']:.3f} "
        "(>= -0.5)",
    )
    assert slope["pass"]
    assert blowup["pass"]


def test_criterion_06_alr_object_cloak(alr_summary):
    crit = _get(alr_summary, "alr-exterior-slope")
    fit = alr_summary["fits"]["exterior-vs-reference"]
    _line(
        6,
        "object cloak via anomalous resonance",
        crit["pass"],
        f"slope={crit['measured']:.3f} (>= 0.5, R2={fit['r2']:.4f} >= 0.95)",
    )
    assert crit["pass"]


def test_criterion_07_defective_cloak_negative_control(defective_summary):
    visible = _get(defective_summary, "defective-cloak-visible")
    limit = _get(defective_summary, "defective-cloak-limit")
    _line(
        7,
        "defective cloak stays visible",
        visible["pass"] and limit["pass"],
        f"homogeneous-distance ratio={visible['measured']:.2f}x (>= 5x the "
        "object-cloak distance); distance to the visible-object solution "
        "decreases",
    )
    assert visible["pass"]
    assert limit["pass"]


def test_criterion_08_stability_scaling(outdir):
    summary = run("stability-scan", load_config("stability-scan", {"out_dir": str(outdir)}))
    crit = _get(summary, "stability-ratio-bounded")
    _line(
        8,
        "resolvent stability scaling",
        crit["pass"],
        f"max ratio / head ratio = {crit['measured']:.3f} (<= 10)",
    )
    assert crit["pass"]


def test_criterion_09_pushforward_oracle():
    t0 = time.time()
    from nimlab import media, transforms

    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        c = rng.standard_normal(5)

        def val(p, c=c):
            return (
                c[0] * p[:, 0]
                + c[1] * p[:, 1]
                + c[2] * p[:, 0] * p[:, 1]
                + c[3] * (p[:, 0] ** 2 - p[:, 1] ** 2)
                + c[4]
            )

        def grad(p, c=c):
            return np.stack(
                [
                    c[0] + c[2] * p[:, 1] + 2 * c[3] * p[:, 0],
                    c[1] + c[2] * p[:, 0] - 2 * c[3] * p[:, 1],
                ],
                axis=1,
            )

        u = transforms.SmoothField(value=val, gradient=grad)
        worst = max(
            worst,
            transforms.weak_form_transport_check(
                media.constant_matrix_field(1.0),
                media.constant_sigma_field(1.0),
                u, u, transforms.KelvinMap(2.0), (1.0, 2.0),
            ),
        )

    # composite identity: core coefficients pushed through both reflections
    r1, r2 = 1.0, 4.0
    r3 = r2**2 / r1
    dev = media.cloak_finite_freq(media.constant_matrix_field(1.0), 1.0, r1, r2, r3)
    gf = transforms.ComposedMap(transforms.KelvinMap(r3), transforms.KelvinMap(r2))
    th = rng.uniform(0, 2 * np.pi, 1000)
    rr = rng.uniform(0.05 * r1, 0.999 * r1, 1000)
    pts = np.stack([rr * np.cos(th), rr * np.sin(th)], axis=1)
    a, sig = transforms.pushforward(dev.regions[0].a, dev.regions[0].sigma, gf, pts)
    ident = max(
        float(np.max(np.abs(a - np.eye(2)))), float(np.max(np.abs(sig - 1.0)))
    )
    elapsed = time.time() - t0
    ok = worst <= 1e-8 and ident <= 1e-12 and elapsed <= 60
    _line(
        9,
        "pushforward oracle",
        ok,
        f"transport residual={worst:.2e} (<= 1e-8), composite identity "
        f"deviation={ident:.2e} (<= 1e-12), {elapsed:.1f}s",
    )
    assert ok


def test_criterion_10_maxwell_energy(outdir):
    summary = run("maxwell-energy", load_config("maxwell-energy", {"out_dir": str(outdir)}))
    mono = _get(summary, "maxwell-energy-monotone")
    bound = _get(summary, "maxwell-energy-bound")
    _line(
        10,
        "Maxwell energy bound",
        mono["pass"] and bound["pass"],
        f"max per-step rise={mono['measured']:.2e} (<= 1e-10 rel); "
        f"sourced-bound margin={bound['measured']:.2e} (>= 0); "
        f"{summary['runtime_seconds']:.0f}s",
    )
    assert summary["runtime_seconds"] <= 300
    assert mono["pass"] and bound["pass"]


def test_criterion_11_finite_speed(outdir):
    summary = run("maxwell-speed", load_config("maxwell-speed", {"out_dir": str(outdir)}))
    vac = _get(summary, "finite-speed-vacuum")
    lor = _get(summary, "finite-speed-lorentz")
    _line(
        11,
        "finite speed of propagation",
        vac["pass"] and lor["pass"],
        f"max cone ratio vacuum={vac['measured']:.2e}, "
        f"dispersive={lor['measured']:.2e} (<= 1e-12); "
        f"{summary['runtime_seconds']:.0f}s",
    )
    assert summary["runtime_seconds"] <= 300
    assert vac["pass"] and lor["pass"]


def test_criterion_12_causality_passivity(outdir):
    summary = run("passivity", load_config("passivity", {"out_dir": str(outdir)}))
    names = [
        "causality-kernel",
        "passivity-poles",
        "passivity-negative-control",
        "convolution-positivity",
    ]
    crits = {n: _get(summary, n) for n in names}
    ok = all(c["pass"] for c in crits.values())
    _line(
        12,
        "causality and passivity",
        ok,
        f"kernel(t<0)={crits['causality-kernel']['measured']:.1e} (= 0); "
        f"MC margin={crits['convolution-positivity']['measured']:.2e} "
        f"(>= -1e-10); {summary['runtime_seconds']:.0f}s",
    )
    assert summary["runtime_seconds"] <= 60
    assert ok


def test_criterion_13_fem_baseline():
    from nimlab import media
    from nimlab.diagnostics import fit_rate
    from nimlab.geometry import build_annular_mesh, max_edge_length
    from nimlab.helmholtz import ComplexNodalField, assemble, solve, subdomain_norm

    src = media.SourceTerm(
        f=lambda pts: np.ones(len(pts), dtype=complex), support=(0.0, np.inf)
    )
    pts = []
    for n in (32, 64, 128, 256):
        mesh = build_annular_mesh(1.0, [], n)
        u = solve(assemble(mesh, media.homogeneous(), 0.0, 0.0, src))
        exact = ((mesh.vertices**2).sum(axis=1) - 1.0) / 4.0
        err = subdomain_norm(
            ComplexNodalField(u.values - exact, mesh), mesh, None, "L2"
        )
        pts.append((max_edge_length(mesh), err))
    fit = fit_rate(pts, 0.0)
    ok = 1.8 <= fit.slope <= 2.2
    _line(
        13,
        "FEM correctness baseline",
        ok,
        f"L2 refinement slope={fit.slope:.3f} (in 2.0 +- 0.2, R2={fit.r_squared:.4f})",
    )
    assert ok
