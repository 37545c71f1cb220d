import numpy as np
import pytest

from nimlab import media
from nimlab.diagnostics import (
    RateFitError,
    blowup_indicator,
    fit_rate,
    reflect_field,
    remove_localized_singularity,
)
from nimlab.geometry import MeshLocator, build_annular_mesh, max_edge_length
from nimlab.helmholtz import ComplexNodalField, assemble, solve, subdomain_norm
from nimlab.transforms import IdentityMap, KelvinMap


def test_fit_rate_exact_slopes():
    deltas = 10.0 ** (-1 - np.arange(5))
    f1 = fit_rate([(d, d) for d in deltas], 0.0)
    assert f1.slope == pytest.approx(1.0, abs=1e-12)
    assert f1.r_squared == pytest.approx(1.0)
    f2 = fit_rate([(d, np.sqrt(d)) for d in deltas], 0.0)
    assert f2.slope == pytest.approx(0.5, abs=1e-12)


def test_fit_rate_floor_exclusion():
    deltas = 10.0 ** np.linspace(-1, -7, 9)
    pts = [(d, d + 1e-6) for d in deltas]
    fit = fit_rate(pts, 3e-6)
    assert abs(fit.slope - 1.0) <= 0.05
    assert fit.n_points < len(deltas)
    with pytest.raises(RateFitError):
        fit_rate(pts, 1.0)  # nothing above the floor


def test_fit_rate_affine_equivariance():
    deltas = 10.0 ** (-1 - np.arange(4))
    errs = deltas**0.7 * 3.0
    base = fit_rate(list(zip(deltas, errs)), 0.0)
    scaled = fit_rate(list(zip(deltas, 10.0 * errs)), 0.0)
    assert scaled.slope == pytest.approx(base.slope, abs=1e-12)
    assert scaled.intercept - base.intercept == pytest.approx(np.log(10.0), abs=1e-12)


def test_fit_rate_certification_gate():
    rng = np.random.default_rng(0)
    deltas = 10.0 ** (-1 - np.arange(6) / 2)
    noisy = [(d, d * np.exp(2.5 * rng.standard_normal())) for d in deltas]
    fit = fit_rate(noisy, 0.0)
    if fit.r_squared < 0.98:
        with pytest.raises(RateFitError):
            fit.require_certified()
    clean = fit_rate([(d, d) for d in deltas], 0.0)
    assert clean.require_certified() is clean


def _field(mesh, fn):
    return ComplexNodalField(fn(mesh.vertices).astype(complex), mesh)


def test_reflect_identity_map():
    mesh = build_annular_mesh(4.0, [1.0, 2.0], 48)
    u = _field(mesh, lambda v: v[:, 0] + 2.0 * v[:, 1])
    out = reflect_field(u, IdentityMap(), (1.0, 2.0))
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    band = (r >= 1.0 - 1e-12) & (r <= 2.0 + 1e-12)
    assert np.max(np.abs(out.values[band] - u.values[band])) < 1e-12
    assert np.all(out.values[~band] == 0)


def test_reflect_harmonic_stays_harmonic():
    # u harmonic on the annulus; its reflection through r2 must stay harmonic
    # up to interpolation error, measured by the discrete Laplace residual.
    r1, r2 = 1.0, 2.0
    r3 = r2**2 / r1
    mesh = build_annular_mesh(6.0, [r1, r2, r3], 128)
    harm = lambda v: v[:, 0] / np.maximum(
        (v[:, 0] ** 2 + v[:, 1] ** 2), 1e-12
    ) + 0.5 * v[:, 0]
    u = _field(mesh, harm)
    refl = reflect_field(u, KelvinMap(r2), (r2, r3), MeshLocator(mesh))
    # compare against the analytic reflection u(F(y)): Kelvin reflection of a
    # harmonic function is harmonic; numerically its nodal values must agree
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    band = (r >= r2) & (r <= r3)
    want = harm(KelvinMap(r2).apply(mesh.vertices[band]))
    err = np.max(np.abs(refl.values[band] - want))
    assert err < 4e-3  # interpolation-level at this resolution


def test_double_reflection_recovers_field():
    r2 = 2.0
    mesh = build_annular_mesh(6.0, [1.0, r2, 4.0], 96)
    smooth = lambda v: np.exp(-0.3 * (v**2).sum(axis=1)) * (1.0 + v[:, 0])
    u = _field(mesh, smooth)
    loc = MeshLocator(mesh)
    once = reflect_field(u, KelvinMap(r2), (r2, 4.0), loc)
    back = reflect_field(once, KelvinMap(r2), (1.0, r2), loc)
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    band = (r >= 1.0) & (r <= r2)
    err = np.max(np.abs(back.values[band] - u.values[band]))
    h = max_edge_length(mesh)
    assert err < 5.0 * h**2


def test_reflect_rejects_escaping_preimages():
    mesh = build_annular_mesh(3.0, [0.3, 1.0], 32)
    u = _field(mesh, lambda v: v[:, 0])
    with pytest.raises(ValueError):
        # preimages of the inner circle under inversion through r=1 escape B_3
        reflect_field(u, KelvinMap(1.0), (0.25, 0.35))


def test_singularity_removal_trivial_and_regions():
    mesh = build_annular_mesh(10.0, [2.0, 4.0, 8.0], 48)
    u = _field(mesh, lambda v: v[:, 0])
    u12 = _field(mesh, lambda v: v[:, 1])
    glued = remove_localized_singularity(u, u12, u12, (4.0, 8.0), "lens")
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    mid = (r > 4.0) & (r < 8.0)
    assert np.max(np.abs(glued.values[mid] - u.values[mid])) < 1e-12
    out = r > 8.0 + 1e-9
    assert np.array_equal(glued.values[out], u.values[out])
    with pytest.raises(ValueError):
        remove_localized_singularity(u, u12, u12, (4.0, 8.0), "bogus")


def test_superlens_singularity_removal_converges_in_whole_domain():
    device, reference = media.superlens_quasistatic(2.0, 4.0, 1.0)
    R = device.radii
    mesh = build_annular_mesh(10.0, [R.r0, R.r1, R.r2, R.r3], 160, 2.0)
    src = media.bump_source((9.0, 0.0), 0.45)
    u_hat = solve(assemble(mesh, reference, 0.0, 0.0, src))
    delta = 1e-3
    u = solve(assemble(mesh, device, delta, 0.0, src))
    loc = MeshLocator(mesh)
    u1 = reflect_field(u, KelvinMap(R.r2), (R.r2, R.r3), loc)
    u2 = ComplexNodalField(
        u.at(mesh.vertices * (R.r2**2 / R.r3**2), loc), mesh
    )
    glued = remove_localized_singularity(u, u1, u2, (R.r2, R.r3), "lens")
    # outside B_r3 the glued field IS the raw field
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    outside = r > R.r3 + 1e-9
    assert np.array_equal(glued.values[outside], u.values[outside])
    # removing the reflection pair leaves a field close to the reference in
    # the whole domain, while the raw field differs at O(1) inside B_r3
    err_glued = subdomain_norm(
        ComplexNodalField(glued.values - u_hat.values, mesh), mesh, None, "H1"
    )
    inside = lambda c: np.hypot(c[:, 0], c[:, 1]) < R.r3
    err_raw = subdomain_norm(
        ComplexNodalField(u.values - u_hat.values, mesh), mesh, inside, "H1"
    )
    assert err_glued < 0.2 * err_raw


def test_blowup_indicator_positive_medium():
    hom = media.homogeneous()
    mesh = build_annular_mesh(2.0, [1.0], 48)
    src = media.SourceTerm(
        f=lambda pts: np.ones(len(pts), dtype=complex), support=(0.0, np.inf)
    )
    lens = lambda c: np.hypot(c[:, 0], c[:, 1]) < 1.0
    powers = []
    for d in (1e-1, 1e-2, 1e-3):
        u = solve(assemble(mesh, hom, d, 0.0, src))
        ge, pw = blowup_indicator(u, d, lens)
        assert ge > 0
        powers.append(pw)
    assert powers[1] == pytest.approx(0.1 * powers[0], rel=1e-6)
    assert powers[2] == pytest.approx(0.01 * powers[0], rel=1e-6)


def test_superlens_gradient_energy_stays_bounded():
    # a compatible source keeps the lens gradient energy bounded as the loss
    # vanishes (the stable-lens regime), unlike a genuine localized resonance
    device, _ = media.superlens_quasistatic(2.0, 4.0, 1.0)
    mesh = build_annular_mesh(10.0, [1, 2, 4, 8], 96, 2.0)
    src = media.bump_source((9.0, 0.0), 0.45)
    lens = lambda c: (np.hypot(c[:, 0], c[:, 1]) > 2.0) & (
        np.hypot(c[:, 0], c[:, 1]) < 4.0
    )
    energies = []
    for d in (1e-1, 1e-2, 1e-3, 1e-4):
        u = solve(assemble(mesh, device, d, 0.0, src))
        energies.append(blowup_indicator(u, d, lens)[0])
    assert max(energies) <= 2.0 * energies[0]
