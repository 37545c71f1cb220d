"""Quick self-verification: the catalogue of immediate sanity checks.

Each check exercises one documented behaviour with a directly computable
expectation (fixed points of the Kelvin map, degenerate meshes, loss-factor
linearity, kernel values, zero states).  The transport-identity oracle and a
small refinement study are included so a selftest run touches every module.
"""

from __future__ import annotations

import numpy as np

from .. import media, transforms
from ..geometry import build_annular_mesh, embed_disk_inclusions, max_edge_length
from ..helmholtz import ComplexNodalField, assemble, element_matrices, solve, subdomain_norm
from ..diagnostics import fit_rate
from ..maxwell import fdtd as mx_fdtd
from ..maxwell import materials as mx_mat
from ..maxwell import cones as mx_cones


def _check_mesh_plain_disk():
    mesh = build_annular_mesh(1.0, [], 16)
    assert mesh.num_triangles > 0 and len(mesh.interface_circles) == 0
    return float(mesh.num_triangles), "plain disk mesh builds", True


def _check_mesh_conforming():
    mesh = build_annular_mesh(10.0, [1, 2, 4, 8], 64)
    from ..geometry import triangle_areas

    return float(triangle_areas(mesh).min()), "4 conforming circles, areas > 0", (
        len(mesh.interface_circles) == 4 and triangle_areas(mesh).min() > 0
    )


def _check_mesh_empty_inclusion():
    mesh = build_annular_mesh(4.0, [1.0], 32)
    same = embed_disk_inclusions(mesh, [(1.0, 0.0)], 0.0)
    return 0.0, "radius-0 inclusion leaves the mesh unchanged", same is mesh


def _check_kelvin_points():
    y = transforms.kelvin_apply(4.0, np.array([2.0, 0.0]))
    z = transforms.kelvin_apply(4.0, np.array([4.0, 0.0]))
    ok = np.allclose(y, [8.0, 0.0]) and np.allclose(z, [4.0, 0.0])
    return float(y[0]), "rho=4 maps (2,0)->(8,0), fixes (4,0)", ok


def _check_pushforward_identity():
    ident = transforms.IdentityMap()
    a, s = transforms.pushforward(
        media.constant_matrix_field(3.0),
        media.constant_sigma_field(2.0),
        ident,
        np.array([0.3, 0.4]),
    )
    ok = np.allclose(a, 3.0 * np.eye(2)) and np.isclose(s, 2.0)
    return float(s.real), "identity map leaves coefficients unchanged", ok


def _check_kelvin_conformal():
    kel = transforms.KelvinMap(2.0)
    a, _ = transforms.pushforward(
        media.constant_matrix_field(1.0),
        media.constant_sigma_field(1.0),
        kel,
        np.array([1.3, -0.2]),
    )
    return float(np.max(np.abs(a - np.eye(2)))), "2D Kelvin pushforward of I is I", (
        np.allclose(a, np.eye(2), atol=1e-13)
    )


def _check_transport_identity_map():
    u = transforms.SmoothField(
        value=lambda p: p[:, 0] ** 2 - p[:, 1],
        gradient=lambda p: np.stack([2 * p[:, 0], -np.ones(len(p))], axis=1),
    )
    res = transforms.weak_form_transport_check(
        media.constant_matrix_field(1.0),
        media.constant_sigma_field(1.0),
        u,
        u,
        transforms.IdentityMap(),
        (1.0, 2.0),
    )
    return res, "identity transport residual ~ 0", res < 1e-12


def _check_transport_kelvin():
    u = transforms.SmoothField(
        value=lambda p: p[:, 0] ** 2 - p[:, 1] + 0.5 * p[:, 0] * p[:, 1],
        gradient=lambda p: np.stack(
            [2 * p[:, 0] + 0.5 * p[:, 1], -np.ones(len(p)) + 0.5 * p[:, 0]], axis=1
        ),
    )
    res = transforms.weak_form_transport_check(
        media.constant_matrix_field(1.0),
        media.constant_sigma_field(1.0),
        u,
        u,
        transforms.KelvinMap(2.0),
        (1.0, 2.0),
    )
    return res, "Kelvin transport residual <= 1e-8", res <= 1e-8


def _check_superlens_radii():
    device, reference = media.superlens_quasistatic(1.0, 4.0, 1.0)
    R = device.radii
    lens = device.lens_band()
    ok = (
        np.allclose([R.r0, R.r1, R.r2, R.r3], [1, 2, 4, 8])
        and lens == (R.r1, R.r2)
    )
    return R.r3, "m=4, r0=1 -> radii (1,2,4,8), lens = B_4 \\ B_2", ok


def _check_superlens_reference():
    a_obj = media.constant_matrix_field(2.0)
    _, reference = media.superlens_quasistatic(2.0, 4.0, 1.0)
    pts = np.array([[3.0, 0.0], [0.0, 3.9], [5.0, 0.0]])
    idx = reference.region_index(pts)
    a0, _ = reference.eval_region(0, pts[:2])
    a1, _ = reference.eval_region(1, pts[2:])
    ok = (
        np.allclose(a0, 2.0 * np.eye(2))
        and np.allclose(a1, np.eye(2))
        and list(idx) == [0, 0, 1]
    )
    return float(a0[0, 0, 0]), "reference carries a(./m) inside B_r2", ok


def _check_cloak_cores():
    shell = media.constant_matrix_field(1.0)
    dev2 = media.cloak(shell, 1.0, 4.0, 16.0, d=2)
    dev3 = media.cloak(shell, 1.0, 4.0, 16.0, d=3)
    core2 = dev2.regions[0].a(np.zeros((1, 2)))[0]
    core3 = dev3.regions[0].a(np.zeros((1, 2)))[0]
    k3 = media.cloak_finite_freq(shell, 1.0, 1.0, 4.0, 16.0, d=3)
    sig3 = k3.regions[0].sigma(np.zeros((1, 2)))[0]
    ok = (
        np.allclose(core2, np.eye(2))
        and np.allclose(core3, 16.0 * np.eye(2))
        and np.isclose(sig3, 16.0**3)
    )
    return float(core3[0, 0]), "2D core = I; 3D core = (r3^2/r2^2) I, Sigma cubed", ok


def _check_lens_sigma_fixed_circle():
    dev = media.cloak_finite_freq(
        media.constant_matrix_field(1.0), 1.0, 1.0, 4.0, 16.0
    )
    pts = np.array([[4.0 - 1e-9, 0.0]])
    _, sig = dev.eval_region(1, pts)
    return float(sig[0].real), "reflected Sigma equals 1 on the fixed circle", (
        abs(sig[0] - 1.0) < 1e-6
    )


def _check_medium_coverage():
    device, _ = media.superlens_quasistatic(2.0, 4.0, 1.0)
    rng = np.random.default_rng(7)
    pts = rng.uniform(-9, 9, size=(4000, 2))
    hits = np.zeros(len(pts), dtype=int)
    for reg in device.regions:
        hits += reg.contains(pts).astype(int)
    return float(hits.mean()), "regions cover the plane with no overlap", bool(
        np.all(hits == 1)
    )


def _check_identity_system():
    import scipy.sparse as sp
    from ..helmholtz import LinearSystem

    mesh = build_annular_mesh(1.0, [], 16)
    n = mesh.num_vertices
    rhs = np.arange(n, dtype=complex)
    system = LinearSystem(
        matrix=sp.identity(n, dtype=complex, format="csr"),
        rhs=rhs,
        dirichlet=np.zeros(n, dtype=bool),
        mesh=mesh,
        medium=media.homogeneous(),
        delta=1.0,
        k=0.0,
        boundary="dirichlet",
    )
    u = solve(system)
    return float(np.max(np.abs(u.values - rhs))), "identity system returns rhs", (
        np.allclose(u.values, rhs)
    )


def _check_loss_factor_linearity():
    device, _ = media.superlens_quasistatic(1.0, 4.0, 1.0)
    mesh = build_annular_mesh(10.0, [1, 2, 4, 8], 32)
    delta = 0.1
    vals, ridx = element_matrices(mesh, device, delta, 0.0)
    # On lens elements, the matrices equal (-1 - i delta) times the s=1 entries.
    base, _ = element_matrices(mesh, media.homogeneous(), 1.0, 0.0)
    lens = np.array([device.regions[r].lens for r in ridx])
    err = np.max(np.abs(vals[lens] - (-1 - 1j * delta) * base[lens]))
    return float(err), "lens entries = (-1 - i delta) * positive entries", err < 1e-12


def _check_rhs_support():
    device, _ = media.superlens_quasistatic(1.0, 4.0, 1.0)
    mesh = build_annular_mesh(10.0, [1, 2, 4, 8], 48)
    src = media.bump_source((9.0, 0.0), 0.4)
    system = assemble(mesh, device, 0.1, 0.0, src)
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    inner = np.max(np.abs(system.rhs[r < 8.0 - 1e-9]))
    return float(inner), "rhs vanishes for basis functions inside B_r3", inner == 0.0


def _check_constant_field_norms():
    mesh = build_annular_mesh(1.0, [], 48)
    ones = ComplexNodalField(np.ones(mesh.num_vertices, dtype=complex), mesh)
    l2 = subdomain_norm(ones, mesh, None, "L2")
    x1 = ComplexNodalField(mesh.vertices[:, 0].astype(complex), mesh)
    h1s = subdomain_norm(x1, mesh, None, "H1-semi")
    # Tolerance covers the polygonal boundary defect at this sector count.
    ok = abs(l2 - np.sqrt(np.pi)) < 0.01 and abs(h1s - np.sqrt(np.pi)) < 0.01
    return float(l2), "constant and linear field norms match sqrt(pi)", ok


def _check_chi_values():
    poles = [mx_mat.LorentzPole(1.0, 2.0, 0.7)]
    v0 = mx_mat.chi_freq(poles, 0.0)
    v_inf = abs(mx_mat.chi_freq(poles, 1e6))
    lam = -1j * 2.0 * mx_mat.chi_freq([mx_mat.LorentzPole(1.0, 2.0, 0.5)], 2.0)
    ok = (
        np.isclose(complex(v0), 0.25)
        and v_inf < 1e-9
        and np.isclose(lam.real, 1.0)
        and mx_mat.chi_time(poles, -1.0) == 0.0
        and mx_mat.chi_time(poles, 0.0) == 0.0
    )
    return float(np.real(v0)), "kernel values at 0, infinity, resonance", ok


def _check_passivity_undamped():
    poles = [mx_mat.LorentzPole(1.0, 2.0, 0.0)]
    omegas = np.linspace(0.1, 10.0, 500)
    omegas = omegas[np.abs(omegas - 2.0) > 0.05]
    margin = omegas * mx_mat.chi_freq(poles, omegas).imag
    return float(np.max(np.abs(margin))), "undamped poles: equality off-resonance", (
        np.max(np.abs(margin)) == 0.0
    )


def _check_convolution_zero():
    val = mx_mat.convolution_positivity_test(
        [mx_mat.LorentzPole(1.0, 1.0, 0.1)], np.zeros(101), 1.0, 0.01
    )
    return val, "zero field gives zero convolution integral", val == 0.0


def _check_fdtd_zero_state():
    grid = mx_fdtd.GridSpec((8, 8, 8), 1.0)
    mat = mx_mat.EMMaterials()
    st = mx_fdtd.fdtd_init(grid, mat, None, mx_fdtd.max_stable_dt(grid, mat))
    return st.max_field(), "zero initial data stays zero", st.max_field() == 0.0


def _check_fdtd_pulse_init():
    grid = mx_fdtd.GridSpec((16, 16, 16), 1.0)
    mat = mx_mat.EMMaterials()
    dt = mx_fdtd.max_stable_dt(grid, mat)
    E0, H0 = mx_fdtd.bump_ball(grid, (8, 8, 8), 4.0)
    st = mx_fdtd.fdtd_init(grid, mat, (E0, H0), dt)
    # The stored H is staggered back half a step; undoing the half curl step
    # must recover the zero magnetic initial data exactly.
    curl = mx_fdtd._curl_e(st.E, grid.h)
    err = max(
        float(np.max(np.abs(st.H[c] - 0.5 * dt * curl[c]))) for c in range(3)
    )
    return err, "electric pulse init carries zero magnetic data at t=0", err == 0.0


def _check_cfl_formula():
    grid = mx_fdtd.GridSpec((64, 64, 64), 1.0)
    dt = mx_fdtd.max_stable_dt(grid, mx_mat.EMMaterials())
    return dt, "max dt = 0.95/sqrt(3) for c = 1, h = 1", np.isclose(
        dt, 0.95 / np.sqrt(3.0)
    )


def _check_energy_values():
    grid = mx_fdtd.GridSpec((8, 8, 8), 1.0)
    mat = mx_mat.EMMaterials(eps_rel=2.0)
    st = mx_fdtd.fdtd_init(grid, mat, None, mx_fdtd.max_stable_dt(grid, mat))
    assert mx_fdtd.energy(st) == 0.0
    st.E[0][:] = 3.0
    e = mx_fdtd.energy(st)
    expect = 2.0 * 9.0 * 8**3
    return e, "constant E energy = eps |e|^2 volume", np.isclose(e, expect)


def _check_cone_trivial():
    grid = mx_fdtd.GridSpec((24, 24, 24), 1.0)
    mat = mx_mat.EMMaterials()
    dt = mx_fdtd.max_stable_dt(grid, mat)
    st = mx_fdtd.fdtd_init(grid, mat, None, dt)
    cone = mx_cones.LightCone.around(grid, mat, (6.0, 12.0, 12.0), 5.0)
    rep = mx_cones.light_cone_certificate(st, cone, record_every=2)
    return rep.max_violation, "zero data passes the cone trivially", rep.passed


def _check_cone_refusal():
    grid = mx_fdtd.GridSpec((24, 24, 24), 1.0)
    mat = mx_mat.EMMaterials()
    dt = mx_fdtd.max_stable_dt(grid, mat)
    u0 = mx_fdtd.bump_ball(grid, (6.0, 12.0, 12.0), 3.0)
    st = mx_fdtd.fdtd_init(grid, mat, u0, dt)
    cone = mx_cones.LightCone.around(grid, mat, (6.0, 12.0, 12.0), 5.0)
    try:
        mx_cones.light_cone_certificate(st, cone)
    except mx_cones.CertificateRefusal:
        return 1.0, "pulse inside the ball is refused", True
    return 0.0, "pulse inside the ball is refused", False


def _check_fem_baseline():
    hom = media.homogeneous()
    src = media.SourceTerm(
        f=lambda pts: np.ones(len(pts), dtype=complex), support=(0.0, 1.0)
    )
    pts = []
    for n in (24, 48, 96):
        mesh = build_annular_mesh(1.0, [], n)
        u = solve(assemble(mesh, hom, 0.0, 0.0, src))
        exact = ((mesh.vertices**2).sum(axis=1) - 1.0) / 4.0
        err = subdomain_norm(
            ComplexNodalField(u.values - exact, mesh), mesh, None, "L2"
        )
        pts.append((max_edge_length(mesh), err))
    fit = fit_rate(pts, 0.0)
    return fit.slope, "Poisson L2 slope ~ 2 under refinement", 1.6 <= fit.slope <= 2.4


_CHECKS = [
    _check_mesh_plain_disk,
    _check_mesh_conforming,
    _check_mesh_empty_inclusion,
    _check_kelvin_points,
    _check_pushforward_identity,
    _check_kelvin_conformal,
    _check_transport_identity_map,
    _check_transport_kelvin,
    _check_superlens_radii,
    _check_superlens_reference,
    _check_cloak_cores,
    _check_lens_sigma_fixed_circle,
    _check_medium_coverage,
    _check_identity_system,
    _check_loss_factor_linearity,
    _check_rhs_support,
    _check_constant_field_norms,
    _check_chi_values,
    _check_passivity_undamped,
    _check_convolution_zero,
    _check_fdtd_zero_state,
    _check_fdtd_pulse_init,
    _check_cfl_formula,
    _check_energy_values,
    _check_cone_trivial,
    _check_cone_refusal,
    _check_fem_baseline,
]


def run_checks(seed: int = 0) -> list[dict]:
    """Run every check; each becomes one criterion entry."""
    criteria = []
    for fn in _CHECKS:
        name = fn.__name__.removeprefix("_check_").replace("_", "-")
        try:
            measured, threshold, passed = fn()
        except Exception as exc:  # a crashed check fails, with its message
            measured, threshold, passed = float("nan"), f"raised: {exc}", False
        criteria.append(
            {
                "criterion": f"selftest-{name}",
                "measured": float(measured),
                "threshold": threshold,
                "pass": bool(passed),
            }
        )
    return criteria
