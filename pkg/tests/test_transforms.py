import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nimlab import media
from nimlab.transforms import (
    AffineMap,
    ComposedMap,
    IdentityMap,
    KelvinMap,
    SmoothField,
    kelvin_apply,
    kelvin_jacobian,
    pushforward,
    pushforward_at_target,
    sample_diffeo,
    weak_form_transport_check,
)

points = st.tuples(
    st.floats(-8, 8, allow_nan=False), st.floats(-8, 8, allow_nan=False)
).filter(lambda p: 0.3 < np.hypot(*p) < 8.0)


def test_kelvin_point_values():
    assert np.allclose(kelvin_apply(4.0, np.array([2.0, 0.0])), [8.0, 0.0])
    assert np.allclose(kelvin_apply(4.0, np.array([4.0, 0.0])), [4.0, 0.0])


def test_kelvin_maps_inner_circle_to_outer():
    # radii ladder with r3 = r2^2/r1: the inversion through r2 sends the
    # circle r1 onto the circle r3
    r1, r2 = 2.0, 4.0
    th = np.linspace(0, 2 * np.pi, 33)
    ring = r1 * np.stack([np.cos(th), np.sin(th)], axis=1)
    image = kelvin_apply(r2, ring)
    assert np.allclose(np.hypot(image[:, 0], image[:, 1]), r2**2 / r1)


@settings(max_examples=60, deadline=None)
@given(points, st.floats(0.5, 5.0))
def test_kelvin_involution(p, rho):
    x = np.array(p)
    back = kelvin_apply(rho, kelvin_apply(rho, x))
    assert np.linalg.norm(back - x) <= 1e-13 * max(1.0, np.linalg.norm(x))


def test_jacobian_reflection_eigenvalues():
    jac = kelvin_jacobian(1.0, np.array([1.0, 0.0]))
    ev = np.sort(np.linalg.eigvalsh(jac))
    assert np.allclose(ev, [-1.0, 1.0])


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(11)
    rho = 1.7
    h = 1e-5
    for _ in range(12):
        x = rng.uniform(0.4, 3.0) * _unit(rng)
        jac = kelvin_jacobian(rho, x)
        fd = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd[:, j] = (kelvin_apply(rho, x + e) - kelvin_apply(rho, x - e)) / (2 * h)
        assert np.max(np.abs(jac - fd)) < 1e-6


def _unit(rng):
    th = rng.uniform(0, 2 * np.pi)
    return np.array([np.cos(th), np.sin(th)])


def test_jacobian_determinant_on_circle():
    rho = 2.3
    x = rho * _unit(np.random.default_rng(5))
    s = sample_diffeo(KelvinMap(rho), x)
    assert abs(abs(s.det) - 1.0) < 1e-12


def test_origin_is_rejected():
    with pytest.raises(ValueError):
        kelvin_apply(1.0, np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        kelvin_jacobian(1.0, np.array([0.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(points)
def test_functoriality_of_pushforward(p):
    x = np.array(p)
    t1 = KelvinMap(2.0)
    t2 = AffineMap(matrix=((1.2, 0.3), (0.3, 0.9)), offset=(0.1, -0.2))
    composed = ComposedMap(t2, t1)
    a = media.constant_matrix_field(((2.0, 0.5), (0.5, 1.5)))
    s = media.constant_sigma_field(1.3)
    a1, s1 = pushforward(a, s, t1, x)
    y = t1.apply(x)
    a12, s12 = pushforward(lambda q: np.broadcast_to(a1, (len(q), 2, 2)),
                           lambda q: np.full(len(q), s1), t2, y)
    a_direct, s_direct = pushforward(a, s, composed, x)
    assert np.max(np.abs(a12 - a_direct)) <= 1e-12 * np.max(np.abs(a_direct))
    assert abs(s12 - s_direct) <= 1e-12 * abs(s_direct)


@settings(max_examples=40, deadline=None)
@given(points)
def test_pushforward_preserves_symmetry_and_positivity(p):
    x = np.array(p)
    a = media.constant_matrix_field(((2.0, 0.7), (0.7, 1.1)))
    s = media.constant_sigma_field(1.0)
    ap, _ = pushforward(a, s, KelvinMap(1.5), x)
    assert np.allclose(ap, ap.T)
    assert np.linalg.eigvalsh(ap).min() > 0


def test_pushforward_identity_and_kelvin_conformality():
    x = np.array([0.7, -0.4])
    a = media.constant_matrix_field(1.0)
    s = media.constant_sigma_field(1.0)
    ai, si = pushforward(a, s, IdentityMap(), x)
    assert np.allclose(ai, np.eye(2)) and np.isclose(si, 1.0)
    ak, _ = pushforward(a, s, KelvinMap(2.0), x)
    assert np.allclose(ak, np.eye(2), atol=1e-13)


def test_composed_lens_maps_object_circle_to_magnified():
    # G after F is the plain dilation by m when r1 = sqrt(m) r0, r2 = m r0.
    m, r0 = 4.0, 1.0
    r1, r2 = np.sqrt(m) * r0, m * r0
    r3 = r2**2 / r1
    gf = ComposedMap(KelvinMap(r3), KelvinMap(r2))
    th = np.linspace(0, 2 * np.pi, 17)
    ring = r0 * np.stack([np.cos(th), np.sin(th)], axis=1)
    image = gf.apply(ring)
    assert np.allclose(np.hypot(image[:, 0], image[:, 1]), m * r0, rtol=1e-13)


def _poly_field():
    return SmoothField(
        value=lambda p: p[:, 0] ** 2 - p[:, 1] + 0.5 * p[:, 0] * p[:, 1],
        gradient=lambda p: np.stack(
            [2 * p[:, 0] + 0.5 * p[:, 1], 0.5 * p[:, 0] - 1.0 + 0 * p[:, 1]], axis=1
        ),
    )


def test_transport_identity_map_zero_residual():
    u = _poly_field()
    res = weak_form_transport_check(
        media.constant_matrix_field(1.0),
        media.constant_sigma_field(1.0),
        u, u, IdentityMap(), (1.0, 2.0),
    )
    assert res < 1e-12


def test_transport_kelvin_polynomial():
    u = _poly_field()
    res = weak_form_transport_check(
        media.constant_matrix_field(1.0),
        media.constant_sigma_field(1.0),
        u, u, KelvinMap(2.0), (1.0, 2.0), quadrature_order=8,
    )
    assert res <= 1e-8


def test_transport_random_affine_spd():
    # random similarity maps (rotation times scale): affine maps that keep
    # origin-centered annuli, which the target quadrature requires
    rng = np.random.default_rng(23)
    for _ in range(5):
        q = rng.standard_normal((2, 2))
        spd = q @ q.T + 2.0 * np.eye(2)
        th = rng.uniform(0, 2 * np.pi)
        sc = rng.uniform(0.5, 2.0)
        mat = sc * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        u = _poly_field()
        res = weak_form_transport_check(
            media.constant_matrix_field(spd),
            media.constant_sigma_field(1.0),
            u, u, AffineMap(matrix=tuple(map(tuple, mat))), (1.0, 2.0),
        )
        assert res <= 1e-10


def test_transport_oracle_random_smooth_fields():
    # 20 random smooth (trig-polynomial) fields through the Kelvin transport
    rng = np.random.default_rng(7)
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

        u = SmoothField(value=val, gradient=grad)
        res = weak_form_transport_check(
            media.constant_matrix_field(1.0),
            media.constant_sigma_field(1.0),
            u, u, KelvinMap(2.0), (1.0, 2.0),
        )
        worst = max(worst, res)
    assert worst <= 1e-8


def test_pushforward_at_target_sigma_profile():
    # reflected unit density through the circle r2: r2^4 / |y|^4
    r2 = 4.0
    kel = KelvinMap(r2)
    y = np.array([[2.0, 0.0], [0.0, 3.0], [4.0, 0.0]])
    _, sig = pushforward_at_target(
        media.constant_matrix_field(1.0), media.constant_sigma_field(1.0), kel, y
    )
    want = r2**4 / np.hypot(y[:, 0], y[:, 1]) ** 4
    assert np.allclose(sig, want, rtol=1e-12)
