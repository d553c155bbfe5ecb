import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsalpha.spectral import (
    ModeMismatchError,
    ModeSet,
    SolenoidalField,
    da_norm,
    grid_to_coeff,
    helmholtz_apply,
    helmholtz_solve,
    inner_coeff,
    l2_inner,
    l2_norm,
    l4_norm,
    leray_project,
    random_field,
    single_mode,
    stokes_apply,
    to_physical,
    to_spectral,
    v_norm,
)


def mode_index(modes, k):
    return tuple(int(v) % modes.n for v in k)


# -- ModeSet ------------------------------------------------------------------

@pytest.mark.parametrize("n, cutoff", [(4, 1), (6, 1), (8, 2), (10, 3), (12, 3), (16, 5)])
def test_cutoff(n, cutoff):
    assert ModeSet(2, n).cutoff == cutoff


@pytest.mark.parametrize("dim, n", [(1, 8), (4, 8), (2, 7), (2, 2)])
def test_invalid_modeset(dim, n):
    with pytest.raises(ValueError):
        ModeSet(dim, n)


@pytest.mark.parametrize("dim, n", [(2, 8), (2, 10), (3, 8)])
def test_mask_invariants(dim, n):
    modes = ModeSet(dim, n)
    mask = modes.dealias_mask
    # k -> -k maps index j to (n - j) % n
    flipped = np.roll(np.flip(mask), 1, axis=tuple(range(dim)))
    assert np.array_equal(mask, flipped)
    assert not np.any(mask & np.any(np.abs(modes.k) > n / 3, axis=0))
    assert mask[(0,) * dim] and not modes.active[(0,) * dim]


def test_wavenumbers_layout(modes2):
    assert list(modes2.k1d) == [0, 1, 2, 3, 4, -3, -2, -1]


# -- Leray projection ---------------------------------------------------------

def test_leray_kills_gradients(modes2, rng):
    phi = grid_to_coeff(modes2, rng.standard_normal(modes2.shape))
    raw = modes2.ik * phi
    assert np.abs(leray_project(modes2, raw).coeff).max() < 1e-15


def test_leray_idempotent_on_solenoidal(modes2, rng):
    u = random_field(modes2, rng)
    assert np.abs(leray_project(modes2, u.coeff).coeff - u.coeff).max() < 1e-15


def test_leray_hand_example(modes2):
    raw = modes2.zeros()
    raw[(slice(None),) + mode_index(modes2, (1, 0))] = (1, 0)
    raw[(slice(None),) + mode_index(modes2, (0, 1))] = (1, 0)
    out = leray_project(modes2, raw).coeff
    assert np.allclose(out[(slice(None),) + mode_index(modes2, (1, 0))], 0)
    assert np.allclose(out[(slice(None),) + mode_index(modes2, (0, 1))], (1, 0))


def test_leray_shape_mismatch(modes2):
    with pytest.raises(ModeMismatchError):
        leray_project(modes2, ModeSet(2, 16).zeros())


@pytest.mark.parametrize("dim", [2, 3])
def test_projection_nonexpansive_idempotent(dim, rng):
    modes = ModeSet(dim, 8)
    for _ in range(100):
        raw = to_spectral(modes, rng.standard_normal(modes.field_shape))
        p = leray_project(modes, raw)
        raw_norm = np.sqrt(inner_coeff(modes, raw, raw))
        assert l2_norm(p) <= raw_norm * (1 + 1e-14)
        assert np.abs(leray_project(modes, p.coeff).coeff - p.coeff).max() <= 1e-15 * raw_norm


def test_random_field_invariants(modes3, rng):
    u = random_field(modes3, rng, scale=2.5)
    assert np.isclose(l2_norm(u), 2.5)
    assert u.max_divergence() <= 1e-13 * np.abs(u.coeff).max()
    assert u.hermitian_defect() <= 1e-15
    assert u.coeff[(slice(None),) + (0, 0, 0)].tolist() == [0, 0, 0]


def test_fields_are_immutable(modes2, rng):
    u = random_field(modes2, rng)
    with pytest.raises(AttributeError):
        u.coeff = None
    with pytest.raises(ValueError):
        u.coeff[0, 1, 1] = 1.0


def test_mismatched_fields_rejected(rng):
    a = random_field(ModeSet(2, 8), rng)
    b = random_field(ModeSet(2, 16), rng)
    with pytest.raises(ModeMismatchError):
        a + b
    with pytest.raises(ModeMismatchError):
        l2_inner(a, b)


# -- multipliers --------------------------------------------------------------

def test_helmholtz_zero_alpha_is_identity(modes2, rng):
    u = random_field(modes2, rng)
    assert np.array_equal(helmholtz_apply(u, 0.0).coeff, u.coeff)


def test_helmholtz_doubles_unit_mode(modes2):
    u = single_mode(modes2, (1, 0), (0, 1.5))
    assert np.allclose(helmholtz_apply(u, 1.0).coeff, 2 * u.coeff)


@given(alpha=st.floats(0, 10))
@settings(max_examples=30, deadline=None)
def test_helmholtz_roundtrip(alpha):
    modes = ModeSet(2, 8)
    u = random_field(modes, np.random.default_rng(0))
    back = helmholtz_solve(helmholtz_apply(u, alpha), alpha)
    assert np.abs(back.coeff - u.coeff).max() <= 1e-15 * (1 + alpha ** 2 * 8)


def test_helmholtz_rejects_negative_alpha(modes2):
    with pytest.raises(ValueError):
        helmholtz_apply(SolenoidalField.zeros(modes2), -0.1)


def test_stokes_multiplier(modes2):
    u = single_mode(modes2, (2, 0), (0, 1.0))
    assert np.allclose(stokes_apply(u).coeff, 4 * u.coeff)
    assert not np.any(stokes_apply(SolenoidalField.zeros(modes2)).coeff)


def test_stokes_self_adjoint(modes3, rng):
    for _ in range(10):
        u, v = random_field(modes3, rng), random_field(modes3, rng)
        a, b = l2_inner(stokes_apply(u), v), l2_inner(u, stokes_apply(v))
        assert abs(a - b) <= 1e-13 * abs(a)


# -- transforms ---------------------------------------------------------------

@pytest.mark.parametrize("dim, k, a", [(2, (1, 2), (2.0, -1.0)), (3, (1, -1, 2), (1.0, 1.0, 0.0))])
def test_single_mode_matches_cosine(dim, k, a):
    modes = ModeSet(dim, 8)
    u = single_mode(modes, k, a)
    x = modes.grid()
    phase = sum(k[i] * x[i] for i in range(dim))
    expected = np.stack([a[i] * np.cos(phase) for i in range(dim)])
    assert np.abs(to_physical(u) - expected).max() < 1e-14


def test_single_mode_validation(modes2):
    with pytest.raises(ValueError):
        single_mode(modes2, (1, 0), (1.0, 0.0))
    with pytest.raises(ValueError):
        single_mode(modes2, (3, 0), (0.0, 1.0))


def test_zero_field_zero_grid(modes2):
    assert not np.any(to_physical(SolenoidalField.zeros(modes2)))


@pytest.mark.parametrize("dim", [2, 3])
def test_roundtrip_and_parseval(dim, rng):
    modes = ModeSet(dim, 8)
    for _ in range(10):
        u = random_field(modes, rng)
        grid = to_physical(u)
        back = to_spectral(modes, grid)
        assert np.abs(back - u.coeff).max() <= 1e-13 * np.abs(u.coeff).max()
        quad = (2 * np.pi / modes.n) ** dim * np.sum(grid ** 2)
        assert abs(quad - l2_norm(u) ** 2) <= 1e-12 * quad


def test_to_spectral_shape_mismatch(modes2):
    with pytest.raises(ModeMismatchError):
        to_spectral(modes2, np.zeros((2, 6, 6)))


# -- norms --------------------------------------------------------------------

def test_unit_mode_norms_coincide(modes2):
    u = single_mode(modes2, (0, 1), (0.7, 0.0))
    assert np.isclose(v_norm(u), l2_norm(u)) and np.isclose(da_norm(u), l2_norm(u))
    # int a^2 cos^2 over the torus
    assert np.isclose(l2_norm(u) ** 2, 0.49 * (2 * np.pi) ** 2 / 2)


def test_l4_single_mode_closed_form(modes2):
    a = 0.7
    u = single_mode(modes2, (1, 1), (a, -a))
    # |u|^4 = (2 a^2)^2 cos^4, mean of cos^4 is 3/8
    exact = (2 * a * a) ** 2 * 3 / 8 * (2 * np.pi) ** 2
    assert np.isclose(l4_norm(u) ** 4, exact, rtol=1e-13)


def test_l4_matches_fine_quadrature(modes2, rng):
    u = random_field(modes2, rng)
    fine = ModeSet(2, 32)
    coeff = fine.zeros()
    for idx in np.ndindex(modes2.shape):
        k = [modes2.k1d[i] for i in idx]
        coeff[(slice(None),) + tuple(v % 32 for v in k)] = u.coeff[(slice(None),) + idx]
    g = to_physical(SolenoidalField(fine, coeff))
    quad = (2 * np.pi / 32) ** 2 * np.sum(np.sum(g ** 2, axis=0) ** 2)
    assert np.isclose(l4_norm(u) ** 4, quad, rtol=1e-12)


# squared norms of fields scaled below ~1e-150 underflow
@given(c=st.floats(-1e3, 1e3, allow_nan=False).filter(lambda c: c == 0 or abs(c) > 1e-100))
@settings(max_examples=25, deadline=None)
def test_norms_homogeneous(c):
    modes = ModeSet(2, 8)
    u = random_field(modes, np.random.default_rng(3))
    for norm in (l2_norm, v_norm, da_norm, l4_norm):
        assert np.isclose(norm(u * c), abs(c) * norm(u), rtol=1e-12, atol=0)


def test_norm_ordering_and_triangle(modes3, rng):
    for _ in range(20):
        u, v = random_field(modes3, rng), random_field(modes3, rng)
        assert l2_norm(u) <= v_norm(u) * (1 + 1e-14) <= da_norm(u) * (1 + 1e-13)
        for norm in (l2_norm, v_norm, da_norm, l4_norm):
            assert norm(u + v) <= (norm(u) + norm(v)) * (1 + 1e-13)
