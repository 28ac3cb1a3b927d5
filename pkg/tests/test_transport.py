import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlft.grid import make_grid
from nlft.krylov import SolverError
from nlft.transport import (
    TransportMatrix,
    TruncatedCgo,
    _normalize,
    frequency_grid,
    half_disc_errors,
    mu_via_differentiation,
    reconstruct_transport,
    recover_f_fields,
    transport,
    u_from_f,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
complexes = st.builds(complex, finite, finite)


@given(complexes, complexes)
def test_u_round_trip(f_mu, f_minus):
    u1, u2 = u_from_f(f_mu, f_minus)
    a, b = recover_f_fields(u1, u2)
    assert a == pytest.approx(f_mu, abs=1e-9)
    assert b == pytest.approx(f_minus, abs=1e-9)


def test_identity_transport():
    T = TransportMatrix.from_values(0.1, 1.5, 1.0, 1.0, 1j)
    np.testing.assert_array_equal(T.as_array(), np.eye(2))
    assert transport(T, 2 + 1j, -3j) == (2 + 1j, -3j)


def test_transport_is_real_linear():
    T = TransportMatrix.from_values(0.0, 2.0, 1.0, 0.5 - 2j, 1.5 + 0.25j)
    u1, u2 = transport(T, 1j, 0)
    assert (u1, u2) == (0.5j, 1.5j)
    assert not TransportMatrix(0, 2, 1, np.nan, 0, 0, 0).is_finite()


def test_frequency_grid():
    g = frequency_grid(10.0, 6)
    assert g.n == 128
    assert g.half_width == pytest.approx(21.5)


class TestNormalize:
    def test_unit_at_origin(self, rng):
        g = make_grid(3, 2.0)
        e1 = TruncatedCgo(0.5, g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
        e2 = TruncatedCgo(0.5, g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
        out = _normalize(e1, e2)
        assert out.at_zero() == 1.0

    def test_dependent_raises(self):
        g = make_grid(3, 2.0)
        e = TruncatedCgo(0.5, g, np.ones(g.shape, complex))
        with pytest.raises(SolverError):
            _normalize(e, e * 2.0)

    def test_at_interpolates_factor(self):
        g = make_grid(5, 2.0)
        cgo = TruncatedCgo(0.3j, g, np.ones(g.shape, complex))
        assert cgo.at(0.4 + 0.1j) == pytest.approx(np.exp(1j * 0.3j * (0.4 + 0.1j)))


class TestMuViaDifferentiation:
    def test_exact_for_linear_quasiconformal_map(self):
        # f = z + c conj(z) has dbar f = c and d f = 1
        g = make_grid(5, 1.5)
        c = 0.2 - 0.1j
        f = g.points + c * np.conj(g.points)
        mask = g.disc_mask(1.0)
        est = mu_via_differentiation(f, mask, g, 0.0)
        np.testing.assert_allclose(est.mu[mask], c, atol=1e-12)
        assert not est.flagged.any()

    def test_plane_wave_has_zero_mu(self):
        g = make_grid(5, 1.5)
        mask = g.disc_mask(1.0)
        est = mu_via_differentiation(np.exp(1j * g.points), mask, g, 1.0)
        assert np.abs(est.mu[mask]).max() < 1e-12

    def test_clamps_and_flags(self):
        g = make_grid(4, 1.5)
        mask = g.disc_mask(1.0)
        est = mu_via_differentiation(g.points + 2 * np.conj(g.points), mask, g, 0.0)
        assert est.clamped == int(mask.sum())
        assert np.abs(est.mu).max() < 1
        with pytest.raises(SolverError):
            mu_via_differentiation(np.ones(g.shape, complex), mask, g, 0.0)

    def test_flagged_point_takes_neighbour_value(self):
        g = make_grid(4, 1.5)
        mask = g.disc_mask(1.0)
        f = g.points + 0.1 * np.conj(g.points)
        f[g.origin_index, g.origin_index] = np.nan
        est = mu_via_differentiation(f, mask, g, 0.0)
        assert est.flagged.sum() >= 1
        assert np.all(np.isfinite(est.mu))


def test_half_disc_errors():
    z = np.array([0.5, -0.5, 0.5j])
    near, far = half_disc_errors(z, np.array([1.0, 3.0, 7.0]), 2.0)
    assert (near, far) == (1.0, 3.0)


def test_unit_phantom_is_reproduced():
    rec = reconstruct_transport("unit", 1.5, 1.0, 4.0, 5, 4, solver_m_z=5)
    assert np.abs(rec.sigma - 1).max() <= 1e-6
    assert rec.diagnostics["flagged_fraction"] == 0.0


def test_pivot_must_be_outside():
    with pytest.raises(ValueError):
        reconstruct_transport("unit", 0.5, 1.0, 4.0, 5, 4)


def test_normalize_hand_example():
    g = make_grid(2, 1.0)
    o = g.origin_index
    f1, f2 = np.zeros(g.shape, complex), np.zeros(g.shape, complex)
    f1[o, o], f2[o, o] = 1 + 1j, 1j
    f1[0, 0], f2[0, 0] = 2.0, 5.0
    out = _normalize(TruncatedCgo(0.0, g, f1), TruncatedCgo(0.0, g, f2))
    # A = 1, B = -1
    assert out.factor[0, 0] == pytest.approx(2.0 - 5.0)


def test_free_space_transport():
    from nlft.nft import PivotData
    from nlft.transport import beta_from_alpha, normalize_alpha, solve_freq_cgo

    g = frequency_grid(3.0, 4)
    zeros = np.zeros(g.shape, complex)
    pivot = PivotData(1.5 + 0j, g, zeros + 1, zeros, zeros, 3.0)
    z, k0 = 0.2 - 0.3j, 1.0
    alpha = normalize_alpha(solve_freq_cgo(pivot, z))
    beta = beta_from_alpha(alpha)
    T = TransportMatrix.from_fields(z, 1.5, k0, alpha, beta)
    e = np.exp(1j * k0 * (z - 1.5))
    assert (T.a1, T.a2) == pytest.approx((e.real, e.imag), abs=1e-12)
    assert (T.b1 + 1j * T.b2) == pytest.approx(1j * e, abs=1e-12)
    assert beta.at_zero() == 1j


def test_free_fields_recovered():
    z = np.linspace(-1, 1, 5) + 0.3j
    e = np.exp(1j * z)
    f_mu, f_minus = recover_f_fields(e, 1j * e)
    np.testing.assert_allclose(f_mu, e, atol=1e-15)
    np.testing.assert_allclose(f_minus, e, atol=1e-15)


def test_differentiation_symbolic_oracle():
    g = make_grid(6, 1.5)
    k0, c = 1.0, 0.05 - 0.02j
    z = g.points
    f = np.exp(1j * k0 * z) * (1 + c * np.conj(z))
    mask = g.disc_mask(1.0)
    est = mu_via_differentiation(f, mask, g, k0)
    e = np.exp(1j * k0 * z)
    exact = c * e / np.conj(1j * k0 * e * (1 + c * np.conj(z)))
    inner = g.disc_mask(0.9)
    assert np.abs(est.mu - exact)[inner].max() <= 1e-6


def test_clamp_preserves_direction():
    g = make_grid(4, 1.5)
    c = 1.2 * np.exp(0.7j)
    est = mu_via_differentiation(g.points + c * np.conj(g.points), g.disc_mask(1.0), g, 0.0)
    v = est.mu[g.origin_index, g.origin_index]
    assert abs(v) == pytest.approx(1 - 1e-9, abs=1e-15)
    assert np.angle(v) == pytest.approx(0.7)
