import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlft.grid import ComplexField, make_grid
from nlft.phantom import (
    PHANTOMS,
    BeltramiCoefficient,
    eval_sigma,
    get_phantom,
    load_phantom,
    mu_from_sigma,
    sigma_from_mu,
)


class TestEvalSigma:
    @pytest.mark.parametrize(
        "name,z,expected",
        [
            ("sigma1", 0.25, 2.0),
            ("sigma1", 0.75, 1.0),
            ("sigma1", 0.5, 1.0),
            ("sigma2", 0.25j, 2.0),
            ("sigma2", 0.15, 1.0),
            ("sigma2", 0.05, 2.0),
            ("sigma2", -0.45, 2.0),
            ("unit", 0.3 + 0.1j, 1.0),
        ],
    )
    def test_values(self, name, z, expected):
        assert eval_sigma(name, z) == expected

    def test_unknown_phantom(self):
        with pytest.raises(ValueError, match="unknown phantom"):
            eval_sigma("sigma9", 0)

    @pytest.mark.parametrize("name", sorted(PHANTOMS))
    def test_one_outside_unit_disc(self, name):
        theta = np.linspace(0, 2 * np.pi, 50)
        z = np.concatenate([r * np.exp(1j * theta) for r in (1.0, 1.3, 2.0)])
        np.testing.assert_array_equal(eval_sigma(name, z), 1.0)

    @pytest.mark.parametrize("name", sorted(PHANTOMS))
    def test_bounds(self, name):
        ph = get_phantom(name)
        g = make_grid(6, 1.0)
        vals = ph(g.points)
        assert vals.min() >= 1 / ph.bound and vals.max() <= ph.bound
        assert vals.max() - vals.min() == pytest.approx(ph.contrast)

    @pytest.mark.parametrize("name", ["sigma1", "sigma2"])
    @given(r=st.floats(0, 1.2), angle=st.floats(0, 6.3))
    def test_radial(self, name, r, angle):
        assert eval_sigma(name, r) == eval_sigma(name, r * np.exp(1j * angle))

    def test_checkerboard_contrasts(self):
        assert get_phantom("sigma3").contrast == pytest.approx(1.5)
        assert get_phantom("sigma4").contrast == pytest.approx(2.8)


class TestMuSigma:
    def test_examples(self):
        assert mu_from_sigma(1.0) == 0.0
        assert mu_from_sigma(2.0) == pytest.approx(-1 / 3)

    def test_round_trip(self, rng):
        sigma = np.exp(rng.standard_normal((20, 20)))
        assert np.abs(sigma_from_mu(mu_from_sigma(sigma)) - sigma).max() <= 1e-14 * sigma.max()

    def test_field_round_trip(self):
        g = make_grid(4, 1.0)
        f = ComplexField(g, 1.0 + g.points.real**2)
        back = sigma_from_mu(mu_from_sigma(f))
        np.testing.assert_allclose(back.values, f.values, atol=1e-14)

    def test_errors(self):
        with pytest.raises(ValueError):
            mu_from_sigma(np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            sigma_from_mu(np.array([-1.0]))


class TestBeltramiCoefficient:
    def test_from_phantom_support_and_bound(self):
        g = make_grid(6, 2.1)
        mu = BeltramiCoefficient.from_phantom("sigma1", g)
        assert np.all(mu.values[np.abs(g.points) >= 1.0 + g.step] == 0)
        assert mu.kappa == pytest.approx(1 / 3)
        assert mu.support_radius < 0.5 + 2 * g.step

    def test_cell_average_of_constant_region(self):
        g = make_grid(6, 2.1)
        mu = BeltramiCoefficient.from_phantom("sigma1", g)
        assert mu.values[g.origin_index, g.origin_index] == pytest.approx(-1 / 3)

    @pytest.mark.parametrize("name", ["sigma1", "sigma2", "sigma3"])
    def test_kappa_at_most_half(self, name):
        assert BeltramiCoefficient.from_phantom(name, make_grid(5, 2.1)).kappa <= 0.5

    def test_sigma4_kappa(self):
        # contrast 1:3.8 puts |mu| above one half
        mu = BeltramiCoefficient.from_phantom("sigma4", make_grid(6, 2.1))
        assert mu.kappa == pytest.approx(2.8 / 4.8, abs=1e-12)

    def test_rejects_unit_modulus(self):
        g = make_grid(2, 1.0)
        with pytest.raises(ValueError):
            BeltramiCoefficient(g, np.full(g.shape, 1.0))

    def test_negation(self):
        mu = BeltramiCoefficient.from_phantom("sigma1", make_grid(4, 2.1))
        np.testing.assert_array_equal((-mu).values, -mu.values)


def test_load_phantom(tmp_path):
    path = tmp_path / "blob.txt"
    path.write_text("# two inclusions\ncircle 0.2 0.0 0.3 2.0\nrect -0.8 -0.2 -0.4 0.2 0.5\n")
    ph = load_phantom(path)
    assert ph(0.2 + 0j) == 2.0
    assert ph(-0.6 + 0j) == 0.5
    assert ph(0.0 + 0.9j) == 1.0
    assert ph(1.5 + 0j) == 1.0
    assert ph.contrast == pytest.approx(1.5)


@pytest.mark.parametrize(
    "text,msg",
    [("blob 1 2 3", "unknown shape"), ("circle 1 2 3", "takes 4"), ("circle 0 0 0.1 -1", "positive"), ("rect a b c d e", "non-numeric")],
)
def test_load_phantom_errors(tmp_path, text, msg):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ValueError, match=msg):
        load_phantom(path)
