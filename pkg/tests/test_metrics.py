import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlft.grid import ComplexField, RadialRay, make_grid
from nlft.metrics import (
    add_noise,
    band_discrepancy,
    first_crossing,
    modulus_discrepancy,
    noise_radius_profile,
    relative_errors,
)
from nlft.nft import ScatteringData


def ray(values, step=1.0):
    return RadialRay.uniform(step * (len(values) - 1), step, np.asarray(values, complex))


class TestBandDiscrepancy:
    def test_hand_example(self):
        a = ray([0, 1.1j, 2.0j, 9j])
        b = ray([0, 1.0j, 2.0j, 4j])
        # band [1, 2]: max diff 0.1, max |Im b| 2
        assert band_discrepancy(a, b, (1, 2)) == pytest.approx(5.0)

    def test_identical(self):
        a = ray([0, 1j, 2j])
        assert band_discrepancy(a, a, (0, 2)) == 0

    def test_mismatch(self):
        with pytest.raises(ValueError):
            band_discrepancy(ray([0, 1j]), ray([0, 1j, 2j]), (0, 1))
        with pytest.raises(ValueError):
            band_discrepancy(ray([0, 1j]), ray([0, 1j]), (5, 6))


def test_modulus_discrepancy():
    assert modulus_discrepancy(np.array([1.0, 2.5]), np.array([1.0, 2.0])) == pytest.approx(25.0)


class TestRelativeErrors:
    def test_values(self):
        sup, sqr = relative_errors(np.array([1.0, 2.0, 4.0]), np.array([1.0, 2.0, 3.0]))
        assert sup == pytest.approx(100 / 3)
        assert sqr == pytest.approx(100 / np.sqrt(14))

    def test_mask(self):
        sup, _ = relative_errors(np.array([1.0, 9.0]), np.array([1.0, 2.0]), np.array([True, False]))
        assert sup == 0

    @given(st.floats(0.1, 10))
    def test_scale_invariant(self, c):
        a, b = np.array([1.0, 2.5, -1]), np.array([1.2, 2.0, -1.5])
        assert relative_errors(c * a, c * b)[1] == pytest.approx(relative_errors(a, b)[1])


class TestNoise:
    @pytest.fixture
    def clean(self):
        g = make_grid(6, 6.0)
        return ScatteringData(ComplexField.zeros(g), 6.0)

    def test_reproducible(self, clean):
        a = add_noise(clean, 1.0, 7).samples.values
        b = add_noise(clean, 1.0, 7).samples.values
        c = add_noise(clean, 1.0, 8).samples.values
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_support_and_scale(self, clean):
        noisy = add_noise(clean, 5.0, 0)
        k = np.abs(clean.samples.grid.points)
        vals = noisy.samples.values
        assert np.all(vals[k >= 6.0] == 0)
        ratio = np.abs(vals[k < 6.0]) / (0.05 * (1 + k[k < 6.0]) ** 1.5)
        # |complex gaussian| with unit variance has mean sqrt(pi)/2
        assert ratio.mean() == pytest.approx(np.sqrt(np.pi) / 2, rel=0.05)
        assert noisy.provenance["noise_p"] == 5.0

    def test_profile_monotone(self, clean):
        noisy = add_noise(clean, 1.0, 3)
        radii = np.arange(0, 6.01, 0.25)
        prof = noise_radius_profile(clean, noisy, radii)
        assert np.all(np.diff(prof) >= 0)
        assert prof[-1] == pytest.approx(np.abs(noisy.samples.values).max())

    def test_profile_on_ray(self):
        clean = ScatteringData(ray([0, 0, 0, 0]), 3.0)
        noisy = ScatteringData(ray([0, 0.5, 0.2, 1.0]), 3.0)
        np.testing.assert_array_equal(noise_radius_profile(clean, noisy, [0, 1, 2, 3]), [0, 0.5, 0.5, 1.0])

    def test_profile_grid_mismatch(self, clean):
        other = ScatteringData(ray([0, 1]), 1.0)
        with pytest.raises(ValueError):
            noise_radius_profile(clean, other, [0])


def test_first_crossing():
    assert first_crossing([0, 1, 2], [0.1, 0.6, 0.9], 0.5) == 1
    assert first_crossing([0, 1, 2], [0.1, 0.2, 0.3], 0.5) == np.inf
