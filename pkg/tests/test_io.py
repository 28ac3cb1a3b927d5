import numpy as np
import pytest

from nlft.grid import ComplexField, RadialRay, make_grid
from nlft.io import (
    atomic_write,
    field_to_bytes,
    load_scattering,
    read_field,
    read_ray_csv,
    read_sidecar,
    save_scattering,
    sidecar_path,
    write_field,
    write_ray_csv,
    write_sidecar,
)
from nlft.nft import ScatteringData


class TestField:
    def test_round_trip(self, tmp_path, rng):
        g = make_grid(3, 2.1)
        f = ComplexField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
        write_field(tmp_path / "a.nff", f, "k")
        back, kind = read_field(tmp_path / "a.nff")
        assert kind == "k" and back.grid == g
        np.testing.assert_array_equal(back.values, f.values)

    def test_layout(self):
        g = make_grid(1, 1.0)
        vals = np.array([[1 + 2j, 3 + 4j], [5 + 6j, 7 + 8j]])
        raw = field_to_bytes(ComplexField(g, vals))
        header, body = raw.split(b"\n", 1)
        assert header == b"NFF1 m=1 s=1.0 kind=z"
        np.testing.assert_array_equal(np.frombuffer(body, "<f8"), np.arange(1, 9))

    @pytest.mark.parametrize("blob", [b"", b"XXXX m=1\n", b"NFF1 m=1 s=1.0 kind=z\n\x00\x00"])
    def test_rejects_corrupt(self, tmp_path, blob):
        p = tmp_path / "bad.nff"
        p.write_bytes(blob)
        with pytest.raises(ValueError):
            read_field(p)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            field_to_bytes(ComplexField.zeros(make_grid(1, 1.0)), "x")


def test_ray_round_trip(tmp_path):
    ray = RadialRay.uniform(1.0, 0.25, np.array([0, 1j, 2j, 0.5 + 3j, -1j]))
    write_ray_csv(tmp_path / "t.csv", ray)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "|k|,re,im"
    back = read_ray_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.values, ray.values)
    np.testing.assert_array_equal(back.radii, ray.radii)


def test_sidecar(tmp_path):
    target = tmp_path / "x.csv"
    write_sidecar(target, {"b": 1.5, "a": "text", "c": [1, 2]})
    assert sidecar_path(target).read_text() == "a=text\nb=1.5\nc=[1, 2]\n"
    assert read_sidecar(target) == {"a": "text", "b": 1.5, "c": [1, 2]}
    with pytest.raises(ValueError):
        write_sidecar(target, {"a": "two\nlines"})


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write(tmp_path / "sub" / "f.bin", b"abc")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.bin"]


@pytest.mark.parametrize("radial", [True, False])
def test_scattering_round_trip(tmp_path, radial):
    if radial:
        samples = RadialRay.uniform(2.0, 0.5, np.array([0, 1j, 2j, 3j, 4j]))
    else:
        g = make_grid(2, 2.0)
        samples = ComplexField(g, g.points * 1j)
    data = ScatteringData(samples, 1.5, {"phantom": "sigma1"})
    path = save_scattering(tmp_path / "tau", data)
    back = load_scattering(path)
    assert back.R == 1.5 and back.provenance == {"phantom": "sigma1"}
    np.testing.assert_array_equal(back.samples.values, samples.values)
