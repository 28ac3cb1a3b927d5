"""
File formats.

NFF1 field files: one ASCII header line ``NFF1 m=<int> s=<float> kind=<z|k>``
followed by ``(2**m)**2`` complex samples as little-endian float64 pairs
(re, im), row-major in the axis index. Radial rays are CSV ``|k|,re,im``.
Every data file may carry a ``<name>.meta`` sidecar of ``key=value`` lines.
All writes go through a temporary file in the target directory and an
atomic rename.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import ComplexField, RadialRay, make_grid
from .nft import ScatteringData

MAGIC = "NFF1"
_DTYPE = np.dtype("<f8")


def atomic_write(path: str | Path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def field_to_bytes(field: ComplexField, kind: str = "z") -> bytes:
    if kind not in ("z", "k"):
        raise ValueError("kind must be 'z' or 'k'")
    g = field.grid
    header = f"{MAGIC} m={g.size_param} s={g.half_width!r} kind={kind}\n".encode("ascii")
    body = np.empty(field.values.size * 2, dtype=_DTYPE)
    body[0::2] = field.values.real.ravel()
    body[1::2] = field.values.imag.ravel()
    return header + body.tobytes()


def write_field(path, field: ComplexField, kind: str = "z") -> Path:
    return atomic_write(path, field_to_bytes(field, kind))


def read_field(path) -> tuple[ComplexField, str]:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ValueError(f"{path}: missing NFF1 header")
    parts = raw[:nl].decode("ascii").split()
    if not parts or parts[0] != MAGIC:
        raise ValueError(f"{path}: not an NFF1 file")
    try:
        meta = dict(p.split("=", 1) for p in parts[1:])
        m, s, kind = int(meta["m"]), float(meta["s"]), meta["kind"]
    except (KeyError, ValueError) as err:
        raise ValueError(f"{path}: malformed header {raw[:nl]!r}") from err
    grid = make_grid(m, s)
    body = np.frombuffer(raw[nl + 1 :], dtype=_DTYPE)
    if body.size != 2 * grid.n**2:
        raise ValueError(f"{path}: expected {2 * grid.n ** 2} floats, found {body.size}")
    values = (body[0::2] + 1j * body[1::2]).reshape(grid.shape)
    return ComplexField(grid, values), kind


def _csv_bytes(header: list[str], rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if not isinstance(v, str) else v for v in row])
    return buf.getvalue().encode()


def write_field_csv(path, field: ComplexField, mask: np.ndarray | None = None) -> Path:
    """``x,y,re,im`` rows, optionally only where ``mask`` is true."""
    pts = field.grid.points
    sel = np.ones(field.grid.shape, bool) if mask is None else mask
    rows = zip(pts.real[sel], pts.imag[sel], field.values.real[sel], field.values.imag[sel])
    return atomic_write(path, _csv_bytes(["x", "y", "re", "im"], rows))


def write_ray_csv(path, ray: RadialRay, label: str = "|k|") -> Path:
    rows = zip(ray.radii, ray.values.real, ray.values.imag)
    return atomic_write(path, _csv_bytes([label, "re", "im"], rows))


def write_profile_csv(path, radii, values, label: str = "|z|") -> Path:
    values = np.asarray(values)
    rows = zip(np.asarray(radii), values.real, values.imag)
    return atomic_write(path, _csv_bytes([label, "re", "im"], rows))


def write_table_csv(path, header: list[str], rows) -> Path:
    return atomic_write(path, _csv_bytes(header, rows))


def read_ray_csv(path) -> RadialRay:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != 3:
            raise ValueError(f"{path}: expected 3 columns, got {header}")
        rows = [[float(v) for v in r] for r in reader if r]
    arr = np.array(rows)
    return RadialRay(arr[:, 0], arr[:, 1] + 1j * arr[:, 2])


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def write_sidecar(path, meta: dict) -> Path:
    lines = []
    for key in sorted(meta):
        val = meta[key]
        text = val if isinstance(val, str) else json.dumps(val, sort_keys=True)
        if "\n" in text:
            raise ValueError(f"sidecar value for {key!r} spans lines")
        lines.append(f"{key}={text}")
    return atomic_write(sidecar_path(path), ("\n".join(lines) + "\n").encode())


def read_sidecar(path) -> dict:
    meta = {}
    p = sidecar_path(path)
    if not p.exists():
        return meta
    for line in p.read_text().splitlines():
        if "=" not in line:
            continue
        key, val = line.split("=", 1)
        try:
            meta[key] = json.loads(val)
        except json.JSONDecodeError:
            meta[key] = val
    return meta


def save_scattering(path, data: ScatteringData, extra: dict | None = None) -> Path:
    """Grid data as NFF1 (kind k), rays as CSV; ``R`` and provenance go to the sidecar."""
    path = Path(path)
    if data.is_radial:
        write_ray_csv(path, data.samples)
    else:
        write_field(path, data.samples, kind="k")
    meta = {"R": data.R, "provenance": data.provenance}
    meta.update(extra or {})
    write_sidecar(path, meta)
    return path


def load_scattering(path, R: float | None = None) -> ScatteringData:
    path = Path(path)
    meta = read_sidecar(path)
    if path.read_bytes()[:4] == MAGIC.encode():
        samples, _ = read_field(path)
        default_R = samples.grid.half_width
    else:
        samples = read_ray_csv(path)
        default_R = samples.r_max
    R = float(meta.get("R", default_R)) if R is None else float(R)
    prov = meta.get("provenance", {})
    return ScatteringData(samples, R, prov if isinstance(prov, dict) else {})
