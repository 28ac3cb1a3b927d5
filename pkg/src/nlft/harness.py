"""
Command-line front end and experiment runners.

Settings are merged from, in increasing priority: built-in defaults, a
``key=value`` config file (``--config``), ``NLFT_<KEY>`` environment
variables, and flags given on the command line. Each run writes into
``<out>/<timestamp>-<config hash>/``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dbar import reconstruct_shortcut
from .grid import ComplexField, RadialRay, make_grid
from .io import (
    load_scattering,
    save_scattering,
    write_field,
    write_profile_csv,
    write_sidecar,
    write_table_csv,
    atomic_write,
)
from .metrics import add_noise, first_crossing, noise_radius_profile, sup_sqr
from .nft import ScatteringData, radial_transform, tau_grid, truncate
from .phantom import DEFAULT_PIVOTS, BeltramiCoefficient, eval_sigma, get_phantom, load_phantom

logger = logging.getLogger("nlft")

DESK_CAPS = {"mz": 9, "mk": 9, "R": 20.0}
ENV_PREFIX = "NLFT_"


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------- config


def read_config(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_").lower()] = val
    return out


def parse_complex(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    parts = str(text).replace(" ", "").split(",")
    try:
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
        if len(parts) == 1:
            return complex(parts[0].replace("i", "j"))
    except ValueError:
        pass
    raise ConfigError(f"cannot read {text!r} as a point; use x,y")


def parse_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as a comma-separated list") from None


def _coerce(spec: dict, key: str, value):
    kind = spec.get(key, str)
    if value is None:
        return None
    try:
        if kind is bool:
            return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
        if kind == "point":
            return parse_complex(value)
        if kind == "list":
            return parse_list(value)
        return kind(value)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid value for {key}: {value!r} ({err})") from None


# (type, default) per setting and subcommand
COMMON = {
    "workers": (int, 1),
    "out": (str, "runs"),
    "allow_large": (bool, False),
    "tol": (float, None),
}

COMMANDS = {
    "forward": {
        "phantom": (str, None),
        "mode": (str, "ray"),
        "R": (float, None),
        "mz": (int, 8),
        "sz": (float, 2.1),
        "step": (float, 0.1),
        "mk": (int, 6),
    },
    "invert-shortcut": {
        "tau": (str, None),
        "R": (float, None),
        "mk": (int, 8),
        "zgrid": (str, "ray:64"),
    },
    "invert-transport": {
        "phantom": (str, None),
        "z0": ("point", None),
        "k0": ("point", complex(1.0)),
        "R": (float, 10.0),
        "mk": (int, 7),
        "mz": (int, 7),
        "sz": (float, 1.5),
        "solver_mz": (int, 7),
        "order": (int, 2),
    },
    "compare": {
        "phantom": (str, None),
        "R_list": ("list", [10.0]),
        "z0": ("point", None),
        "k0": ("point", complex(1.0)),
        "mk": (int, 6),
        "mz": (int, 6),
        "sz": (float, 1.5),
        "tau_mz": (int, 7),
        "solver_mz": (int, 7),
        "shortcut_mk": (int, 8),
    },
    "cgo-compare": {
        "phantom": (str, None),
        "z0": ("point", None),
        "k0": ("point", complex(1.0)),
        "R": (float, 20.0),
        "mk": (int, 7),
        "mz": (int, 7),
        "sz": (float, 1.5),
        "solver_mz": (int, 7),
    },
    "gibbs": {
        "phantom": (str, "sigma1"),
        "R_list": ("list", [5.0, 10.0, 15.0, 20.0]),
        "mk": (int, 8),
        "mz": (int, 8),
        "step": (float, 0.1),
        "points": (int, 64),
    },
    "noise": {
        "phantom": (str, "sigma1"),
        "p_list": ("list", [0.1, 0.5, 1.0, 5.0]),
        "seed": (int, 0),
        "mk": (int, 7),
        "sk": (float, 6.0),
        "mz": (int, 7),
        "level": (float, 0.5),
    },
}


def resolve_settings(command: str, args: argparse.Namespace, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    table = dict(COMMON)
    table.update(COMMANDS[command])
    types = {k: v[0] for k, v in table.items()}
    settings = {k: v[1] for k, v in table.items()}
    if getattr(args, "config", None):
        for key, val in read_config(args.config).items():
            key = _canonical(key, table)
            if key is None:
                continue
            settings[key] = _coerce(types, key, val)
    for key in table:
        env = environ.get(ENV_PREFIX + key.upper())
        if env is not None:
            settings[key] = _coerce(types, key, env)
    for key in table:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = _coerce(types, key, val)
    return settings


def _canonical(key: str, table: dict) -> str | None:
    for k in table:
        if k.lower() == key.lower():
            return k
    raise ConfigError(f"unknown config key {key!r}")


def check_caps(settings: dict) -> None:
    over = []
    for key, cap in DESK_CAPS.items():
        for name in (key, "solver_" + key, "tau_" + key):
            val = settings.get(name)
            if val is not None and val > cap:
                over.append(f"{name}={val} > {cap}")
    for val in settings.get("R_list") or []:
        if val > DESK_CAPS["R"]:
            over.append(f"R={val} > {DESK_CAPS['R']}")
    if not over:
        return
    if not settings.get("allow_large"):
        raise ConfigError("parameters exceed desk-scale caps (" + ", ".join(over) + "); pass --allow-large")
    logger.warning("large run: %s; expect long runtimes and high memory use", ", ".join(over))


def require(settings: dict, *keys: str) -> None:
    missing = [k for k in keys if settings.get(k) is None]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join(missing))


def config_hash(command: str, settings: dict) -> str:
    payload = {k: v for k, v in settings.items() if k not in ("workers", "out")}
    text = json.dumps([command, payload], sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:10]


def run_dir_name(out: str, command: str, settings: dict) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    base = f"{stamp}-{command}-{config_hash(command, settings)}"
    path, suffix = Path(out) / base, 1
    while path.exists():
        path, suffix = Path(out) / f"{base}-{suffix}", suffix + 1
    return path


def staging_dir(final: Path) -> Path:
    """Hidden sibling of ``final``; renamed into place only when the run succeeds."""
    tmp = final.with_name(f".{final.name}.partial")
    tmp.mkdir(parents=True)
    return tmp


class Recorder:
    """Writes outputs with provenance sidecars."""

    def __init__(self, run_dir: Path, command: str, settings: dict):
        self.run_dir = run_dir
        self.command = command
        self.settings = settings
        self.start = time.perf_counter()
        self.files: list[Path] = []

    def meta(self, extra: dict | None = None) -> dict:
        meta = {
            "command": self.command,
            "config": {k: _jsonable(v) for k, v in self.settings.items()},
            "version": f"nlft {__version__}",
            "wall_time": round(time.perf_counter() - self.start, 3),
        }
        meta.update(extra or {})
        return meta

    def add(self, path: Path, extra: dict | None = None) -> Path:
        write_sidecar(path, self.meta(extra))
        self.files.append(path)
        return path

    def path(self, name: str) -> Path:
        return self.run_dir / name


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _phantom(name):
    if name is None:
        raise ConfigError("missing required setting: phantom")
    if os.path.exists(name):
        return load_phantom(name)
    try:
        return get_phantom(name)
    except ValueError as err:
        raise ConfigError(str(err)) from None


# ---------------------------------------------------------------- runners


def run_forward(s: dict, rec: Recorder) -> dict:
    require(s, "phantom", "R")
    ph = _phantom(s["phantom"])
    tol = s["tol"] or 1e-8
    if s["mode"] == "ray":
        data = radial_transform(ph, s["R"], s["step"], s["mz"], tol, s_z=s["sz"], workers=s["workers"])
        path = rec.path("tau.csv")
    elif s["mode"] == "grid":
        mu = BeltramiCoefficient.from_phantom(ph, make_grid(s["mz"], s["sz"]))
        data = tau_grid(mu, make_grid(s["mk"], s["R"]), s["R"], tol, workers=s["workers"],
                        provenance={"phantom": ph.id})
        path = rec.path("tau.nff")
    else:
        raise ConfigError(f"mode must be 'ray' or 'grid', got {s['mode']!r}")
    save_scattering(path, data, rec.meta())
    rec.files.append(path)
    return {"max_abs_tau": data.max_abs(), "files": [str(path)]}


def parse_zgrid(spec: str):
    """``ray:<n>`` (n radii on [0, 1]) or ``grid:<m>,<s>`` (grid points in the unit disc)."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "ray":
            n = int(rest or 64)
            return "ray", np.linspace(0.0, 1.0, n), None, None
        if kind == "grid":
            m, s = rest.split(",")
            grid = make_grid(int(m), float(s))
            mask = grid.disc_mask(1.0)
            return "grid", grid.points[mask], grid, mask
    except ValueError:
        pass
    raise ConfigError(f"bad zgrid spec {spec!r}; use ray:<n> or grid:<m>,<s>")


def run_invert_shortcut(s: dict, rec: Recorder) -> dict:
    require(s, "tau")
    data = load_scattering(s["tau"])
    R = s["R"] if s["R"] is not None else data.R
    kind, zs, grid, mask = parse_zgrid(s["zgrid"])
    recon = reconstruct_shortcut(data, zs, R, s["mk"], s["tol"] or 1e-10, workers=s["workers"],
                                 grid=grid, mask=mask)
    if kind == "ray":
        path = write_profile_csv(rec.path("sigma_profile.csv"), zs, recon.sigma)
    else:
        path = write_field(rec.path("sigma.nff"), recon.to_field(), "z")
    rec.add(path)
    _write_report(rec, recon.diagnostics)
    return dict(recon.diagnostics)


def _write_report(rec: Recorder, diag: dict, name: str = "diagnostics.txt") -> None:
    stable = {k: v for k, v in diag.items() if "time" not in k}
    lines = [f"{k} = {json.dumps(_jsonable(v))}" for k, v in sorted(stable.items())]
    path = atomic_write(rec.path(name), ("\n".join(lines) + "\n").encode())
    rec.add(path, {"timings": {k: v for k, v in diag.items() if "time" in k}})


def _field_from(grid, values) -> ComplexField:
    return ComplexField(grid, np.nan_to_num(values, nan=0.0))


def run_invert_transport(s: dict, rec: Recorder) -> dict:
    from .transport import reconstruct_transport

    ph = _phantom(s["phantom"])
    recon = reconstruct_transport(
        ph, s["z0"], s["k0"], s["R"], s["mk"], s["mz"], s["tol"] or 1e-6,
        s_z=s["sz"], solver_m_z=s["solver_mz"], order=s["order"], workers=s["workers"],
    )
    g = recon.grid
    for name, vals in (("sigma", recon.sigma_field), ("f_mu", recon.f_mu_field),
                       ("f_minus_mu", recon.f_minus_mu_field)):
        rec.add(write_field(rec.path(f"{name}.nff"), _field_from(g, vals), "z"))
    truth = eval_sigma(ph, g.points)
    sup, sqr = sup_sqr(recon.sigma_field, truth, recon.mask)
    recon.diagnostics.update({"sup": sup, "sqr": sqr})
    _write_report(rec, recon.diagnostics)
    return dict(recon.diagnostics)


def run_compare(s: dict, rec: Recorder) -> dict:
    from .transport import half_disc_errors, reconstruct_transport

    ph = _phantom(s["phantom"])
    z0 = s["z0"] if s["z0"] is not None else DEFAULT_PIVOTS.get(ph.id)
    if z0 is None:
        raise ConfigError("compare needs z0 for this phantom")
    R_list = sorted(s["R_list"])
    R_max = R_list[-1]
    mu = BeltramiCoefficient.from_phantom(ph, make_grid(s["tau_mz"], 2.1))
    data = tau_grid(mu, make_grid(s["mk"], R_max), R_max, 1e-8, workers=s["workers"])
    grid = make_grid(s["mz"], s["sz"])
    mask = grid.disc_mask(1.0)
    truth = eval_sigma(ph, grid.points)
    rows = []
    for R in R_list:
        shct = reconstruct_shortcut(truncate(data, R), grid.points[mask], R, s["shortcut_mk"],
                                    workers=s["workers"], grid=grid, mask=mask)
        sh_sup, sh_sqr = sup_sqr(shct.sigma, truth[mask])
        tr = reconstruct_transport(ph, z0, s["k0"], R, s["mk"], s["mz"], s["tol"] or 1e-6,
                                   s_z=s["sz"], solver_m_z=s["solver_mz"], workers=s["workers"])
        tr_sup, tr_sqr = sup_sqr(tr.sigma_field, truth, mask)
        near, far = half_disc_errors(grid.points[mask], np.abs(tr.sigma - truth[mask]), z0)
        rows.append([R, sh_sup, sh_sqr, tr_sup, tr_sqr, near, far])
        rec.add(write_field(rec.path(f"shortcut_R{R:g}.nff"), shct.to_field(), "z"))
        rec.add(write_field(rec.path(f"transport_R{R:g}.nff"), _field_from(grid, tr.sigma_field), "z"))
    header = ["R", "sup_shct", "sqr_shct", "sup_z0", "sqr_z0", "near_err_z0", "far_err_z0"]
    rec.add(write_table_csv(rec.path("compare.csv"), header, rows))
    return {"table": [dict(zip(header, r)) for r in rows]}


def run_cgo_compare(s: dict, rec: Recorder) -> dict:
    from .transport import compare_transported_cgo

    ph = _phantom(s["phantom"])
    res = compare_transported_cgo(ph, s["z0"], s["k0"], s["R"], s["mk"], s["mz"], s["tol"] or 1e-6,
                                  s_z=s["sz"], solver_m_z=s["solver_mz"], workers=s["workers"])
    grid = make_grid(s["mz"], s["sz"])
    mask = grid.disc_mask(1.0)
    for name, vals in (("f_actual", res["f_true"]), ("f_transported", res["f_transported"]),
                       ("f_difference", res["f_transported"] - res["f_true"])):
        arr = np.zeros(grid.shape, dtype=np.complex128)
        arr[mask] = vals
        rec.add(write_field(rec.path(f"{name}.nff"), ComplexField(grid, arr), "z"))
    _write_report(rec, res["diagnostics"])
    return {"sup": res["sup"], "sqr": res["sqr"]}


def gibbs_profiles(phantom, R_list, m_k, m_z, step, points, workers=1, tol=1e-10):
    """Radial shortcut profiles for each cutoff; returns ``(radii, {R: sigma})``."""
    ph = _phantom(phantom) if isinstance(phantom, str) else phantom
    ray = radial_transform(ph, max(R_list), step, m_z, workers=workers)
    zs = np.linspace(0.0, 1.0, points)
    out = {}
    for R in R_list:
        out[R] = reconstruct_shortcut(truncate(ray, R), zs, R, m_k, tol, workers=workers).sigma
    return zs, out, ray


def off_jump_error(zs, sigma, truth, band=(0.45, 0.55)) -> float:
    off = (zs < band[0]) | (zs > band[1])
    return float(np.linalg.norm((sigma - truth)[off]))


def run_gibbs(s: dict, rec: Recorder) -> dict:
    ph = _phantom(s["phantom"])
    if not ph.radial:
        raise ConfigError("gibbs needs a radial phantom")
    R_list = sorted(s["R_list"])
    zs, profiles, ray = gibbs_profiles(ph, R_list, s["mk"], s["mz"], s["step"], s["points"], s["workers"])
    truth = eval_sigma(ph, zs)
    header = ["|z|"] + [f"{part}_R{R:g}" for R in R_list for part in ("re", "im")]
    rows = [[z] + [v for R in R_list for v in (profiles[R][i].real, profiles[R][i].imag)]
            for i, z in enumerate(zs)]
    rec.add(write_table_csv(rec.path("profiles.csv"), header, rows))
    summary = [[R, off_jump_error(zs, profiles[R].real, truth), float(profiles[R].real.max()),
                float(np.abs(profiles[R].imag).max())] for R in R_list]
    rec.add(write_table_csv(rec.path("summary.csv"), ["R", "l2_off_jump", "max_re", "max_abs_im"], summary))
    return {"summary": summary}


def noise_study(phantom, p_list, seed, m_k, s_k, m_z, workers=1):
    """E_p(r) profiles for synthetic noise on tau over the ``(m_k, s_k)`` k-grid."""
    ph = _phantom(phantom) if isinstance(phantom, str) else phantom
    kgrid = make_grid(m_k, s_k)
    R = s_k
    if ph.radial:
        ray = radial_transform(ph, R * np.sqrt(2) + 0.1, 0.05, m_z, workers=workers)
        vals = np.where(np.abs(kgrid.points) < R, ray.values_at(kgrid.points), 0.0)
        clean = ScatteringData(ComplexField(kgrid, vals), R, {"phantom": ph.id})
    else:
        mu = BeltramiCoefficient.from_phantom(ph, make_grid(m_z, 2.1))
        clean = tau_grid(mu, kgrid, R, workers=workers)
    radii = np.round(np.arange(0.0, R + 1e-9, 0.1), 10)
    profiles = {}
    for p in p_list:
        noisy = add_noise(clean, p, seed)
        profiles[p] = noise_radius_profile(clean, noisy, radii)
    return radii, profiles


def run_noise(s: dict, rec: Recorder) -> dict:
    p_list = s["p_list"]
    radii, profiles = noise_study(s["phantom"], p_list, s["seed"], s["mk"], s["sk"], s["mz"], s["workers"])
    header = ["r"] + [f"E_p{p:g}" for p in p_list]
    rows = [[r] + [profiles[p][i] for p in p_list] for i, r in enumerate(radii)]
    rec.add(write_table_csv(rec.path("noise_profiles.csv"), header, rows), {"noise_gamma": 1.5})
    crossings = {p: first_crossing(radii, profiles[p], s["level"]) for p in p_list}
    return {"crossings": crossings}


RUNNERS = {
    "forward": run_forward,
    "invert-shortcut": run_invert_shortcut,
    "invert-transport": run_invert_transport,
    "compare": run_compare,
    "cgo-compare": run_cgo_compare,
    "gibbs": run_gibbs,
    "noise": run_noise,
}


# -------------------------------------------------------------------- CLI


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlft", description="Nonlinear Fourier transform and D-bar reconstructions")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value settings file")
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="parent directory for run directories (default: runs)")
        p.add_argument("--tol", type=float)
        p.add_argument("--allow-large", dest="allow_large", action="store_const", const=True)

    p = sub.add_parser("forward", help="scattering transform of a phantom")
    common(p)
    p.add_argument("--phantom")
    p.add_argument("--mode", choices=["ray", "grid"])
    p.add_argument("--R", type=float)
    p.add_argument("--mz", type=int)
    p.add_argument("--sz", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--mk", type=int)

    p = sub.add_parser("invert-shortcut", help="D-bar reconstruction from scattering data")
    common(p)
    p.add_argument("--tau")
    p.add_argument("--R", type=float)
    p.add_argument("--mk", type=int)
    p.add_argument("--zgrid", help="ray:<n> or grid:<m>,<s>")

    for name, helptext in (("invert-transport", "transport matrix reconstruction"),
                           ("cgo-compare", "transported versus direct CGO solution")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--phantom")
        p.add_argument("--z0")
        p.add_argument("--k0")
        p.add_argument("--R", type=float)
        p.add_argument("--mk", type=int)
        p.add_argument("--mz", type=int)
        p.add_argument("--sz", type=float)
        p.add_argument("--solver-mz", dest="solver_mz", type=int)
        if name == "invert-transport":
            p.add_argument("--order", type=int, choices=[2, 4])

    p = sub.add_parser("compare", help="shortcut versus transport errors")
    common(p)
    p.add_argument("--phantom")
    p.add_argument("--R-list", dest="R_list")
    p.add_argument("--z0")
    p.add_argument("--k0")
    p.add_argument("--mk", type=int)
    p.add_argument("--mz", type=int)
    p.add_argument("--sz", type=float)
    p.add_argument("--tau-mz", dest="tau_mz", type=int)
    p.add_argument("--solver-mz", dest="solver_mz", type=int)
    p.add_argument("--shortcut-mk", dest="shortcut_mk", type=int)

    p = sub.add_parser("gibbs", help="radial shortcut profiles for several cutoffs")
    common(p)
    p.add_argument("--phantom")
    p.add_argument("--R-list", dest="R_list")
    p.add_argument("--mk", type=int)
    p.add_argument("--mz", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--points", type=int)

    p = sub.add_parser("noise", help="E_p(r) profiles under synthetic noise")
    common(p)
    p.add_argument("--phantom")
    p.add_argument("--p-list", dest="p_list")
    p.add_argument("--seed", type=int)
    p.add_argument("--mk", type=int)
    p.add_argument("--sk", type=float)
    p.add_argument("--mz", type=int)
    p.add_argument("--level", type=float)
    return parser


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = resolve_settings(args.command, args, environ)
        check_caps(settings)
        run_dir = run_dir_name(settings["out"], args.command, settings)
        tmp = staging_dir(run_dir)
        try:
            result = RUNNERS[args.command](settings, Recorder(tmp, args.command, settings))
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
        os.replace(tmp, run_dir)
    except (ConfigError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # solver failures and the like
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    print(str(run_dir))
    for key, val in result.items():
        if key != "files":
            print(f"{key}: {json.dumps(_jsonable(val), default=_jsonable)}")
    return 0
