"""Run configuration, artifact persistence and the ``paraxia`` command line.

A run directory holds

* ``manifest.json``: config echo, derived groups, regime warnings, versions,
  wall-clock and the array index (written last, atomically);
* one raw little-endian binary64 file per array (complex as interleaved
  re, im), row-major, shape recorded in the manifest;
* CSV summaries.

Exit codes: 0 pass, 1 runtime or config error, 2 failed check.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import platform
import sys
import time
from pathlib import Path
from typing import Literal

import numpy as np
import scipy
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .analytics import (BeamParams, beam_metrics_theory, ebc_theory, reflected_autocorrelation,
                        transmitted_autocorrelation)
from .ensemble import RunPlan, angular_spectrum_stats, beam_metrics_estimate, run_ensemble
from .medium import MediumSpec, dimensionless_groups
from .propagator import (KERNEL_MAX_N, apply_kernel, energy, free_propagate, make_incident_beam,
                         reflect_double_pass, reflect_kernel, reflection_coefficients)
from .screens import Grid, RNGStream, synthesize_screens
from . import wigner

__all__ = [
    "RunConfig",
    "ArtifactError",
    "load_config",
    "derived_groups",
    "write_artifacts",
    "read_artifacts",
    "write_csv",
    "execute_command",
    "main",
]

FORMAT = "paraxia-run/1"
COMMANDS = ("run-transmit", "run-reflect", "theory", "wigner", "compare", "validate")


# ---------------------------------------------------------------- config

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MediumConfig(_Section):
    family: Literal["gaussian"] = "gaussian"
    sigma: float = Field(ge=0)
    l_z: float = Field(1.0, gt=0)
    l_x: float = Field(1.0, gt=0)


class SlabConfig(_Section):
    L: float = Field(gt=0)
    n_steps: int = Field(ge=1)


class BeamConfig(_Section):
    kind: Literal["gaussian", "plane"] = "gaussian"
    r0: float = Field(gt=0)
    kappa_inc: float = 0.0
    k0: float = Field(gt=0)
    bandwidth: float = Field(0.0, ge=0)


class BoundaryConfig(_Section):
    Z0: float = Field(1.0, gt=0)


class GridConfig(_Section):
    d: Literal[1, 2] = 1
    n: int = Field(ge=8)
    width: float = Field(gt=0)


class MCConfig(_Section):
    n_realizations: int = Field(1, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)


class OutputConfig(_Section):
    directory: str = "run"
    dump_screens: bool = False
    mask: bool = False


class RunConfig(_Section):
    medium: MediumConfig
    slab: SlabConfig
    beam: BeamConfig
    boundary: BoundaryConfig = BoundaryConfig()
    grid: GridConfig
    mc: MCConfig = MCConfig()
    outputs: OutputConfig = OutputConfig()

    def medium_spec(self) -> MediumSpec:
        m = self.medium
        return MediumSpec(m.sigma, l_z=m.l_z, l_x=m.l_x, family=m.family)

    def grid_obj(self) -> Grid:
        g = self.grid
        return Grid(g.n, g.width / g.n, g.d)

    def beam_params(self) -> BeamParams:
        return BeamParams(self.medium_spec(), self.beam.k0, self.slab.L, self.beam.r0, Z0=self.boundary.Z0)


class ConfigError(ValueError):
    """Schema violation; the message names each offending field path."""


class ArtifactError(RuntimeError):
    """Missing or inconsistent run artifact."""


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"])
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def config_from_dict(d: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(d)
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None


def load_config(path) -> RunConfig:
    """Read and validate a JSON run config."""
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not JSON ({err})") from None
    return config_from_dict(d)


def derived_groups(cfg: RunConfig):
    """Dimensionless groups and regime warnings for a config."""
    med = cfg.medium_spec()
    bw = cfg.beam.bandwidth if cfg.beam.bandwidth > 0 else None
    g, narrow = dimensionless_groups(med, cfg.beam.k0, cfg.slab.L, cfg.beam.r0, bandwidth=bw, d=cfg.grid.d)
    groups = {"alpha": g.alpha, "beta": g.beta, "alpha0": g.alpha0, "a_e": g.a_e, "alpha_e": g.alpha_e,
              "D": g.D, "dcal": g.Dcal, "narrowband": narrow}
    warn = []
    if g.alpha <= 1:
        warn.append("α ≤ 1: large-α reflection asymptotics inapplicable")
    if 0 < g.beta < 1:
        warn.append("β < 1: Gaussian-limit (β ≫ 1) forms inapplicable")
    if narrow is False:
        warn.append("bandwidth exceeds the narrowband margin")
    if cfg.grid.width < 16 * cfg.medium.l_x:
        warn.append("grid width < 16 l_x: periodized covariance differs from C0")
    if cfg.beam.kind == "gaussian" and cfg.beam.r0 > cfg.grid.width / 8:
        warn.append("r0 > width/8: beam wraparound likely")
    return groups, warn


# ---------------------------------------------------------- persistence

def _versions():
    return {"paraxia": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_csv(path, header, rows):
    """RFC-4180 CSV (CRLF line ends, minimal quoting)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_artifacts(directory, manifest: dict, arrays: dict):
    """Write arrays, then the manifest (atomic rename).  Returns the manifest written."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    index = {}
    for name, a in arrays.items():
        a = np.asarray(a)
        if np.iscomplexobj(a):
            a, dt = np.ascontiguousarray(a, dtype="<c16"), "complex128"
        else:
            a, dt = np.ascontiguousarray(a, dtype="<f8"), "float64"
        fname = f"{name}.bin"
        (d / fname).write_bytes(a.tobytes(order="C"))
        index[name] = {"dtype": dt, "shape": list(a.shape), "offset": 0, "file": fname, "bytes": a.nbytes}
    man = dict(manifest)
    man["format"] = FORMAT
    man["arrays"] = index
    tmp = d / "manifest.json.tmp"
    tmp.write_text(json.dumps(man, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    os.replace(tmp, d / "manifest.json")
    return man


def read_artifacts(directory):
    """Return ``(manifest, arrays)``; raises :class:`ArtifactError` on any length mismatch."""
    d = Path(directory)
    mpath = d / "manifest.json"
    if not mpath.exists():
        raise ArtifactError(f"no manifest.json in {d}")
    man = json.loads(mpath.read_text())
    arrays = {}
    for name, e in man.get("arrays", {}).items():
        f = d / e["file"]
        if not f.exists():
            raise ArtifactError(f"array {name!r}: file {e['file']} missing")
        dt = np.dtype("<c16" if e["dtype"] == "complex128" else "<f8")
        want = int(np.prod(e["shape"], dtype=np.int64)) * dt.itemsize
        raw = f.read_bytes()
        if len(raw) != want or e.get("bytes", want) != want:
            raise ArtifactError(f"array {name!r}: {len(raw)} bytes on disk, manifest declares {want}")
        arrays[name] = np.frombuffer(raw, dtype=dt, offset=int(e.get("offset", 0))).reshape(e["shape"]).copy()
    return man, arrays


# ------------------------------------------------------------- commands

def _plan(cfg: RunConfig, experiment: str, n_real=None, seed=None) -> RunPlan:
    g = cfg.grid_obj()
    beam = {"kind": cfg.beam.kind, "kappa_inc": cfg.beam.kappa_inc}
    if cfg.beam.kind == "gaussian":
        beam["r0"] = cfg.beam.r0
    snaps = (cfg.slab.n_steps // 2,) if cfg.slab.n_steps >= 2 else ()
    return RunPlan(n_real or cfg.mc.n_realizations, cfg.mc.seed if seed is None else seed, cfg.beam.k0,
                   cfg.medium_spec(), g, cfg.slab.L, cfg.slab.n_steps, beam, experiment, cfg.boundary.Z0,
                   cfg.outputs.mask, min(16, g.n // 4), snaps)


def _base_manifest(cmd, cfg, started):
    groups, warn = derived_groups(cfg)
    return {"command": cmd, "config": cfg.model_dump(mode="json"), "groups": groups, "warnings": warn,
            "versions": _versions(), "wall_clock": {"started": started, "seconds": None}}


def _acc_arrays(prefix, acc):
    out = {}
    m, se = acc.mean_field()
    out[f"{prefix}_mean_field"], out[f"{prefix}_mean_field_se"] = m, se
    m, se = acc.mean_intensity()
    out[f"{prefix}_mean_intensity"], out[f"{prefix}_mean_intensity_se"] = m, se
    a, se = acc.autocorr_table()
    out[f"{prefix}_autocorr"], out[f"{prefix}_autocorr_se"] = a, se
    kap, s, se = acc.angular_spectrum()
    out[f"{prefix}_angular_kappa"], out[f"{prefix}_angular"], out[f"{prefix}_angular_se"] = kap, s, se
    return out


def _run(cmd, cfg, out, flags):
    exp = "transmit" if cmd == "run-transmit" else "reflect"
    plan = _plan(cfg, exp, flags.get("realizations"), flags.get("seed"))
    res = run_ensemble(plan, workers=int(flags.get("workers") or 1))
    g = plan.grid
    arrays = {"x": g.x, "audit": res.audit}
    if cfg.outputs.dump_screens:
        st = synthesize_screens(plan.medium, g, plan.n_steps, plan.dz, RNGStream(plan.master_seed, plan.start_index))
        arrays["screens_0"] = st.screens
    inc = make_incident_beam(plan.beam["kind"], dict(plan.beam, k=plan.k), g).values
    arrays["incident"] = inc
    rows = [("max_energy_defect", res.max_energy_defect(), "", "")]
    if exp == "transmit":
        arrays["free"] = plan.coeffs.T0 * free_propagate(inc, g, plan.k, plan.L)
        arrays.update(_acc_arrays("transmit", res.transmitted))
        half = plan.n_steps // 2
        if half in res.transmit and half != plan.n_steps:
            arrays.update(_acc_arrays("transmit_half", res.transmit[half]))
        if g.d == 1 and cfg.beam.kind == "gaussian":
            est = beam_metrics_estimate(res.transmitted, with_se=plan.n_realizations > 1)
            th = beam_metrics_theory(cfg.beam.r0, plan.k, plan.L, plan.medium.diffusion())
            for key in ("r_T", "rho_T"):
                rows.append((key, est[key], est[key + "_se"], getattr(th, key)))
    else:
        arrays.update(_acc_arrays("reflect", res.reflect))
        th = ebc_theory(plan.medium, plan.k, plan.L) if plan.medium.sigma > 0 else None
        try:
            if th is None or plan.coeffs.R0 == 0:
                raise ValueError("no scattering or no interface contrast")
            st = angular_spectrum_stats(res.reflect, cfg.beam.kappa_inc, th.dk_ebc,
                                        with_se=plan.n_realizations > 1)
            rows += [("enhancement", st["enhancement"], st["enhancement_se"], th.enhancement),
                     ("ebc_width", st["ebc_width"], st["ebc_width_se"], th.dk_ebc),
                     ("broad_width", st["broad_width"], st["broad_width_se"], th.dk_spec)]
        except (ValueError, RuntimeError) as err:
            rows.append(("cone_fit", "", "", f"unavailable: {err}"))
    write_csv(Path(out) / "summary.csv", ("quantity", "measured", "se", "predicted"), rows)
    return arrays, {"n_realizations": plan.n_realizations, "seed": plan.master_seed, "plan_hash": plan.plan_hash()}


def _theory(cfg, out):
    p = cfg.beam_params()
    d = Path(out)
    med = p.medium
    x = np.linspace(-3 * cfg.beam.r0, 3 * cfg.beam.r0, 61)
    tn = transmitted_autocorrelation("narrow", 0, 0, x, 0.0, p)
    rn = reflected_autocorrelation("narrow", 0, 0, x, 0.0, p)
    rows = [(xv, a.real, a.imag, b.real, b.imag) for xv, a, b in zip(x, tn, rn)]
    write_csv(d / "autocorrelation.csv", ("x", "transmitted_re", "transmitted_im", "reflected_re", "reflected_im"), rows)
    bt = beam_metrics_theory(cfg.beam.r0, cfg.beam.k0, cfg.slab.L, med.diffusion())
    zs = np.linspace(0, cfg.slab.L, 21)[1:]
    brow = []
    for z in zs:
        b = beam_metrics_theory(cfg.beam.r0, cfg.beam.k0, z, med.diffusion())
        brow.append((z, b.r_T, b.rho_T, b.chi_T if med.diffusion() > 0 else math.nan))
    write_csv(d / "beam_metrics.csv", ("z", "r_T", "rho_T", "chi_T"), brow)
    arrays = {"x": x, "transmitted_narrow": tn, "reflected_narrow": rn}
    if med.sigma > 0:
        th = ebc_theory(med, cfg.beam.k0, cfg.slab.L)
        dk = np.linspace(-4, 4, 81) * th.dk_ebc
        write_csv(d / "ebc_profile.csv", ("dk", "profile"), list(zip(dk, th.profile(dk))))
        arrays["ebc_dk"], arrays["ebc_profile"] = dk, th.profile(dk)
        arrays["transmitted_gaussian"] = transmitted_autocorrelation("gaussian", 0, 0, x, 0.0, p)
        extra = {"ebc": {"dk_spec": th.dk_spec, "dk_ebc": th.dk_ebc, "convention": th.width_convention()}}
    else:
        extra = {}
    extra["beam_metrics_L"] = {"r_T": bt.r_T, "rho_T": bt.rho_T}
    return arrays, extra


def _wigner(cfg, out):
    groups, _ = derived_groups(cfg)
    alpha, beta = groups["alpha"], groups["beta"]
    med = MediumSpec(1 / math.pi ** 0.25, family=cfg.medium.family)  # unit-amplitude dimensionless family
    q = 0.1 * np.arange(-300, 301)
    arrays = {"q": q}
    rows = []
    for r in (0.0, 0.5, 1.0, 2.0):
        a = wigner.vr_reduced_integrate(r, beta, med, q)
        b = wigner.vr_closed_form(r, beta, med, q)
        arrays[f"reduced_r{r:g}"], arrays[f"closed_r{r:g}"] = a.values, b.values
        rows.append(("reduced_vs_closed", r, wigner.l1_distance(a.values, b.values), float(a.mass()), float(b.mass())))
    arrays["decay"] = wigner.vr_asymptotics("decay", 1.0, 1.0, beta, 1.0, q, med)
    gs, n = wigner.default_full_grid(alpha, 1.0, 1.0, q_points=33, dq=0.25)
    st = wigner.vr_integrate_full(gs, alpha, beta, med, n_rs=n)
    arrays["full_q"], arrays["full_r1_s1"] = st.q, st.values[:, 0, 0]
    m = complex(st.mass()[0, 0])
    rows.append(("full_mass_r1_s1", 1.0, abs(m / math.exp(-2 * beta * math.sqrt(math.pi)) - 1), m.real, m.imag))
    write_csv(Path(out) / "wigner.csv", ("check", "r", "value", "a", "b"), rows)
    return arrays, {"alpha": alpha, "beta": beta}


def _row(name, measured, predicted, tol, ok):
    return {"check": name, "measured": measured, "predicted": predicted, "tolerance": tol, "pass": bool(ok)}


def compare_run(directory):
    """Pass/fail table for the checks that apply to a finished run; a pure function of the directory."""
    man, arr = read_artifacts(directory)
    cfg = config_from_dict(man["config"])
    cmd = man["command"]
    rows = []
    if cmd not in ("run-transmit", "run-reflect"):
        raise ArtifactError(f"compare needs a run-* directory, found {cmd!r}")
    aud = arr["audit"]
    # transmit-only runs carry no reflected energy (NaN column)
    if not cfg.outputs.mask and not np.isnan(aud[:, 2]).any():
        dfx = float(np.max(np.abs(aud[:, 1] + aud[:, 2] - aud[:, 0]) / aud[:, 0]))
        rows.append(_row("energy conservation", dfx, 0.0, "1e-10", dfx < 1e-10))
    g = cfg.grid_obj()
    med = cfg.medium_spec()
    k, L = cfg.beam.k0, cfg.slab.L
    groups = man["groups"]
    nreal = man.get("run", {}).get("n_realizations", cfg.mc.n_realizations)
    if cmd == "run-transmit" and g.d == 1:
        damp = math.exp(-k ** 2 * med.c0_zero() * L / 8)
        m, se, free = arr["transmit_mean_field"], arr["transmit_mean_field_se"], arr["free"]
        sel = np.abs(g.x) <= 2 * cfg.beam.r0 if cfg.beam.kind == "gaussian" else np.ones(g.n, bool)
        dev = np.abs(m[sel] - damp * free[sel]) / np.maximum(se[sel], 1e-300)
        c = int(np.argmin(np.abs(g.x)))
        meas = float((m[c] / free[c]).real)
        rows.append(_row("mean-field damping", meas, damp, "3 SE pointwise", nreal > 1 and bool(np.all(dev <= 3))))
        D = med.diffusion()
        if cfg.beam.kind == "gaussian" and D > 0 and D * L ** 3 / (3 * cfg.beam.r0 ** 2) >= 3:
            hdr, srows = read_csv(Path(directory) / "summary.csv")
            got = {r[0]: r for r in srows}
            th = beam_metrics_theory(cfg.beam.r0, k, L, D)
            for key, tol in (("r_T", 0.10), ("rho_T", 0.15)):
                if key in got:
                    v = float(got[key][1])
                    pred = getattr(th, key)
                    rows.append(_row(f"{key} (beam theory)", v, pred, f"{tol:.0%}", abs(v / pred - 1) <= tol))
    if cmd == "run-reflect" and g.d == 1:
        hdr, srows = read_csv(Path(directory) / "summary.csv")
        got = {r[0]: r for r in srows}
        if groups["alpha"] >= 20 and 3 <= groups["beta"] <= 10 and "enhancement" in got:
            th = ebc_theory(med, k, L)
            e = float(got["enhancement"][1])
            rows.append(_row("enhancement at -kappa_inc", e, 2.0, "± 0.15", abs(e - 2) <= 0.15))
            for key, pred, tol in (("ebc_width", th.dk_ebc, 0.20), ("broad_width", th.dk_spec, 0.15)):
                v = float(got[key][1])
                rows.append(_row(key, v, pred, f"{tol:.0%}", abs(v / pred - 1) <= tol))
    return rows


def validate_config(cfg: RunConfig):
    """Invariant suite for a config: energy, unitarity, oracle equivalences."""
    rows = []
    plan = _plan(cfg, "both", n_real=4)
    plan = dataclasses.replace(plan, mask=False)
    res = run_ensemble(plan)
    dfx = res.max_energy_defect()
    rows.append(_row("energy conservation (4 maskless realizations)", dfx, 0.0, "1e-10", dfx < 1e-10))
    g = plan.grid
    b = make_incident_beam(plan.beam["kind"], dict(plan.beam, k=plan.k), g).values
    f = free_propagate(b, g, plan.k, plan.L)
    e0, e1 = float(energy(b, g)), float(energy(f, g))
    rows.append(_row("free propagation unitarity", abs(e1 / e0 - 1), 0.0, "1e-12", abs(e1 / e0 - 1) < 1e-12))
    if g.d == 1:
        n = min(g.n, 128, KERNEL_MAX_N)
        gk = Grid(n, g.dx, 1)
        steps = min(plan.n_steps, 64)
        st = synthesize_screens(plan.medium, gk, steps, plan.L / steps, RNGStream(plan.master_seed, 0, 7))
        bk = make_incident_beam(plan.beam["kind"], dict(plan.beam, k=plan.k), gk)
        # the operator identity is checked with a contrast even when Z0 = 1 (R0 = 0)
        c = reflection_coefficients(plan.Z0 if plan.Z0 != 1 else 3.0)
        a = reflect_double_pass(bk, st, plan.k, c).values
        kk = apply_kernel(reflect_kernel(st, plan.k, c), bk).values
        err = float(np.max(np.abs(a - kk)))
        rows.append(_row("double pass vs reflection kernel", err, 0.0, "1e-8", err < 1e-8))
    p = cfg.beam_params()
    p2 = BeamParams(p.medium, p.k0, 2 * p.L, p.r0, Z0=p.Z0)
    co = p.coeffs
    xr = np.array([0.0, 0.5 * p.r0])
    ra = reflected_autocorrelation("narrow", 0, 0, xr, 0.0, p)
    ta = transmitted_autocorrelation("narrow", 0, 0, xr, 0.0, p2) * co.R0 ** 2 / co.T0 ** 2
    err = float(np.max(np.abs(ra - ta)) / max(np.max(np.abs(ta)), 1e-300))
    rows.append(_row("reflected narrow = transmitted at 2L", err, 0.0, "1e-12", err < 1e-12))
    return rows


def _print_table(rows, stream=None):
    stream = stream or sys.stdout
    for r in rows:
        flag = "PASS" if r["pass"] else "FAIL"
        print(f"{flag}  {r['check']}: measured={r['measured']!s} predicted={r['predicted']!s} tol={r['tolerance']}",
              file=stream)


def _write_table(path, rows):
    write_csv(path, ("check", "measured", "predicted", "tolerance", "pass"),
              [(r["check"], r["measured"], r["predicted"], r["tolerance"], "PASS" if r["pass"] else "FAIL")
               for r in rows])


def _resolve_seed(flags, cfg):
    if flags.get("seed") is not None:
        return int(flags["seed"])
    env = os.environ.get("PARAXIA_SEED")
    if env:
        return int(env)
    return cfg.mc.seed


def execute_command(cmd, config: RunConfig | None, flags: dict | None = None):
    """Run a command; returns ``(exit_status, run_directory)``."""
    flags = dict(flags or {})
    if cmd not in COMMANDS:
        raise ValueError(f"unknown command {cmd!r}")
    out = Path(flags.get("out") or (config.outputs.directory if config else "."))
    if cmd == "compare":
        rows = compare_run(out)
        _print_table(rows)
        _write_table(out / "compare.csv", rows)
        return (0 if all(r["pass"] for r in rows) else 2), out
    if config is None:
        raise ConfigError("this command needs --config")
    flags["seed"] = _resolve_seed(flags, config)
    if cmd == "validate":
        rows = validate_config(config)
        _print_table(rows)
        out.mkdir(parents=True, exist_ok=True)
        _write_table(out / "validate.csv", rows)
        return (0 if all(r["pass"] for r in rows) else 2), out
    t0 = time.time()
    out.mkdir(parents=True, exist_ok=True)
    man = _base_manifest(cmd, config, time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    if cmd in ("run-transmit", "run-reflect"):
        arrays, extra = _run(cmd, config, out, flags)
        man["run"] = extra
    elif cmd == "theory":
        arrays, extra = _theory(config, out)
        man["theory"] = extra
    else:
        arrays, extra = _wigner(config, out)
        man["wigner"] = extra
    man["wall_clock"]["seconds"] = time.time() - t0
    write_artifacts(out, man, arrays)
    return 0, out


def _parser():
    ap = argparse.ArgumentParser(prog="paraxia", description="White-noise paraxial slab lab.")
    ap.add_argument("cmd", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run config")
    ap.add_argument("--out", help="run directory (default: outputs.directory of the config)")
    ap.add_argument("--seed", type=int, help="master seed; overrides PARAXIA_SEED and the config")
    ap.add_argument("--realizations", type=int, help="override mc.n_realizations")
    ap.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else None
        if cfg is not None and args.realizations is not None:
            cfg = cfg.model_copy(update={"mc": cfg.mc.model_copy(update={"n_realizations": args.realizations})})
        status, out = execute_command(args.cmd, cfg, {"out": args.out, "seed": args.seed,
                                                       "realizations": args.realizations, "workers": args.workers})
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # runtime failure
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    print(f"{args.cmd}: {'ok' if status == 0 else 'checks failed'} ({out})")
    return status


if __name__ == "__main__":
    sys.exit(main())
