"""Run configuration: plain-text key/value files with total validation.

Format: INI-style sections, `key = value` pairs, `#` comments.  A single
top-level key `seed` may precede the first section.  The `mode` key inside
[noise] is list-valued and may repeat; every other duplicate key is an
error.  Unknown sections and keys are rejected so typos cannot silently
fall back to defaults.  Parsing either returns a valid RunConfig or raises
ConfigError carrying the complete list of problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closures import CLOSURE_KINDS, EDDY_VISC, ENERGY_BALANCED, ClosureSpec
from .grid import Grid, build_grid
from .noise import ModeSpec, NoiseModel, build_noise_model
from .operators import Coefs
from .stepper import Problem, SchemeSpec, initial_state


class ConfigError(ValueError):
    """All validation problems found in a config file."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


_GRID_KEYS = {"lx", "ly", "h", "nx", "ny", "nz", "dealias"}
_PHYSICS_KEYS = {"mu_v", "nu_v", "mu_t", "nu_t", "mu_s", "nu_s", "f", "g",
                 "rho0", "beta_t", "beta_s", "t_ref", "s_ref", "alpha_t"}
_NOISE_KEYS = {"mode"}
_CLOSURE_KEYS = {"kind", "ell", "alpha", "gamma_r"}
_SCHEME_KEYS = {"dt", "t_end", "output_every"}
_INIT_KEYS = {"kind", "component", "nx", "ny", "m", "amp", "kmax", "mmax",
              "v_norm", "ic_seed"}
_OUTPUT_KEYS = {"dir", "snapshots", "snapshot_every"}
_SECTIONS = {
    "grid": _GRID_KEYS,
    "physics": _PHYSICS_KEYS,
    "noise": _NOISE_KEYS,
    "closure": _CLOSURE_KEYS,
    "scheme": _SCHEME_KEYS,
    "init": _INIT_KEYS,
    "output": _OUTPUT_KEYS,
}


@dataclass
class RunConfig:
    """Validated configuration with constructed domain objects."""

    grid: Grid
    coefs: Coefs
    mode_specs: list
    closure: ClosureSpec
    scheme: SchemeSpec
    init: dict
    output_dir: str = "out"
    snapshots: bool = False
    snapshot_every: int = 0
    seed: int = 0

    def noise_model(self) -> NoiseModel:
        return build_noise_model(self.grid, self.mode_specs, seed_stream=self.seed)

    def problem(self) -> Problem:
        return Problem(model=self.noise_model(), closure=self.closure,
                       scheme=self.scheme, coefs=self.coefs)

    def initial_state(self):
        return initial_state(self.grid, coefs=self.coefs, **self.init)

    def with_grid(self, grid: Grid) -> "RunConfig":
        """Same configuration on a different resolution (study helper)."""
        return RunConfig(grid=grid, coefs=self.coefs, mode_specs=self.mode_specs,
                         closure=self.closure, scheme=self.scheme, init=self.init,
                         output_dir=self.output_dir, snapshots=self.snapshots,
                         snapshot_every=self.snapshot_every, seed=self.seed)


def _parse_lines(text: str, errors: list) -> dict:
    """Raw section -> {key: (value, line)} with `mode` collected as a list."""
    data: dict = {None: {}}
    section = None
    for ln, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                errors.append(f"line {ln}: unknown section [{section}]")
                section = "__skip__"
            else:
                data.setdefault(section, {})
            continue
        if "=" not in line:
            errors.append(f"line {ln}: expected 'key = value', got {line!r}")
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if section == "__skip__":
            continue
        if section is None:
            if key != "seed":
                errors.append(f"line {ln}: only 'seed' may appear before a section")
                continue
            if key in data[None]:
                errors.append(f"line {ln}: duplicate key 'seed'")
                continue
            data[None][key] = (val, ln)
            continue
        allowed = _SECTIONS[section]
        if key not in allowed:
            errors.append(f"line {ln}: unknown key '{key}' in section [{section}]")
            continue
        sect = data[section]
        if key == "mode" and section == "noise":
            sect.setdefault("mode", []).append((val, ln))
        elif key in sect:
            errors.append(f"line {ln}: duplicate key '{key}' in section [{section}]")
        else:
            sect[key] = (val, ln)
    return data


def _take(sect: dict, key: str, conv, default, errors: list, where: str):
    if key not in sect:
        return default
    val, ln = sect[key]
    try:
        return conv(val)
    except (TypeError, ValueError):
        errors.append(f"line {ln}: [{where}] {key} = {val!r} is not a valid "
                      f"{conv.__name__}")
        return default


def _to_bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(s)


def _parse_mode(val: str, ln: int, errors: list):
    """'bt nx=1 ny=0 m=0 amp=0.5 [theta=0.0] [dir=psi]' -> ModeSpec."""
    parts = val.split()
    if not parts:
        errors.append(f"line {ln}: empty mode entry")
        return None
    tag = parts[0].lower()
    if tag not in ("bt", "bc"):
        errors.append(f"line {ln}: mode tag must be bt or bc, got {tag!r}")
        return None
    kw = {"nx": None, "ny": None, "m": 0 if tag == "bt" else None,
          "amp": None, "theta": 0.0, "dir": "psi"}
    for p in parts[1:]:
        if "=" not in p:
            errors.append(f"line {ln}: bad mode token {p!r}")
            return None
        k, v = p.split("=", 1)
        k = k.lower()
        if k not in kw:
            errors.append(f"line {ln}: unknown mode parameter {k!r}")
            return None
        try:
            kw[k] = v if k == "dir" else (int(v) if k in ("nx", "ny", "m") else float(v))
        except ValueError:
            errors.append(f"line {ln}: bad mode value {p!r}")
            return None
    missing = [k for k in ("nx", "ny", "m", "amp") if kw[k] is None]
    if missing:
        errors.append(f"line {ln}: mode entry missing {', '.join(missing)}")
        return None
    return ModeSpec(tag=tag, nx_w=kw["nx"], ny_w=kw["ny"], m=kw["m"],
                    amplitude=kw["amp"], theta=kw["theta"], direction=kw["dir"])


def parse_config_text(text: str) -> RunConfig:
    errors: list = []
    data = _parse_lines(text, errors)

    seed = _take(data.get(None, {}), "seed", int, 0, errors, "top level")

    gs = data.get("grid", {})
    lx = _take(gs, "lx", float, 2 * np.pi, errors, "grid")
    ly = _take(gs, "ly", float, 2 * np.pi, errors, "grid")
    h = _take(gs, "h", float, 1.0, errors, "grid")
    nx = _take(gs, "nx", int, 16, errors, "grid")
    ny = _take(gs, "ny", int, 16, errors, "grid")
    nz = _take(gs, "nz", int, 8, errors, "grid")
    dealias = _take(gs, "dealias", float, 2.0 / 3.0, errors, "grid")
    grid = None
    try:
        grid = build_grid(lx, ly, h, nx, ny, nz, dealias)
    except ValueError as exc:
        errors.append(f"[grid] {exc}")

    ps = data.get("physics", {})
    ckw = dict(
        mu_v=_take(ps, "mu_v", float, 1e-2, errors, "physics"),
        nu_v=_take(ps, "nu_v", float, 1e-2, errors, "physics"),
        mu_T=_take(ps, "mu_t", float, 1e-2, errors, "physics"),
        nu_T=_take(ps, "nu_t", float, 1e-2, errors, "physics"),
        mu_S=_take(ps, "mu_s", float, 1e-2, errors, "physics"),
        nu_S=_take(ps, "nu_s", float, 1e-2, errors, "physics"),
        f=_take(ps, "f", float, 0.0, errors, "physics"),
        g=_take(ps, "g", float, 9.81, errors, "physics"),
        rho0=_take(ps, "rho0", float, 1000.0, errors, "physics"),
        betaT=_take(ps, "beta_t", float, 2e-4, errors, "physics"),
        betaS=_take(ps, "beta_s", float, 7e-4, errors, "physics"),
        Tr=_take(ps, "t_ref", float, 0.0, errors, "physics"),
        Sr=_take(ps, "s_ref", float, 0.0, errors, "physics"),
        alphaT=_take(ps, "alpha_t", float, 0.0, errors, "physics"),
    )
    coefs = None
    try:
        coefs = Coefs(**ckw)
    except ValueError as exc:
        errors.append(f"[physics] {exc}")

    mode_specs = []
    for val, ln in data.get("noise", {}).get("mode", []):
        spec = _parse_mode(val, ln, errors)
        if spec is not None:
            mode_specs.append(spec)
    if grid is not None:
        try:
            build_noise_model(grid, mode_specs)
        except ValueError as exc:
            errors.append(f"[noise] {exc}")

    cs = data.get("closure", {})
    kind = _take(cs, "kind", str, "strong", errors, "closure").lower()
    ell = _take(cs, "ell", float, 0.0, errors, "closure")
    alpha = _take(cs, "alpha", float, 0.0, errors, "closure")
    gamma_r = _take(cs, "gamma_r", float, 1.0, errors, "closure")
    closure = None
    if kind not in CLOSURE_KINDS:
        errors.append(f"[closure] unknown kind {kind!r}; "
                      f"choose one of {', '.join(CLOSURE_KINDS)}")
    else:
        try:
            closure = ClosureSpec(kind=kind, ell=ell, alpha=alpha, gamma_r=gamma_r)
        except ValueError as exc:
            hint = ""
            if kind == EDDY_VISC and gamma_r <= 2:
                hint = " (the eddy-viscosity closure needs gamma_r > 2)"
            elif kind == ENERGY_BALANCED and gamma_r <= 1:
                hint = " (the energy-balanced closure needs gamma_r > 1)"
            errors.append(f"[closure] {exc}{hint}")

    ss = data.get("scheme", {})
    dt = _take(ss, "dt", float, 1e-3, errors, "scheme")
    t_end = _take(ss, "t_end", float, 0.1, errors, "scheme")
    out_every = _take(ss, "output_every", int, 1, errors, "scheme")
    scheme = None
    try:
        scheme = SchemeSpec(dt=dt, t_end=t_end, substeps_output=out_every)
    except ValueError as exc:
        errors.append(f"[scheme] {exc}")

    ins = data.get("init", {})
    init = dict(
        kind=_take(ins, "kind", str, "zero", errors, "init").lower(),
        component=_take(ins, "component", str, "vx", errors, "init").lower(),
        nx_w=_take(ins, "nx", int, 1, errors, "init"),
        ny_w=_take(ins, "ny", int, 0, errors, "init"),
        m=_take(ins, "m", int, 1, errors, "init"),
        amplitude=_take(ins, "amp", float, 1.0, errors, "init"),
        kmax=_take(ins, "kmax", int, 2, errors, "init"),
        mmax=_take(ins, "mmax", int, 2, errors, "init"),
        v_norm=_take(ins, "v_norm", float, 1.0, errors, "init"),
        seed=_take(ins, "ic_seed", int, 0, errors, "init"),
    )
    if init["kind"] not in ("zero", "single_mode", "random"):
        errors.append(f"[init] unknown kind {init['kind']!r}")
    if init["component"] not in ("vx", "vy", "t", "s"):
        errors.append(f"[init] unknown component {init['component']!r}")

    os_ = data.get("output", {})
    output_dir = _take(os_, "dir", str, "out", errors, "output")
    snapshots = _take(os_, "snapshots", _to_bool, False, errors, "output")
    snapshot_every = _take(os_, "snapshot_every", int, 0, errors, "output")

    if errors:
        raise ConfigError(errors)
    return RunConfig(grid=grid, coefs=coefs, mode_specs=mode_specs, closure=closure,
                     scheme=scheme, init=init, output_dir=output_dir,
                     snapshots=snapshots, snapshot_every=snapshot_every, seed=seed)


def parse_config(path) -> RunConfig:
    """Parse and fully validate; raises ConfigError listing every problem."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
