"""Config-file parsing: `key = value` lines under [section] headers.

Sections: domain, profile, initial, solver, command; the problem scalars
(lambda, pressure, resolution) sit above the first section.  Unknown keys,
unknown sections, duplicates and malformed values are rejected with
line-numbered diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .domain import (
    Affine,
    Bump,
    BumpInit,
    ConfigurationError,
    Constant,
    Interval,
    ProblemSpec,
    RadialBall,
    ScaledSteady,
    SolverControls,
    Zero,
)

__all__ = ["ConfigError", "CommandOptions", "parse_config", "DEFAULTS_HELP"]


class ConfigError(ValueError):
    """Config rejected; message carries line-numbered diagnostics."""


@dataclass
class CommandOptions:
    kind: str | None = None
    out: str | None = None
    tol: float = 1e-3
    lambdas: list = field(default_factory=list)
    pressures: list = field(default_factory=list)
    pstar: float | None = None
    run: str | None = None
    control_offset: float = 0.3


_TOP_KEYS = {"lambda", "pressure", "resolution"}
_SECTION_KEYS = {
    "domain": {"kind", "length", "radius", "dimension"},
    "profile": {"kind", "value", "base", "amplitude", "center", "width", "slope"},
    "initial": {"kind", "factor", "amplitude", "center", "width"},
    "solver": {
        "dt_max", "sigma_dt", "eps_quench", "eps_steady", "gap_margin",
        "t_max", "sample_dt", "snap_dt", "snap_gap_factor",
    },
    "command": {"kind", "out", "tol", "lambdas", "pressures", "pstar", "run",
                "control_offset"},
}

DEFAULTS_HELP = """\
config grammar: `key = value` lines; [domain], [profile], [initial],
[solver], [command] sections; lambda / pressure / resolution above the
first section.  '#' starts a comment.

defaults:
  lambda = 0.0            pressure = 0.0          resolution = 256
  [domain]   (required)   kind = interval|ball, length / radius, dimension
  [profile]  kind = constant (value=1) | bump (base, amplitude, center,
             width) | affine (base, slope)
  [initial]  kind = zero | scaled_steady (factor) | bump (amplitude,
             center, width)
  [solver]   dt_max=1e-3 sigma_dt=0.05 eps_quench=1e-3 eps_steady=1e-8
             gap_margin=0.05 t_max=10.0 snap_gap_factor=10^(1/16)
             sample_dt, snap_dt default to t_max/512 and t_max/64
  [command]  out, tol=1e-3, lambdas, pressures, pstar, run, control_offset
"""


def _err(line_no: int, msg: str) -> ConfigError:
    return ConfigError(f"line {line_no}: {msg}")


def _parse_lines(text: str):
    """Tokenize into {section: {key: (value, line)}} with validation."""
    tables: dict = {"": {}}
    section = ""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTION_KEYS:
                raise _err(i, f"unknown section [{section}]")
            tables.setdefault(section, {})
            continue
        if "=" not in line:
            raise _err(i, f"expected `key = value`, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        allowed = _TOP_KEYS if section == "" else _SECTION_KEYS[section]
        if key not in allowed:
            where = "top level" if section == "" else f"[{section}]"
            raise _err(i, f"unknown key {key!r} in {where}")
        if key in tables[section]:
            raise _err(i, f"duplicate key {key!r}")
        if not value:
            raise _err(i, f"empty value for {key!r}")
        tables[section][key] = (value, i)
    return tables


def _take(table: dict, key: str, conv, default=None, required=False, check=None):
    if key not in table:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    value, line = table.pop(key)
    try:
        parsed = conv(value)
    except (ValueError, TypeError):
        raise _err(line, f"bad value for {key!r}: {value!r}") from None
    if check is not None:
        problem = check(parsed)
        if problem:
            raise _err(line, f"invalid {key!r}: {problem}")
    return parsed


def _nonneg(v):
    return None if v >= 0 else f"{v!r} must be >= 0"


def _min_res(v):
    return None if v >= 16 else f"resolution must be >= 16, got {v!r}"


def _float_list(value: str):
    return [float(v) for v in value.split(",") if v.strip()]


def parse_config(text: str) -> tuple[ProblemSpec, CommandOptions]:
    try:
        return _parse_config(text)
    except ConfigurationError as exc:
        # constructor-level validation without a line context
        raise ConfigError(str(exc)) from None


def _parse_config(text: str) -> tuple[ProblemSpec, CommandOptions]:
    tables = _parse_lines(text)

    dom_tab = tables.get("domain")
    if not dom_tab:
        raise ConfigError("missing [domain] section")
    kind = _take(dom_tab, "kind", str, required=True)
    if kind == "interval":
        domain = Interval(length=_take(dom_tab, "length", float, 1.0))
    elif kind == "ball":
        domain = RadialBall(
            radius=_take(dom_tab, "radius", float, 1.0),
            dimension=_take(dom_tab, "dimension", int, 2),
        )
    else:
        raise ConfigError(f"unknown domain kind {kind!r} (interval | ball)")
    if dom_tab:
        k, (_, line) = next(iter(dom_tab.items()))
        raise _err(line, f"key {k!r} does not apply to domain kind {kind!r}")

    prof_tab = tables.get("profile", {})
    pkind = _take(prof_tab, "kind", str, "constant")
    if pkind == "constant":
        profile = Constant(value=_take(prof_tab, "value", float, 1.0))
    elif pkind == "bump":
        profile = Bump(
            base=_take(prof_tab, "base", float, 1.0),
            amplitude=_take(prof_tab, "amplitude", float, 1.0),
            center=_take(prof_tab, "center", float, domain.extent / 2.0),
            width=_take(prof_tab, "width", float, domain.extent / 5.0),
        )
    elif pkind == "affine":
        profile = Affine(
            base=_take(prof_tab, "base", float, 1.0),
            slope=_take(prof_tab, "slope", float, 0.0),
        )
    else:
        raise ConfigError(f"unknown profile kind {pkind!r} (constant | bump | affine)")
    if prof_tab:
        k, (_, line) = next(iter(prof_tab.items()))
        raise _err(line, f"key {k!r} does not apply to profile kind {pkind!r}")

    init_tab = tables.get("initial", {})
    ikind = _take(init_tab, "kind", str, "zero")
    if ikind == "zero":
        initial = Zero()
    elif ikind == "scaled_steady":
        initial = ScaledSteady(factor=_take(init_tab, "factor", float, 0.5))
    elif ikind == "bump":
        initial = BumpInit(
            amplitude=_take(init_tab, "amplitude", float, 0.1),
            center=_take(init_tab, "center", float, domain.extent / 2.0),
            width=_take(init_tab, "width", float, domain.extent / 5.0),
        )
    else:
        raise ConfigError(f"unknown initial kind {ikind!r} (zero | scaled_steady | bump)")
    if init_tab:
        k, (_, line) = next(iter(init_tab.items()))
        raise _err(line, f"key {k!r} does not apply to initial kind {ikind!r}")

    sol_tab = tables.get("solver", {})
    defaults = SolverControls()
    controls = SolverControls(
        dt_max=_take(sol_tab, "dt_max", float, defaults.dt_max),
        sigma_dt=_take(sol_tab, "sigma_dt", float, defaults.sigma_dt),
        eps_quench=_take(sol_tab, "eps_quench", float, defaults.eps_quench),
        eps_steady=_take(sol_tab, "eps_steady", float, defaults.eps_steady),
        gap_margin=_take(sol_tab, "gap_margin", float, defaults.gap_margin),
        t_max=_take(sol_tab, "t_max", float, defaults.t_max),
        sample_dt=_take(sol_tab, "sample_dt", float, None),
        snap_dt=_take(sol_tab, "snap_dt", float, None),
        snap_gap_factor=_take(sol_tab, "snap_gap_factor", float, defaults.snap_gap_factor),
    )

    top = tables[""]
    spec = ProblemSpec(
        domain=domain,
        resolution=_take(top, "resolution", int, 256, check=_min_res),
        profile=profile,
        lam=_take(top, "lambda", float, 0.0, check=_nonneg),
        pressure=_take(top, "pressure", float, 0.0, check=_nonneg),
        initial=initial,
        controls=controls,
    )

    cmd_tab = tables.get("command", {})
    opts = CommandOptions(
        kind=_take(cmd_tab, "kind", str, None),
        out=_take(cmd_tab, "out", str, None),
        tol=_take(cmd_tab, "tol", float, 1e-3),
        lambdas=_take(cmd_tab, "lambdas", _float_list, []),
        pressures=_take(cmd_tab, "pressures", _float_list, []),
        pstar=_take(cmd_tab, "pstar", float, None),
        run=_take(cmd_tab, "run", str, None),
        control_offset=_take(cmd_tab, "control_offset", float, 0.3),
    )
    return spec, opts
