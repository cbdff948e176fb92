"""Run-configuration files: a small INI-style format with strict validation.

A file is a sequence of ``[section]`` headers and ``key = value`` lines;
blank lines and lines starting with ``#`` or ``;`` are ignored.  Sections
and keys are validated against per-subcommand schemas and every complaint
carries the offending line number.  Values never silently default on a
typo: unknown sections, unknown keys, duplicates, and malformed values are
all errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .grid import INITIAL_DATA_KINDS, Grid
from .model import Params


def _float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}") from None


def _int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}") from None


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _triple(raw: str) -> tuple[float, float, float]:
    parts = [part.strip() for part in raw.split(",")]
    if len(parts) == 1:
        value = _float(parts[0])
        return (value, value, value)
    if len(parts) == 3:
        return tuple(_float(part) for part in parts)
    raise ValueError(f"expected one value or three comma-separated values, got {raw!r}")


def _float_list(raw: str) -> tuple[float, ...]:
    stripped = raw.strip()
    if not stripped:
        return ()
    return tuple(_float(part.strip()) for part in stripped.split(","))


def _string(raw: str) -> str:
    return raw.strip()


def _choice(*allowed: str):
    def convert(raw: str) -> str:
        value = raw.strip()
        if value not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}; got {raw!r}")
        return value

    return convert


def _state_spec(raw: str):
    value = raw.strip()
    if value == "auto":
        return "auto"
    return _triple(value)


_REQUIRED = object()  # sentinel default for mandatory keys

_SCHEMAS: dict[str, dict[str, tuple]] = {
    "params": {
        name: (_float, _REQUIRED)
        for name in ("d", "h", "gamma", "alpha", "theta", "m", "rho", "mu", "nu")
    },
    "grid": {
        "dim": (_int, 1),
        "n": (_int, _REQUIRED),
        "length": (_float, 16.0),
    },
    "time": {
        "t_end": (_float, _REQUIRED),
        "dt": (_float, 0.02),
        "samples": (_int, 200),
        "snapshots": (_float_list, ()),
    },
    "init": {
        "kind": (_choice(*INITIAL_DATA_KINDS), "box-random"),
        "amplitude": (_triple, (1.0, 1.0, 1.0)),
        "seed": (_int, 0),
        "width": (_float, None),
        "box_lo": (_triple, None),
        "box_hi": (_triple, None),
    },
    "region": {
        "kind": (_choice("R", "R-natural", "custom"), "R"),
        "eps": (_float, 0.05),
        "n_samples": (_int, 20),
        "seed": (_int, 0),
        "tol": (_float, 1e-8),
        "lo": (_triple, None),
        "hi": (_triple, None),
    },
    "picard": {
        "t0": (_float, _REQUIRED),
        "steps": (_int, None),
        "tol": (_float, 1e-8),
        "max_iter": (_int, 60),
        "c": (_float, 1.0),
    },
    "bifurcate": {
        "family": (_choice("e1", "e2", "fixed"), _REQUIRED),
        "h_lo": (_float, _REQUIRED),
        "h_hi": (_float, _REQUIRED),
        "state": (_state_spec, "auto"),
        "xtol": (_float, 1e-6),
        "curve_points": (_int, 41),
    },
    "dispersion": {
        "q_max": (_float, 2.0),
        "n_q": (_int, 101),
        "state": (_state_spec, "auto"),
    },
    "ode": {
        "y0": (_triple, _REQUIRED),
    },
    "output": {
        "dir": (_string, None),
        "plots": (_bool, True),
    },
}

_REQUIRED_SECTIONS = {
    "simulate": ("params", "grid", "time"),
    "picard": ("params", "grid", "picard"),
    "ode": ("params", "time", "ode"),
    "equilibria": ("params",),
    "bifurcate": ("params", "bifurcate"),
    "dispersion": ("params", "dispersion"),
    "invariant": ("params", "grid", "time", "region"),
    "absorb": ("params", "grid", "time", "region", "init"),
}

_OPTIONAL_SECTIONS = {
    "simulate": ("init", "region", "output"),
    "picard": ("init", "output"),
    "ode": ("output",),
    "equilibria": ("output",),
    "bifurcate": ("output",),
    "dispersion": ("output",),
    "invariant": ("init", "output"),
    "absorb": ("output",),
}

SUBCOMMANDS = tuple(sorted(_REQUIRED_SECTIONS))


@dataclass
class TimeSettings:
    t_end: float
    dt: float
    samples: int
    snapshots: tuple[float, ...]


@dataclass
class InitSettings:
    kind: str
    amplitude: tuple[float, float, float]
    seed: int
    width: float | None
    box_lo: tuple[float, float, float] | None
    box_hi: tuple[float, float, float] | None


@dataclass
class RegionSettings:
    kind: str
    eps: float
    n_samples: int
    seed: int
    tol: float
    lo: tuple[float, float, float] | None
    hi: tuple[float, float, float] | None


@dataclass
class PicardSettings:
    t0: float
    steps: int | None
    tol: float
    max_iter: int
    c: float


@dataclass
class BifurcateSettings:
    family: str
    h_lo: float
    h_hi: float
    state: object
    xtol: float
    curve_points: int


@dataclass
class DispersionSettings:
    q_max: float
    n_q: int
    state: object


@dataclass
class OdeSettings:
    y0: tuple[float, float, float]


@dataclass
class OutputSettings:
    dir: str | None = None
    plots: bool = True


@dataclass
class RunConfig:
    subcommand: str
    params: Params
    grid: Grid | None = None
    time: TimeSettings | None = None
    init: InitSettings | None = None
    region: RegionSettings | None = None
    picard: PicardSettings | None = None
    bifurcate: BifurcateSettings | None = None
    dispersion: DispersionSettings | None = None
    ode: OdeSettings | None = None
    output: OutputSettings = field(default_factory=OutputSettings)
    echo: dict = field(default_factory=dict)


def _collect(text: str):
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    section_lines: dict[str, int] = {}
    current: str | None = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SCHEMAS:
                raise ConfigError(
                    f"line {lineno}: unknown section [{name}]; "
                    f"expected one of {', '.join(sorted(_SCHEMAS))}"
                )
            if name in sections:
                raise ConfigError(
                    f"line {lineno}: duplicate section [{name}] (first at line {section_lines[name]})"
                )
            sections[name] = {}
            section_lines[name] = lineno
            current = name
            continue
        if "=" in line:
            if current is None:
                raise ConfigError(f"line {lineno}: key outside any [section]")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _SCHEMAS[current]:
                raise ConfigError(
                    f"line {lineno}: unknown key {key!r} in [{current}]; "
                    f"expected one of {', '.join(sorted(_SCHEMAS[current]))}"
                )
            if key in sections[current]:
                raise ConfigError(
                    f"line {lineno}: duplicate key {key!r} in [{current}] "
                    f"(first at line {sections[current][key][1]})"
                )
            sections[current][key] = (value, lineno)
            continue
        raise ConfigError(f"line {lineno}: expected 'key = value' or '[section]', got {raw_line!r}")
    return sections, section_lines


def _convert_section(name: str, entries: dict[str, tuple[str, int]], header_line: int) -> dict:
    out = {}
    for key, (converter, default) in _SCHEMAS[name].items():
        if key in entries:
            raw, lineno = entries[key]
            try:
                out[key] = converter(raw)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: [{name}] {key}: {exc}") from None
        elif default is _REQUIRED:
            raise ConfigError(f"line {header_line}: [{name}] is missing the required key {key!r}")
        else:
            out[key] = default
    return out


def parse_config_text(text: str, subcommand: str) -> RunConfig:
    if subcommand not in _REQUIRED_SECTIONS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    sections, section_lines = _collect(text)

    allowed = set(_REQUIRED_SECTIONS[subcommand]) | set(_OPTIONAL_SECTIONS[subcommand])
    for name in sections:
        if name not in allowed:
            raise ConfigError(
                f"line {section_lines[name]}: section [{name}] does not apply to "
                f"'{subcommand}' (allowed: {', '.join(sorted(allowed))})"
            )
    for name in _REQUIRED_SECTIONS[subcommand]:
        if name not in sections:
            raise ConfigError(f"'{subcommand}' requires a [{name}] section")

    values: dict[str, dict] = {}
    for name, entries in sections.items():
        values[name] = _convert_section(name, entries, section_lines[name])

    def line_of(section: str, key: str) -> str:
        entry = sections.get(section, {}).get(key)
        return f"line {entry[1]}" if entry else f"line {section_lines.get(section, 0)}"

    try:
        params = Params(**values["params"])
    except ValueError as exc:
        raise ConfigError(f"line {section_lines['params']}: [params] {exc}") from None

    grid = None
    if "grid" in values:
        try:
            grid = Grid(dim=values["grid"]["dim"], n=values["grid"]["n"], length=values["grid"]["length"])
        except ValueError as exc:
            raise ConfigError(f"line {section_lines['grid']}: [grid] {exc}") from None

    time = None
    if "time" in values:
        tv = values["time"]
        if not tv["t_end"] > 0:
            raise ConfigError(f"{line_of('time', 't_end')}: t_end must be positive")
        if not tv["dt"] > 0:
            raise ConfigError(f"{line_of('time', 'dt')}: dt must be positive")
        if tv["samples"] < 1:
            raise ConfigError(f"{line_of('time', 'samples')}: samples must be >= 1")
        time = TimeSettings(**tv)

    init = InitSettings(**values["init"]) if "init" in values else None
    if init is not None and init.kind == "box-random" and subcommand in ("simulate", "picard", "absorb"):
        if (init.box_lo is None) != (init.box_hi is None):
            raise ConfigError(
                f"{line_of('init', 'box_lo')}: box_lo and box_hi must be given together"
            )

    region = None
    if "region" in values:
        rv = values["region"]
        if rv["kind"] == "custom" and (rv["lo"] is None or rv["hi"] is None):
            raise ConfigError(
                f"{line_of('region', 'kind')}: custom regions need both 'lo' and 'hi'"
            )
        if rv["eps"] < 0:
            raise ConfigError(f"{line_of('region', 'eps')}: eps must be nonnegative")
        if rv["n_samples"] < 1:
            raise ConfigError(f"{line_of('region', 'n_samples')}: n_samples must be >= 1")
        region = RegionSettings(**rv)

    picard = None
    if "picard" in values:
        pv = values["picard"]
        if not pv["t0"] > 0:
            raise ConfigError(f"{line_of('picard', 't0')}: t0 must be positive")
        if pv["steps"] is not None and pv["steps"] < 1:
            raise ConfigError(f"{line_of('picard', 'steps')}: steps must be >= 1")
        if not pv["c"] > 0:
            raise ConfigError(f"{line_of('picard', 'c')}: c must be positive")
        picard = PicardSettings(**pv)

    bifurcate = None
    if "bifurcate" in values:
        bv = values["bifurcate"]
        if not bv["h_lo"] < bv["h_hi"]:
            raise ConfigError(f"{line_of('bifurcate', 'h_lo')}: need h_lo < h_hi")
        if not bv["xtol"] > 0:
            raise ConfigError(f"{line_of('bifurcate', 'xtol')}: xtol must be positive")
        if bv["curve_points"] < 2:
            raise ConfigError(f"{line_of('bifurcate', 'curve_points')}: curve_points must be >= 2")
        bifurcate = BifurcateSettings(**bv)

    dispersion = None
    if "dispersion" in values:
        dv = values["dispersion"]
        if not dv["q_max"] > 0:
            raise ConfigError(f"{line_of('dispersion', 'q_max')}: q_max must be positive")
        if dv["n_q"] < 2:
            raise ConfigError(f"{line_of('dispersion', 'n_q')}: n_q must be >= 2")
        dispersion = DispersionSettings(**dv)

    ode = None
    if "ode" in values:
        y0 = values["ode"]["y0"]
        if min(y0) < 0:
            raise ConfigError(f"{line_of('ode', 'y0')}: y0 must be nonnegative")
        ode = OdeSettings(y0=y0)

    output = OutputSettings(**values["output"]) if "output" in values else OutputSettings()

    echo = {
        name: {key: entries[key][0] for key in sorted(entries)}
        for name, entries in sections.items()
    }
    return RunConfig(
        subcommand=subcommand,
        params=params,
        grid=grid,
        time=time,
        init=init,
        region=region,
        picard=picard,
        bifurcate=bifurcate,
        dispersion=dispersion,
        ode=ode,
        output=output,
        echo=echo,
    )


def load_config(path, subcommand: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    return parse_config_text(text, subcommand)
