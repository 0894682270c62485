"""Run configuration: an INI document with sections system, measurement,
numerics, output and parallel.

Example::

    [system]
    mass = 1
    omega = 1
    beta_tilde = 0.1

    [measurement]
    tau = pi
    mode_index = 1
    delta_a_range = 1e-2, 1e2
    points_per_decade = 4

    [output]
    directory = out
    plots = yes

Only [measurement] is required. Every numerics key overrides the matching
``Numerics`` field.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParseError, ValidationError
from .model import MeasurementSetup, PhysicalSystem
from .sweep import Numerics

SECTIONS = ("system", "measurement", "numerics", "output", "parallel")
SYSTEM_KEYS = ("mass", "omega", "hbar", "beta", "beta_tilde")
MEASUREMENT_KEYS = ("tau", "mode_index", "delta_a", "delta_a_range", "points_per_decade")
OUTPUT_KEYS = ("directory", "profiles", "plots")
PARALLEL_KEYS = ("workers",)
NUMERICS_FIELDS = {f.name: f for f in dataclasses.fields(Numerics)}

_PI_RE = re.compile(r"^\s*(?P<coef>[0-9.eE+-]*)\s*\*?\s*pi\s*(?:/\s*(?P<den>[0-9.eE+-]+))?\s*$")


@dataclass(frozen=True)
class RunConfig:
    system: PhysicalSystem
    tau: float
    mode_index: int
    delta_as: tuple
    numerics: Numerics = field(default_factory=Numerics)
    out_dir: str = "qmonitor-out"
    profiles: str | tuple = "all"
    plots: bool = False
    parallel: int = 1

    def setups(self):
        return [MeasurementSetup(self.tau, d, self.mode_index) for d in self.delta_as]

    def profile_rows(self):
        """Row indices whose profile CSV should be written."""
        if self.profiles == "all":
            return tuple(range(len(self.delta_as)))
        if self.profiles == "none":
            return ()
        return tuple(i for i in self.profiles if i < len(self.delta_as))

    def echo(self):
        """Flat key/value rendering of the resolved configuration."""
        out = {
            "system.mass": self.system.mass,
            "system.omega": self.system.omega,
            "system.hbar": self.system.hbar,
            "system.beta": self.system.beta,
            "system.beta_tilde": self.system.beta_tilde,
            "measurement.tau": self.tau,
            "measurement.mode_index": self.mode_index,
            "measurement.delta_a": ", ".join(repr(d) for d in self.delta_as),
        }
        for name in NUMERICS_FIELDS:
            out[f"numerics.{name}"] = getattr(self.numerics, name)
        out["output.directory"] = self.out_dir
        out["output.profiles"] = (
            self.profiles if isinstance(self.profiles, str) else ", ".join(map(str, self.profiles))
        )
        out["output.plots"] = self.plots
        out["parallel.workers"] = self.parallel
        return out


def parse_number(text, *, field=None, line=None):
    """Float literal, or a multiple/fraction of pi such as ``pi``, ``2 pi``, ``pi/2``."""
    s = text.strip()
    try:
        return float(s)
    except ValueError:
        pass
    m = _PI_RE.match(s)
    if m:
        try:
            coef = float(m["coef"]) if m["coef"] else 1.0
            den = float(m["den"]) if m["den"] else 1.0
            return coef * math.pi / den
        except ValueError:
            pass
    raise ParseError(f"cannot read {text!r} as a number", field=field, line=line)


def parse_bool(text, *, field=None, line=None):
    s = text.strip().lower()
    if s in ("1", "yes", "true", "on"):
        return True
    if s in ("0", "no", "false", "off"):
        return False
    raise ParseError(f"cannot read {text!r} as a boolean", field=field, line=line)


def log_range(lo, hi, points_per_decade):
    """Log-spaced values from lo to hi, both included.

    ``points_per_decade`` counts both ends of a decade, so 11 points per
    decade over 1e-3 .. 1e2 gives 5 * 10 + 1 = 51 values.
    """
    if not (0 < lo < hi):
        raise ValidationError(f"delta_a_range needs 0 < low < high, got {lo!r}, {hi!r}")
    if points_per_decade < 2:
        raise ValidationError(f"points_per_decade must be >= 2, got {points_per_decade}")
    decades = math.log10(hi / lo)
    count = max(2, int(round(decades * (points_per_decade - 1))) + 1)
    values = np.logspace(math.log10(lo), math.log10(hi), count)
    values[0], values[-1] = lo, hi
    return tuple(float(v) for v in values)


def _line_index(text):
    """(section, key) -> 1-based line number, for error messages."""
    index = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
            index.setdefault((section, None), no)
        elif section is not None:
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            index.setdefault((section, key), no)
    return index


def _coerce_numerics(key, raw, line):
    f = NUMERICS_FIELDS[key]
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    name = f"numerics.{key}"
    if raw.strip().lower() in ("", "none", "auto") and "None" in kind:
        return None
    if kind.startswith("bool"):
        return parse_bool(raw, field=name, line=line)
    if kind.startswith("int"):
        try:
            return int(raw)
        except ValueError:
            raise ParseError(f"cannot read {raw!r} as an integer", field=name, line=line) from None
    if kind.startswith("str"):
        return raw.strip()
    return parse_number(raw, field=name, line=line)


def parse_config(text):
    """Parse and validate a run configuration document."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("content before the first [section]", line=exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError("duplicate key", field=f"{exc.section}.{exc.option}", line=exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError("duplicate section", field=exc.section, line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", line=lineno) from None
    lines = _line_index(text)

    allowed = {
        "system": SYSTEM_KEYS,
        "measurement": MEASUREMENT_KEYS,
        "numerics": tuple(NUMERICS_FIELDS),
        "output": OUTPUT_KEYS,
        "parallel": PARALLEL_KEYS,
    }
    for section in parser.sections():
        if section not in allowed:
            raise ParseError("unknown section", field=section, line=lines.get((section, None)))
        for key in parser[section]:
            if key not in allowed[section]:
                raise ParseError("unknown key", field=f"{section}.{key}", line=lines.get((section, key)))
    if not parser.has_section("measurement"):
        raise ParseError("missing required section", field="measurement")

    def get(section, key):
        if parser.has_option(section, key):
            return parser[section][key], lines.get((section, key))
        return None, None

    def number(section, key, default=None):
        raw, line = get(section, key)
        if raw is None:
            return default
        return parse_number(raw, field=f"{section}.{key}", line=line)

    # [system]
    sys_kw = {k: number("system", k) for k in ("mass", "omega", "hbar")}
    sys_kw = {k: v for k, v in sys_kw.items() if v is not None}
    beta = number("system", "beta")
    beta_tilde = number("system", "beta_tilde")
    if beta is not None and beta_tilde is not None:
        raise ParseError("give beta or beta_tilde, not both", field="system.beta_tilde",
                         line=lines.get(("system", "beta_tilde")))
    try:
        if beta_tilde is not None:
            system = PhysicalSystem.from_beta_tilde(beta_tilde, **sys_kw)
        else:
            system = PhysicalSystem(beta=beta or 0.0, **sys_kw)
    except ValidationError as exc:
        raise ValidationError(f"[system] {exc}") from None

    # [measurement]
    tau = number("measurement", "tau")
    if tau is None:
        raise ParseError("missing required key", field="measurement.tau")
    raw_n, line_n = get("measurement", "mode_index")
    try:
        mode_index = int(raw_n) if raw_n is not None else 1
    except ValueError:
        raise ParseError(f"cannot read {raw_n!r} as an integer", field="measurement.mode_index",
                         line=line_n) from None

    raw_list, line_list = get("measurement", "delta_a")
    raw_range, line_range = get("measurement", "delta_a_range")
    if (raw_list is None) == (raw_range is None):
        raise ParseError("give exactly one of delta_a and delta_a_range", field="measurement.delta_a")
    if raw_list is not None:
        parts = [p for p in raw_list.replace(",", " ").split() if p]
        delta_as = [parse_number(p, field="measurement.delta_a", line=line_list) for p in parts]
        if not delta_as:
            raise ParseError("empty list", field="measurement.delta_a", line=line_list)
    else:
        parts = [p for p in raw_range.replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ParseError("expected 'low, high'", field="measurement.delta_a_range", line=line_range)
        lo, hi = (parse_number(p, field="measurement.delta_a_range", line=line_range) for p in parts)
        ppd = number("measurement", "points_per_decade", 11.0)
        if ppd != int(ppd):
            raise ValidationError(f"[measurement] points_per_decade must be an integer, got {ppd!r}")
        delta_as = log_range(lo, hi, int(ppd))
    if any(not (d > 0) for d in delta_as):
        raise ValidationError("[measurement] delta_a values must be positive")
    delta_as = tuple(sorted(set(float(d) for d in delta_as)))
    try:
        for d in delta_as:
            MeasurementSetup(tau, d, mode_index)
    except ValidationError as exc:
        raise ValidationError(f"[measurement] {exc}") from None

    # [numerics]
    overrides = {}
    if parser.has_section("numerics"):
        for key, raw in parser["numerics"].items():
            overrides[key] = _coerce_numerics(key, raw, lines.get(("numerics", key)))
    try:
        numerics = Numerics(**overrides)
    except TypeError as exc:
        raise ParseError(str(exc), field="numerics") from None
    _validate_numerics(numerics)

    # [output]
    raw_dir, _ = get("output", "directory")
    out_dir = raw_dir.strip() if raw_dir else RunConfig.out_dir
    raw_plots, line_plots = get("output", "plots")
    plots = parse_bool(raw_plots, field="output.plots", line=line_plots) if raw_plots else False
    raw_prof, line_prof = get("output", "profiles")
    profiles = "all"
    if raw_prof is not None:
        s = raw_prof.strip().lower()
        if s in ("all", "none"):
            profiles = s
        else:
            try:
                profiles = tuple(sorted({int(p) for p in s.replace(",", " ").split()}))
            except ValueError:
                raise ParseError("expected all, none or row indices", field="output.profiles",
                                 line=line_prof) from None

    # [parallel]
    raw_w, line_w = get("parallel", "workers")
    try:
        workers = int(raw_w) if raw_w is not None else 1
    except ValueError:
        raise ParseError(f"cannot read {raw_w!r} as an integer", field="parallel.workers", line=line_w) from None
    if workers < 1:
        raise ValidationError(f"[parallel] workers must be >= 1, got {workers}")

    return RunConfig(
        system=system,
        tau=tau,
        mode_index=mode_index,
        delta_as=delta_as,
        numerics=numerics,
        out_dir=out_dir,
        profiles=profiles,
        plots=plots,
        parallel=workers,
    )


def _validate_numerics(n):
    def bad(name, why):
        raise ValidationError(f"[numerics] {name} {why}")

    if n.eps_count < 3 or n.eps_count % 2 == 0:
        bad("eps_count", f"must be odd and >= 3, got {n.eps_count}")
    for name in ("eps_factor", "tail_tol", "omega_dt", "rate_dt", "modes_per_width"):
        v = getattr(n, name)
        if not (math.isfinite(v) and v > 0):
            bad(name, f"must be finite and positive, got {v!r}")
    for name in ("half_width", "dx"):
        v = getattr(n, name)
        if v is not None and not (math.isfinite(v) and v > 0):
            bad(name, f"must be finite and positive, got {v!r}")
    if n.refine < 1:
        bad("refine", f"must be >= 1, got {n.refine}")
    if n.num_steps is not None and n.num_steps < 1:
        bad("num_steps", f"must be >= 1, got {n.num_steps}")
    if n.max_doublings < 0 or n.max_retries < 0:
        bad("max_doublings" if n.max_doublings < 0 else "max_retries", "must be >= 0")
    if n.method not in ("split", "cayley"):
        bad("method", f"must be split or cayley, got {n.method!r}")
    if n.kinetic not in ("spectral", "fd3"):
        bad("kinetic", f"must be spectral or fd3, got {n.kinetic!r}")
    if n.method == "cayley" and n.kinetic != "fd3":
        bad("kinetic", "must be fd3 with the cayley method")
    if n.frame is not None and not (0.0 <= n.frame <= 1.0):
        bad("frame", f"must lie in [0, 1], got {n.frame!r}")


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)
