"""Scenario configuration: flat dotted-key text format, defaults, validation.

Grammar (one setting per line)::

    # full-line comment
    gains.kp = 150.0          # trailing comment (whitespace before '#')
    weights.d = 30.0, 20.0, 10.0

Keys are lowercase dotted identifiers from the fixed schema below; values
are numbers, bare words, or comma-separated number triples. Unknown keys,
duplicate keys, and malformed values raise :class:`ParseError` with the
line number; violated invariants (negative step size, equal gains, ...)
raise :class:`ValidationError` naming the field. An empty file yields the
built-in default scenario (the reference experiment: h = 0.01 s, T = 60 s,
vector measurements every 10th step, gains m = 100, l = 40, kp = 150).

Floats serialize via ``repr`` (shortest round-trip decimal), so
load -> serialize -> load is the identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .estimator import FilterGains


class ParseError(ValueError):
    """Malformed config text; carries the line number and field if known."""

    def __init__(self, message, line_no=None, field=None):
        self.line_no = line_no
        self.field = field
        where = []
        if line_no is not None:
            where.append(f"line {line_no}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(
            f"{message} ({', '.join(where)})" if where else message)


class ValidationError(ValueError):
    """A config field violates an invariant; carries the field name."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class IoError(OSError):
    """A file could not be read or written."""


_AXIS = (4.0 / math.sqrt(45.0), 2.0 / math.sqrt(45.0), 5.0 / math.sqrt(45.0))
_DEG = math.pi / 180.0

# key -> (attribute, kind, default); kinds: float, int, str, vec3
_SCHEMA = {
    "sim.h": ("h", "float", 0.01),
    "sim.duration": ("duration", "float", 60.0),
    "sim.rate_ratio": ("rate_ratio", "int", 10),
    "sim.truth_attitude": ("truth_attitude", "str", "eq13"),
    "sim.reproject_every": ("reproject_every", "int", 1000),
    "gains.m": ("m", "float", 100.0),
    "gains.l": ("l", "float", 40.0),
    "gains.kp": ("kp", "float", 150.0),
    "weights.d": ("d", "vec3", (30.0, 20.0, 10.0)),
    "noise.mode": ("noise_mode", "str", "rot"),
    "noise.vector_bound_deg": ("vector_bound_deg", "float", 2.4),
    "noise.gyro_bound_deg_s": ("gyro_bound_deg_s", "float", 0.97),
    "sensors.k_min": ("k_min", "int", 2),
    "sensors.k_max": ("k_max", "int", 9),
    "sensors.seed": ("seed", "int", 0),
    "truth.inertia": ("inertia", "vec3", (1.0, 1.2, 1.5)),
    "truth.torque_amp": ("torque_amp", "vec3", (0.05, 0.05, 0.05)),
    "truth.torque_freq": ("torque_freq", "vec3", (0.2, 0.3, 0.5)),
    "truth.r0_axis": ("r0_axis", "vec3", _AXIS),
    "truth.r0_angle": ("r0_angle", "float",
                       math.pi / 4.0 * math.sqrt(45.0) / 7.0),
    "truth.omega0": ("omega0", "vec3",
                     tuple(math.pi / 60.0 * c for c in (-1.2, 2.1, -1.9))),
    "init.q0_axis": ("q0_axis", "vec3", _AXIS),
    "init.q0_angle": ("q0_angle", "float",
                      math.pi / 2.5 * math.sqrt(45.0) / 7.0),
    "init.omega0_err": ("omega0_err", "vec3",
                        tuple(math.pi / 60.0 * c
                              for c in (0.001, -0.002, 0.003))),
    "batch.trials": ("trials", "int", 20),
    "batch.seed_stride": ("seed_stride", "int", 1),
    "diagnostics.defect_c": ("defect_c", "float", 600.0),
    "output.dir": ("out_dir", "str", "out"),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _, _) in _SCHEMA.items()}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario parameters; construct via load_config/default_config."""
    h: float
    duration: float
    rate_ratio: int
    truth_attitude: str
    reproject_every: int
    m: float
    l: float
    kp: float
    d: tuple
    noise_mode: str
    vector_bound_deg: float
    gyro_bound_deg_s: float
    k_min: int
    k_max: int
    seed: int
    inertia: tuple
    torque_amp: tuple
    torque_freq: tuple
    r0_axis: tuple
    r0_angle: float
    omega0: tuple
    q0_axis: tuple
    q0_angle: float
    omega0_err: tuple
    trials: int
    seed_stride: int
    defect_c: float
    out_dir: str

    @property
    def n_steps(self):
        return int(round(self.duration / self.h))

    @property
    def vector_bound_rad(self):
        return self.vector_bound_deg * _DEG

    @property
    def gyro_bound_rad(self):
        return self.gyro_bound_deg_s * _DEG

    def gains(self):
        return FilterGains(m=self.m, l=self.l, kp=self.kp, h=self.h)


def default_config():
    """The built-in reference scenario (all schema defaults)."""
    return ScenarioConfig(**{attr: default
                             for attr, _, default in _SCHEMA.values()})


def _parse_value(raw, kind, key, line_no):
    if kind == "float":
        try:
            return float(raw)
        except ValueError:
            raise ParseError(f"expected a number, got {raw!r}",
                             line_no, key) from None
    if kind == "int":
        try:
            return int(raw, 10)
        except ValueError:
            raise ParseError(f"expected an integer, got {raw!r}",
                             line_no, key) from None
    if kind == "vec3":
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 3:
            raise ParseError(f"expected three comma-separated numbers, "
                             f"got {raw!r}", line_no, key)
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ParseError(f"expected three comma-separated numbers, "
                             f"got {raw!r}", line_no, key) from None
    # bare word
    if not raw or any(ch.isspace() for ch in raw):
        raise ParseError(f"expected a single word, got {raw!r}", line_no, key)
    return raw


def _strip_comment(line):
    if line.lstrip().startswith("#"):
        return ""
    for pos, ch in enumerate(line):
        if ch == "#" and pos > 0 and line[pos - 1].isspace():
            return line[:pos]
    return line


def parse_config_text(text):
    """Parse config text into a validated :class:`ScenarioConfig`."""
    values = {}
    seen_lines = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw_line).strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", line_no)
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _SCHEMA:
            raise ParseError(f"unknown key {key!r}", line_no)
        if key in seen_lines:
            raise ParseError(
                f"duplicate key {key!r} (first set on line {seen_lines[key]})",
                line_no, key)
        seen_lines[key] = line_no
        attr, kind, _ = _SCHEMA[key]
        values[attr] = _parse_value(raw, kind, key, line_no)
    merged = {attr: values.get(attr, default)
              for attr, _, default in _SCHEMA.values()}
    return _finalize(ScenarioConfig(**merged))


def load_config(path):
    """Read and parse a config file; an empty file yields the defaults."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path!r}: {exc}") from None
    return parse_config_text(text)


def _normalize_axis(cfg, attr):
    axis = getattr(cfg, attr)
    norm = math.sqrt(sum(c * c for c in axis))
    if norm < 1e-12:
        raise ValidationError(_ATTR_TO_KEY[attr], "axis must be nonzero")
    if abs(norm - 1.0) <= 1e-12:
        return cfg
    return replace(cfg, **{attr: tuple(c / norm for c in axis)})


def _finalize(cfg):
    cfg = _normalize_axis(cfg, "r0_axis")
    cfg = _normalize_axis(cfg, "q0_axis")
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    """Raise :class:`ValidationError` on the first violated invariant."""
    def bad(attr, message):
        raise ValidationError(_ATTR_TO_KEY[attr], message)

    if cfg.h <= 0.0:
        bad("h", "step size must be positive")
    if cfg.duration <= 0.0:
        bad("duration", "duration must be positive")
    steps = cfg.duration / cfg.h
    if abs(steps - round(steps)) > 64.0 * math.ulp(max(1.0, steps)):
        bad("duration", f"duration/h = {steps!r} is not an integer "
                        "step count")
    if cfg.rate_ratio < 1:
        bad("rate_ratio", "rate ratio must be a positive integer")
    if cfg.truth_attitude not in ("eq13", "rk4"):
        bad("truth_attitude", "must be 'eq13' or 'rk4'")
    if cfg.reproject_every < 0:
        bad("reproject_every", "must be >= 0 (0 disables reprojection)")
    if cfg.m <= 0.0:
        bad("m", "must be positive")
    if cfg.l <= 0.0:
        bad("l", "must be positive")
    if abs(cfg.m - cfg.l) <= 1e-12:
        bad("l", "dissipation gain l must differ from m")
    if cfg.kp <= 0.0:
        bad("kp", "must be positive")
    if not (cfg.d[0] > cfg.d[1] > cfg.d[2] > 0.0):
        bad("d", "weights must be strictly decreasing and positive")
    if cfg.noise_mode not in ("rot", "add", "off"):
        bad("noise_mode", "must be 'rot', 'add', or 'off'")
    if cfg.vector_bound_deg < 0.0:
        bad("vector_bound_deg", "must be nonnegative")
    if cfg.gyro_bound_deg_s < 0.0:
        bad("gyro_bound_deg_s", "must be nonnegative")
    if not (2 <= cfg.k_min <= cfg.k_max):
        bad("k_min", "need 2 <= k_min <= k_max")
    if not (0 <= cfg.seed < 2 ** 64):
        bad("seed", "seed must fit in an unsigned 64-bit integer")
    if any(c <= 0.0 for c in cfg.inertia):
        bad("inertia", "inertia diagonal must be positive")
    if cfg.trials < 1:
        bad("trials", "must be at least 1")
    if cfg.seed_stride < 1:
        bad("seed_stride", "must be at least 1")
    if cfg.defect_c <= 0.0:
        bad("defect_c", "must be positive")
    if not cfg.out_dir:
        bad("out_dir", "must be nonempty")


def _format_value(value, kind):
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    if kind == "vec3":
        return ", ".join(repr(float(c)) for c in value)
    return str(value)


def serialize_config(cfg):
    """Render a config as canonical text; parses back to an equal config."""
    lines = [f"{key} = {_format_value(getattr(cfg, attr), kind)}"
             for key, (attr, kind, _) in _SCHEMA.items()]
    return "\n".join(lines) + "\n"


def config_overrides(cfg, **changes):
    """Apply attribute overrides and revalidate (for CLI flags)."""
    out = _finalize(replace(cfg, **changes))
    return out


def config_field_names():
    """All dotted keys in schema order (for docs and tests)."""
    return tuple(_SCHEMA.keys())
