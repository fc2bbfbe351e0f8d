"""Run configuration files.

The format is a small INI dialect::

    # comment
    [model]
    gamma = 1.4
    bd = "auto"          # beta from the Bresch-Desjardins relation

    [grid]
    x_extent = [8.0, 8.0, 8.0]

Values are numbers, booleans (true/false), quoted or bare strings, or
bracketed lists of numbers.  Every error names the offending line.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError
from .grid import WEIGHT_EXPONENT_LIMIT, PhaseGrid
from .params import ModelParams, bd_beta
from .presets import PRESET_NAMES, preset_options

SCHEMA = {
    "model": {"gamma": None, "delta": None, "m": None, "alpha": None, "beta": (), "bd": (),
              "rho_inf": 0.0, "strict": True},
    "grid": {"dim": 1, "nx": None, "nxi": None, "x_extent": None, "xi_extent": None,
             "weight_p": 2.0, "weight_a": 1.0},
    "time": {"t_end": None, "cfl": 0.4, "output_every": 10, "n_steps": (), "threads": 1},
    "scenario": {"preset": None},
    "certify": {"resolution": 48, "xi_resolution": 4},
    "paths": {"output_dir": "output"},
}
REQUIRED_SECTIONS = ("model", "grid", "time", "scenario")


@dataclass
class RunConfig:
    params: ModelParams
    grid: PhaseGrid
    t_end: float
    cfl: float = 0.4
    output_every: int = 10
    n_steps: int | None = None
    threads: int = 1
    preset: str = "equilibrium"
    preset_options: dict = field(default_factory=dict)
    weight_p: float = 2.0
    weight_a: float = 1.0
    certify_resolution: int = 48
    certify_xi_resolution: int = 4
    output_dir: str = "output"
    source: str | None = None

    def semantic_dict(self) -> dict:
        """Fields that change results; output paths and thread count are excluded."""
        return {
            "params": self.params.as_dict(),
            "grid": self.grid.as_dict(),
            "time": {"t_end": self.t_end, "cfl": self.cfl, "output_every": self.output_every,
                     "n_steps": self.n_steps},
            "scenario": {"preset": self.preset, "options": dict(sorted(self.preset_options.items()))},
            "weight": {"p": self.weight_p, "a": self.weight_a},
            "certify": {"resolution": self.certify_resolution, "xi_resolution": self.certify_xi_resolution},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def scenario(self):
        from .coupled import Scenario

        return Scenario(self.params, self.grid, self.preset, dict(self.preset_options), self.t_end, self.cfl,
                        self.output_every, self.n_steps, self.threads)

    def metadata(self) -> dict:
        meta = self.semantic_dict()
        meta["config_hash"] = self.config_hash()
        return meta


def _parse_value(text: str, line: int):
    text = text.strip()
    if not text:
        raise ConfigError("missing value", line)
    if text[0] in "\"'":
        if len(text) < 2 or text[-1] != text[0]:
            raise ConfigError(f"unterminated string {text!r}", line)
        return text[1:-1]
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError(f"unterminated list {text!r}", line)
        items = [s for s in (p.strip() for p in text[1:-1].split(",")) if s]
        return [_parse_value(s, line) for s in items]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _strip_comment(raw: str) -> str:
    out, quote = [], None
    for ch in raw:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out).strip()


def read_sections(text: str) -> dict:
    """Parse into {section: {key: (value, line)}} with section header lines under "__line__"."""
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            name = line[1:-1].strip()
            if name not in SCHEMA:
                raise ConfigError(f"unknown section [{name}]", lineno)
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", lineno)
            sections[name] = {"__line__": lineno}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", lineno)
        sections[current][key] = (_parse_value(value, lineno), lineno)
    return sections


class _Section:
    def __init__(self, name, entries, last_line):
        self.name = name
        self.entries = entries
        self.line = entries.get("__line__", last_line)

    def has(self, key):
        return key in self.entries

    def line_of(self, key):
        return self.entries[key][1] if key in self.entries else self.line

    def get(self, key, kind=float):
        default = SCHEMA[self.name].get(key)
        if key not in self.entries:
            if default is None:
                raise ConfigError(f"missing required key {key!r} in [{self.name}]", self.line)
            if default == ():
                return None
            return default
        value, line = self.entries[key]
        return _coerce(value, kind, f"[{self.name}] {key}", line)


def _coerce(value, kind, what, line):
    if kind is list:
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{what} must be true or false, got {value!r}", line)
        return value
    if kind is str:
        return str(value)
    if isinstance(value, (bool, list, str)):
        raise ConfigError(f"{what} must be a number, got {value!r}", line)
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"{what} must be an integer, got {value!r}", line)
        return int(value)
    return float(value)


def _axis_values(sec: _Section, key, dim, kind=float):
    """A scalar or a per-axis list of ``dim`` numbers."""
    if not sec.has(key):
        return sec.get(key, kind)
    value, line = sec.entries[key]
    if isinstance(value, list):
        vals = [_coerce(v, kind, f"[{sec.name}] {key}", line) for v in value]
        if len(vals) != dim:
            raise ConfigError(f"[{sec.name}] {key} needs {dim} entries, got {len(vals)}", line)
        return tuple(vals)
    return _coerce(value, kind, f"[{sec.name}] {key}", line)


def parse_config_text(text: str, source: str | None = None) -> RunConfig:
    raw = read_sections(text)
    last_line = max(1, len(text.splitlines()))
    for name in REQUIRED_SECTIONS:
        if name not in raw:
            raise ConfigError(f"missing section [{name}]", last_line)
    secs = {name: _Section(name, raw.get(name, {}), last_line) for name in SCHEMA}
    for name, sec in secs.items():
        if name == "scenario":
            continue
        for key in sec.entries:
            if key != "__line__" and key not in SCHEMA[name]:
                raise ConfigError(f"unknown key {key!r} in [{name}]", sec.line_of(key))

    g = secs["grid"]
    dim = g.get("dim", int)
    if dim not in (1, 3):
        raise ConfigError(f"[grid] dim must be 1 or 3, got {dim}", g.line_of("dim"))
    try:
        grid = PhaseGrid(dim, _axis_values(g, "nx", dim, int), _axis_values(g, "nxi", dim, int),
                         _axis_values(g, "x_extent", dim), _axis_values(g, "xi_extent", dim))
    except DomainError as exc:
        raise ConfigError(str(exc), g.line) from None
    weight_p = g.get("weight_p")
    weight_a = g.get("weight_a")
    if weight_p < 2.0:
        raise ConfigError(f"[grid] weight_p must be >= 2, got {weight_p}", g.line_of("weight_p"))
    if weight_a <= 0.0:
        raise ConfigError(f"[grid] weight_a must be > 0, got {weight_a}", g.line_of("weight_a"))
    xi2 = sum(e * e for e in grid.xi_extent)
    if weight_a * xi2 >= WEIGHT_EXPONENT_LIMIT:
        raise ConfigError(f"weight overflow: weight_a * |xi_max|^2 = {weight_a * xi2:.4g} must be < "
                          f"{WEIGHT_EXPONENT_LIMIT:g}", g.line_of("weight_a") if g.has("weight_a") else g.line_of("xi_extent"))

    m = secs["model"]
    alpha = m.get("alpha")
    delta = m.get("delta")
    if m.has("bd") and m.has("beta"):
        raise ConfigError("give either beta or bd, not both", m.line_of("bd"))
    if m.has("bd"):
        mode = m.get("bd", str)
        if mode != "auto":
            raise ConfigError(f"bd must be \"auto\", got {mode!r}", m.line_of("bd"))
        try:
            beta = bd_beta(alpha, delta)
        except DomainError as exc:
            raise ConfigError(str(exc), m.line_of("bd")) from None
    elif m.has("beta"):
        beta = m.get("beta")
    else:
        raise ConfigError("missing required key 'beta' (or bd = \"auto\") in [model]", m.line)
    try:
        params = ModelParams(m.get("gamma"), delta, m.get("m"), alpha, beta, m.get("rho_inf"), dim,
                             m.get("strict", bool))
    except DomainError as exc:
        msg = str(exc)
        names = {"delta": "delta", "gamma": "gamma", "m_drag": "m", "alpha": "alpha", "rho_inf": "rho_inf",
                 "2*alpha": "beta", "theta": "delta"}
        key = next((v for k, v in names.items() if msg.startswith(k)), None)
        raise ConfigError(msg, m.line_of(key) if key else m.line) from None

    t = secs["time"]
    t_end = t.get("t_end")
    cfl = t.get("cfl")
    every = t.get("output_every", int)
    n_steps = t.get("n_steps", int)
    threads = t.get("threads", int)
    if not t_end >= 0.0:
        raise ConfigError(f"[time] t_end must be >= 0, got {t_end}", t.line_of("t_end"))
    if not 0.0 < cfl < 1.0:
        raise ConfigError(f"[time] cfl must lie in (0, 1), got {cfl}", t.line_of("cfl"))
    if every < 1:
        raise ConfigError(f"[time] output_every must be >= 1, got {every}", t.line_of("output_every"))
    if n_steps is not None and (n_steps < 1 or n_steps % every):
        raise ConfigError(f"[time] n_steps must be a positive multiple of output_every, got {n_steps}",
                          t.line_of("n_steps"))
    if threads < 1:
        raise ConfigError(f"[time] threads must be >= 1, got {threads}", t.line_of("threads"))

    s = secs["scenario"]
    preset = s.get("preset", str)
    if preset not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {preset!r}; known presets: {', '.join(PRESET_NAMES)}",
                          s.line_of("preset"))
    options = {}
    for key, entry in s.entries.items():
        if key in ("__line__", "preset"):
            continue
        value, line = entry
        options[key] = _coerce(value, float, f"[scenario] {key}", line)
        try:
            preset_options(preset, {key: options[key]})
        except DomainError as exc:
            raise ConfigError(str(exc), line) from None

    c = secs["certify"]
    resolution = c.get("resolution", int)
    xi_resolution = c.get("xi_resolution", int)
    if resolution < 4 or xi_resolution < 1:
        raise ConfigError("certify resolutions must be >= 4 (positions) and >= 1 (velocities)", c.line)
    out_dir = secs["paths"].get("output_dir", str)
    if source is not None and not os.path.isabs(out_dir):
        out_dir = os.path.join(os.path.dirname(os.path.abspath(source)), out_dir)
    return RunConfig(params, grid, t_end, cfl, every, n_steps, threads, preset, options, weight_p, weight_a,
                     resolution, xi_resolution, out_dir, source)


def parse_config(path) -> RunConfig:
    path = os.fspath(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text, source=path)
