"""Analysis configuration: an INI-style file of sections and ``key = value`` lines.

Grammar::

    config   := section*
    section  := "[" name "]" NEWLINE (entry | comment | blank)*
    entry    := key ("=" | ":") value
    comment  := ("#" | ";") text

Lists are comma separated. Recognised sections and keys:

    [data]       <pair label> = <tick CSV or .mfx return cache>   (one line per pair)
    [analysis]   delta_t, stale_run, m, q, scales_per_decade, s_min, s_max,
                 scale_count, fit_range
    [basket]     pairs
    [output]     dir
    [run]        seed, jobs
    [arb]        triangles (``;``-separated ``A,B,C`` triples), threshold, min_duration
    [tails]      quantiles, excise (``;``-separated ``start_ms,end_ms`` windows)
    [surrogate]  kind, count
    [report]     pairs (two labels used for the single-pair analyses), linkage

Relative paths resolve against the directory of the config file. Command-line
flags override file values, which override the defaults below.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from mfx.errors import MfxError


class ConfigError(MfxError):
    """The configuration is missing, malformed or references absent files."""


@dataclass
class AnalysisConfig:
    data: dict = field(default_factory=dict)
    delta_t: float = 10.0
    stale_run: int = 30
    m: int = 2
    q: list = field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0])
    scales_per_decade: int = 24
    s_min: int | None = None
    s_max: int | None = None
    scale_count: int | None = None
    fit_range: tuple | None = None
    basket: list = field(default_factory=list)
    output: str = "mfx-out"
    seed: int = 0
    jobs: int = 1
    triangles: list = field(default_factory=list)
    threshold: float = 0.0
    min_duration: int = 1
    quantiles: tuple = (0.99, 0.9999)
    excise: list = field(default_factory=list)
    surrogate_kind: str = "shuffle"
    surrogate_count: int = 100
    report_pairs: list = field(default_factory=list)
    linkage: str = "average"
    # where each value came from: "default", "config" or "flag"
    sources: dict = field(default_factory=dict, repr=False, compare=False)

    def pairs(self) -> list:
        return list(self.basket) if self.basket else list(self.data)

    def canonical(self) -> dict:
        """Analysis-relevant settings; the output location is deliberately left out."""
        d = asdict(self)
        d.pop("sources")
        d.pop("output")
        d["data"] = {k: str(v) for k, v in sorted(self.data.items())}
        return d

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def set(self, name: str, value, source: str) -> None:
        setattr(self, name, value)
        self.sources[name] = source


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


_KEYS = {
    ("analysis", "delta_t"): ("delta_t", float),
    ("analysis", "stale_run"): ("stale_run", int),
    ("analysis", "m"): ("m", int),
    ("analysis", "q"): ("q", _floats),
    ("analysis", "scales_per_decade"): ("scales_per_decade", int),
    ("analysis", "s_min"): ("s_min", int),
    ("analysis", "s_max"): ("s_max", int),
    ("analysis", "scale_count"): ("scale_count", int),
    ("analysis", "fit_range"): ("fit_range", lambda t: tuple(_ints(t))),
    ("basket", "pairs"): ("basket", lambda t: [p.strip() for p in t.split(",") if p.strip()]),
    ("output", "dir"): ("output", str),
    ("run", "seed"): ("seed", int),
    ("run", "jobs"): ("jobs", int),
    ("arb", "triangles"): ("triangles", lambda t: [x.strip() for x in t.split(";") if x.strip()]),
    ("arb", "threshold"): ("threshold", float),
    ("arb", "min_duration"): ("min_duration", int),
    ("tails", "quantiles"): ("quantiles", lambda t: tuple(_floats(t))),
    ("tails", "excise"): ("excise", lambda t: [tuple(_ints(w)) for w in t.split(";") if w.strip()]),
    ("surrogate", "kind"): ("surrogate_kind", str),
    ("surrogate", "count"): ("surrogate_count", int),
    ("report", "pairs"): ("report_pairs", lambda t: [p.strip() for p in t.split(",") if p.strip()]),
    ("report", "linkage"): ("linkage", str),
}


def load(path: str | Path | None) -> AnalysisConfig:
    cfg = AnalysisConfig()
    cfg.sources = {f.name: "default" for f in fields(cfg) if f.name != "sources"}
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str  # keep pair labels as written
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base = path.parent
    for section in parser.sections():
        for key, raw in parser.items(section):
            if section == "data":
                cfg.data[key.upper()] = str((base / raw.strip()).resolve())
                cfg.sources["data"] = "config"
                continue
            spec = _KEYS.get((section, key.lower()))
            if spec is None:
                raise ConfigError(f"{path}: unknown key [{section}] {key}")
            name, conv = spec
            try:
                value = conv(raw.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for [{section}] {key}: {raw!r}") from exc
            if name == "output":
                value = str((base / value).resolve())
            cfg.set(name, value, "config")
    return cfg


def validate(cfg: AnalysisConfig, need_data: bool = True) -> None:
    """Check file references and grid parameters."""
    if need_data and not cfg.data:
        raise ConfigError("no input data configured (use [data] or --pair LABEL=PATH)")
    for label, p in cfg.data.items():
        if not Path(p).is_file():
            raise ConfigError(f"data file for {label} not found: {p}")
    for label in cfg.basket:
        if label not in cfg.data:
            raise ConfigError(f"basket pair {label} has no data entry")
    if not 1 <= cfg.m <= 5:
        raise ConfigError(f"m must be in 1..5, got {cfg.m}")
    if cfg.delta_t <= 0:
        raise ConfigError("delta_t must be positive")
    if cfg.stale_run < 1:
        raise ConfigError("stale_run must be >= 1")
    if not cfg.q:
        raise ConfigError("q grid is empty")
    if cfg.fit_range is not None and (len(cfg.fit_range) != 2 or cfg.fit_range[0] >= cfg.fit_range[1]):
        raise ConfigError(f"fit_range must be two ascending scales, got {cfg.fit_range}")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
