"""Experiment configuration: an INI file with a fixed schema.

Unknown sections or keys are errors, and every diagnostic names the line it
refers to.
"""
from __future__ import annotations

import configparser
import os
import re
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigurationError

KINDS = ("deterministic", "homogeneous", "full", "variance-suite", "tail-check")

# section -> key -> (field name, parser)
_SCHEMA = {
    "experiment": {
        "kind": ("kind", str),
        "seed": ("seed", int),
        "output": ("output", str),
        "workers": ("workers", int),
    },
    "model": {
        "epsilon": ("epsilon", float),
        "sigma": ("sigma", float),
        "T": ("T", float),
    },
    "discretization": {
        "d_list": ("d_list", "int_list"),
        "K": ("K", int),
        "M": ("M", int),
        "replications": ("replications", int),
    },
    "lab": {
        "refine": ("refine", int),
        "monotone_seeds": ("monotone_seeds", int),
        "slack": ("slack", float),
        "variance_replications": ("variance_replications", int),
        "tail_replications": ("tail_replications", int),
        "tail_d": ("tail_d", int),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "full"
    epsilon: float = 1.0
    sigma: float = 1.0
    T: float = 1.0
    d_list: tuple = (16, 32, 64, 128)
    K: int = 512
    M: int = 4096
    replications: int = 256
    seed: int = 0
    output: str = "results"
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    refine: int = 4
    monotone_seeds: int = 100
    slack: float = 0.1
    variance_replications: int = 2000
    tail_replications: int = 10_000
    tail_d: int = 32

    def to_ini(self) -> str:
        """Resolved configuration in the same format it is read from."""
        values = asdict(self)
        lines = []
        for section, keys in _SCHEMA.items():
            lines.append(f"[{section}]")
            for key, (name, _) in keys.items():
                value = values[name]
                if isinstance(value, tuple):
                    value = ", ".join(str(x) for x in value)
                elif isinstance(value, float):
                    value = repr(value)
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)


def _line_index(text: str) -> dict:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    index = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:]+)[=:]", line)
        if m and section is not None:
            index.setdefault((section, m.group(1).strip()), no)
    return index


def _fail(source: str, line, message: str):
    where = f"{source}:{line}" if line else source
    raise ConfigurationError(f"{where}: {message}")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (T, K, M)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        _fail(source, lineno, f"cannot parse configuration: {exc.message if hasattr(exc, 'message') else exc}")
    lines = _line_index(text)
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            _fail(source, lines.get((section, None)), f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                _fail(source, lines.get((section, key)), f"unknown key '{key}' in [{section}]")
            name, kind = _SCHEMA[section][key]
            try:
                if kind == "int_list":
                    value = tuple(int(x) for x in raw.replace(",", " ").split())
                else:
                    value = kind(raw.strip())
            except ValueError:
                _fail(source, lines.get((section, key)), f"invalid value for '{key}': {raw!r}")
            values[name] = (value, lines.get((section, key)))
    config = ExperimentConfig(**{k: v for k, (v, _) in values.items()})
    validate(config, source, {k: line for k, (_, line) in values.items()})
    return config


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read configuration ({exc.strerror})") from exc
    return parse_config(text, source=str(path))


def validate(config: ExperimentConfig, source: str = "<config>", lines: dict | None = None) -> None:
    lines = lines or {}

    def check(ok: bool, name: str, message: str):
        if not ok:
            _fail(source, lines.get(name), message)

    check(config.kind in KINDS, "kind", f"kind must be one of {', '.join(KINDS)}; got {config.kind!r}")
    check(config.epsilon >= 0, "epsilon", "epsilon must be >= 0")
    check(config.sigma >= 0, "sigma", "sigma must be >= 0")
    check(config.T > 0, "T", "T must be > 0")
    check(len(config.d_list) > 0, "d_list", "d_list must not be empty")
    check(all(d >= 2 for d in config.d_list), "d_list", "every d must be >= 2")
    check(
        all(a < b for a, b in zip(config.d_list, config.d_list[1:])),
        "d_list",
        "d_list must be strictly ascending",
    )
    check(config.K >= max(config.d_list, default=0), "K", "K must be >= max(d_list)")
    check(config.M >= 1, "M", "M must be >= 1")
    check(config.replications >= 2, "replications", "replications must be >= 2")
    check(config.seed >= 0 and config.seed < 2**64, "seed", "seed must be an unsigned 64-bit integer")
    check(config.workers >= 1, "workers", "workers must be >= 1")
    check(config.refine >= 1, "refine", "refine must be >= 1")
    check(config.monotone_seeds >= 1, "monotone_seeds", "monotone_seeds must be >= 1")
    check(config.slack >= 0, "slack", "slack must be >= 0")
    check(config.tail_d >= 2, "tail_d", "tail_d must be >= 2")
    check(config.tail_replications >= 100, "tail_replications", "tail_replications must be >= 100")
    if config.kind in ("homogeneous", "full", "variance-suite"):
        check(
            config.variance_replications >= 1000,
            "variance_replications",
            f"variance suite needs >= 1000 replications, got {config.variance_replications}",
        )


def with_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    clean = {k: v for k, v in overrides.items() if v is not None and k in known}
    updated = replace(config, **clean)
    validate(updated)
    return updated
