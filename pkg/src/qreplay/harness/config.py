"""Experiment configuration: INI presets with layered overrides.

Values are JSON literals where they parse as such and plain strings
otherwise.  A preset may carry:

* ``[desk_scale]`` with dotted ``section.key`` entries applied by ``--desk-scale``;
* ``[strategy.<name>]`` sections merged into ``[replay]`` when that strategy runs.

Environment variables ``RF_OVERRIDE_<section>__<key>=<value>`` (or
``RF_OVERRIDE_<section>.<key>``) are applied last.
"""
from __future__ import annotations

import configparser
import copy
import io
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

OVERRIDE_PREFIX = "RF_OVERRIDE_"
DESK_SECTION = "desk_scale"
STRATEGY_PREFIX = "strategy."


class ConfigError(ValueError):
    pass


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip()


def format_value(value) -> str:
    if isinstance(value, str):
        # keep strings that would otherwise parse as JSON literals quoted
        return json.dumps(value) if parse_value(value) != value else value
    return json.dumps(value)


def _split_key(dotted: str) -> tuple:
    if "__" in dotted:
        section, key = dotted.split("__", 1)
    elif "." in dotted:
        section, key = dotted.rsplit(".", 1)
    else:
        raise ConfigError(f"override {dotted!r} needs a section: section.key")
    return section, key


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)
    name: str = ""

    # -- access ----------------------------------------------------------------

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"missing [{section}] {key}") from None

    def set(self, section: str, key: str, value) -> None:
        self.sections.setdefault(section, {})[key] = value

    def copy(self) -> "ExperimentConfig":
        return ExperimentConfig(copy.deepcopy(self.sections), self.name)

    @property
    def kind(self) -> str:
        return self.require("experiment", "kind")

    @property
    def strategy(self) -> str:
        return self.get("replay", "strategy", "uniform")

    # -- layering --------------------------------------------------------------

    def with_overrides(self, overrides) -> "ExperimentConfig":
        out = self.copy()
        items = overrides.items() if isinstance(overrides, dict) else overrides
        for dotted, value in items:
            section, key = _split_key(dotted)
            out.set(section, key, value)
        return out

    def desk(self) -> "ExperimentConfig":
        return self.with_overrides(self.section(DESK_SECTION))

    def with_strategy(self, strategy: str | None = None) -> "ExperimentConfig":
        out = self.copy()
        strategy = strategy or out.strategy
        out.set("replay", "strategy", strategy)
        for key, value in out.section(STRATEGY_PREFIX + strategy).items():
            out.set("replay", key, value)
        return out

    def with_env_overrides(self, environ=None) -> "ExperimentConfig":
        environ = os.environ if environ is None else environ
        pairs = [(k[len(OVERRIDE_PREFIX):], parse_value(v)) for k, v in environ.items()
                 if k.startswith(OVERRIDE_PREFIX)]
        return self.with_overrides(sorted(pairs))

    def resolved(self, desk_scale: bool = False, strategy: str | None = None,
                 environ=None) -> "ExperimentConfig":
        cfg = self.desk() if desk_scale else self.copy()
        cfg = cfg.with_strategy(strategy)
        cfg = cfg.with_env_overrides(environ)
        cfg.set("experiment", "desk_scale", bool(desk_scale))
        return cfg

    # -- text round trip -------------------------------------------------------

    def to_text(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section, values in self.sections.items():
            parser[section] = {k: format_value(v) for k, v in values.items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, name: str = "") -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        sections = {s: {k: parse_value(v) for k, v in parser[s].items()}
                    for s in parser.sections()}
        cfg = cls(sections, name or sections.get("experiment", {}).get("name", ""))
        if "experiment" not in sections or "kind" not in sections["experiment"]:
            raise ConfigError("config needs [experiment] kind")
        return cfg

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def preset_names() -> list:
    root = resources.files("qreplay.harness") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_config(name_or_path) -> ExperimentConfig:
    """A shipped preset by name, or an INI file by path."""
    path = Path(str(name_or_path))
    if path.suffix == ".ini" or path.exists():
        try:
            text = path.read_text()
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {path}: {exc}") from exc
        return ExperimentConfig.from_text(text, path.stem)
    res = resources.files("qreplay.harness") / "presets" / f"{name_or_path}.ini"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name_or_path!r}; known: {', '.join(preset_names())}")
    return ExperimentConfig.from_text(res.read_text(), str(name_or_path))


def shipped_configs(desk_scale: bool = False) -> dict:
    return {n: (load_config(n).desk() if desk_scale else load_config(n)) for n in preset_names()}
