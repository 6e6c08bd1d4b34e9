"""Run configuration: four blocks (env, algo, agent, run) loaded from TOML or
JSON, with dotted ``block.key=value`` overrides.

Every key has a default except ``env.name``. Unknown blocks or keys are
rejected with a message naming the offending field. The resolved
configuration serializes to JSON and loads back to an identical run.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agent import AgentConfig, AlgoConfig
from .envs import ENVIRONMENTS, make_env
from .exceptions import ConfigurationError

SCHEDULE_KEYS = ("epochs", "cycles_per_epoch", "episodes_per_cycle",
                 "optimization_steps_per_cycle")
AGENT_KEYS = tuple(f.name for f in fields(AgentConfig) if f.name not in SCHEDULE_KEYS)
OUTPUT_ROOT_ENV = "HINDSIGHT_OUTPUT_ROOT"


@dataclass(frozen=True)
class RunBlock:
    seed: int = 0
    epochs: int = 50
    cycles_per_epoch: int = 50
    episodes_per_cycle: int = 16
    optimization_steps_per_cycle: int = 40
    output_dir: str | None = None


@dataclass
class RunConfig:
    env: dict
    algo: AlgoConfig = field(default_factory=AlgoConfig)
    agent: dict = field(default_factory=dict)
    run: RunBlock = field(default_factory=RunBlock)

    @property
    def env_name(self) -> str:
        return self.env["name"]

    def make_env(self):
        params = {k: v for k, v in self.env.items() if k != "name"}
        return make_env(self.env_name, **params)

    def agent_config(self) -> AgentConfig:
        schedule = {k: getattr(self.run, k) for k in SCHEDULE_KEYS}
        return AgentConfig(**self.agent, **schedule)

    def to_dict(self) -> dict:
        return {"env": dict(self.env), "algo": asdict(self.algo), "agent": dict(self.agent),
                "run": asdict(self.run)}

    def write_snapshot(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


def _build_block(cls, values: dict, block: str, allowed=None):
    known = [f.name for f in fields(cls)] if allowed is None else list(allowed)
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{block}]: {', '.join(unknown)}")
    clean = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return cls(**clean)
    except TypeError as exc:
        raise ConfigurationError(f"[{block}]: {exc}") from exc


def resolve(raw: dict) -> RunConfig:
    """Validate a nested dict and fill every default."""
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a table of blocks")
    unknown = sorted(set(raw) - {"env", "algo", "agent", "run"})
    if unknown:
        raise ConfigurationError(f"unknown block(s): {', '.join(unknown)}")
    env_raw = dict(raw.get("env") or {})
    name = env_raw.pop("name", None)
    if not name:
        raise ConfigurationError("env.name is required")
    if name not in ENVIRONMENTS:
        raise ConfigurationError(f"env.name: unknown environment {name!r}; "
                                 f"expected one of {sorted(ENVIRONMENTS)}")
    env_cfg = _build_block(ENVIRONMENTS[name][1], env_raw, "env")
    env_block = {"name": name, **{k: _jsonable(v) for k, v in asdict(env_cfg).items()}}
    if name == "hand-wall" and env_block.get("wall_x") is None:
        env_block["wall_x"] = 0.45

    algo = _build_block(AlgoConfig, dict(raw.get("algo") or {}), "algo")
    agent_raw = dict(raw.get("agent") or {})
    agent = _build_block(AgentConfig, agent_raw, "agent", AGENT_KEYS)
    agent_block = {k: _jsonable(getattr(agent, k)) for k in AGENT_KEYS}
    run = _build_block(RunBlock, dict(raw.get("run") or {}), "run")
    cfg = RunConfig(env=env_block, algo=algo, agent=agent_block, run=run)
    cfg.agent_config()  # validates the merged agent and schedule values
    return cfg


def parse_value(text: str):
    """Interpret an override value as a TOML literal, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``block.key=value`` strings to a nested dict (copied)."""
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in raw.items()}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form block.key=value")
        path, value = item.split("=", 1)
        parts = path.strip().split(".")
        if len(parts) != 2 or not all(parts):
            raise ConfigurationError(f"override path {path!r} must be block.key")
        block, key = parts
        out.setdefault(block, {})
        if not isinstance(out[block], dict):
            raise ConfigurationError(f"{block} is not a block")
        out[block][key] = parse_value(value.strip())
    return out


def read_raw(path) -> dict:
    path = Path(path)
    try:
        if path.suffix == ".json":
            return json.loads(path.read_text())
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file {path} not found") from exc
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc


def load_config(path=None, overrides=()) -> RunConfig:
    raw = read_raw(path) if path is not None else {}
    return resolve(apply_overrides(raw, overrides))
