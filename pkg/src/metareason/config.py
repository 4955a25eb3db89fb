"""Run configuration: INI file plus command-line overrides.

Example file::

    [backend]
    mock = scripts/run.mock          ; or: endpoint = http://localhost:8000/v1
    model = qwen3-32b

    [budgets]
    max_depth = 4
    max_turns_per_thread = 12

    [prompt]
    mode = examples
    library = examples.dex
    default_namespace = sequential reasoning

    [run]
    corpus = corpus.jsonl
    output = runs/volleyball
    seed = 0

The API credential is read only from the environment (see ``CREDENTIAL_ENV``).
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .gateway import CREDENTIAL_ENV
from .kernel import Budgets, ConfigError, KernelOptions

BUDGET_KEYS = tuple(f.name for f in fields(Budgets))


@dataclass(frozen=True)
class RunConfig:
    mock: Path | None = None
    endpoint: str | None = None
    model: str = "default"
    budgets: Budgets = field(default_factory=Budgets)
    prompt_mode: str = "examples"
    library: Path | None = None
    default_namespace: str | None = None
    namespace: str | None = None
    corpus: Path | None = None
    output: Path | None = None
    seed: int | None = 0
    temperature: float = 0.0
    max_in_flight: int = 16

    def validate(self) -> "RunConfig":
        if (self.mock is None) == (self.endpoint is None):
            raise ConfigError("select exactly one backend: a mock script or an endpoint")
        if self.mock is not None and self.seed is None:
            raise ConfigError("a seed is required with the mock backend")
        for label, path in (("mock script", self.mock), ("example library", self.library), ("corpus", self.corpus)):
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{label} not found: {path}")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        KernelOptions(self.prompt_mode, self.default_namespace, self.temperature)
        return self

    def options(self) -> KernelOptions:
        return KernelOptions(self.prompt_mode, self.default_namespace, self.temperature)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        backend = {"model": self.model}
        if self.mock is not None:
            backend["mock"] = str(self.mock)
        if self.endpoint is not None:
            backend["endpoint"] = self.endpoint
        cp["backend"] = backend
        cp["budgets"] = {k: str(v) for k, v in asdict(self.budgets).items()}
        prompt = {"mode": self.prompt_mode}
        for key in ("library", "default_namespace", "namespace"):
            value = getattr(self, key)
            if value is not None:
                prompt[key] = str(value)
        cp["prompt"] = prompt
        run = {"seed": str(self.seed), "temperature": str(self.temperature), "max_in_flight": str(self.max_in_flight)}
        for key in ("corpus", "output"):
            value = getattr(self, key)
            if value is not None:
                run[key] = str(value)
        cp["run"] = run
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in cp[section].items()]
            lines.append("")
        return "\n".join(lines)


def _int(section, key: str, source: str) -> int:
    try:
        return int(section[key])
    except ValueError:
        raise ConfigError(f"{source}: [{section.name}] {key} must be an integer") from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    known = {"backend", "budgets", "prompt", "run"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    base = path.parent
    resolve = lambda v: (base / v) if not Path(v).is_absolute() else Path(v)
    cfg: dict = {}
    if cp.has_section("backend"):
        s = cp["backend"]
        for key in s:
            if key not in ("mock", "endpoint", "model", "api_key"):
                raise ConfigError(f"{path}: unknown key [backend] {key}")
        if "api_key" in s:
            raise ConfigError(f"{path}: credentials are not read from files; set {CREDENTIAL_ENV}")
        if "mock" in s:
            cfg["mock"] = resolve(s["mock"])
        if "endpoint" in s:
            cfg["endpoint"] = s["endpoint"]
        if "model" in s:
            cfg["model"] = s["model"]
    if cp.has_section("budgets"):
        s = cp["budgets"]
        values = {}
        for key in s:
            if key not in BUDGET_KEYS:
                raise ConfigError(f"{path}: unknown key [budgets] {key}")
            values[key] = _int(s, key, str(path))
        cfg["budgets"] = Budgets(**values)
    if cp.has_section("prompt"):
        s = cp["prompt"]
        for key in s:
            if key not in ("mode", "library", "default_namespace", "namespace"):
                raise ConfigError(f"{path}: unknown key [prompt] {key}")
        if "mode" in s:
            cfg["prompt_mode"] = s["mode"]
        if "library" in s:
            cfg["library"] = resolve(s["library"])
        for key in ("default_namespace", "namespace"):
            if key in s:
                cfg[key] = s[key]
    if cp.has_section("run"):
        s = cp["run"]
        for key in s:
            if key not in ("corpus", "output", "seed", "temperature", "max_in_flight"):
                raise ConfigError(f"{path}: unknown key [run] {key}")
        if "corpus" in s:
            cfg["corpus"] = resolve(s["corpus"])
        if "output" in s:
            cfg["output"] = resolve(s["output"])
        if "seed" in s:
            cfg["seed"] = _int(s, "seed", str(path))
        if "max_in_flight" in s:
            cfg["max_in_flight"] = _int(s, "max_in_flight", str(path))
        if "temperature" in s:
            try:
                cfg["temperature"] = float(s["temperature"])
            except ValueError:
                raise ConfigError(f"{path}: [run] temperature must be a number") from None
    return RunConfig(**cfg)


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Apply non-None overrides; budget keys go into ``budgets``."""
    budget_changes = {k: overrides.pop(k) for k in list(overrides) if k in BUDGET_KEYS and overrides[k] is not None}
    changes = {k: v for k, v in overrides.items() if v is not None}
    if changes.get("mock") is not None:
        changes["mock"] = Path(changes["mock"])
        if "endpoint" not in changes:
            changes["endpoint"] = None
    elif changes.get("endpoint") is not None:
        changes["mock"] = None
    for key in ("library", "corpus", "output"):
        if key in changes:
            changes[key] = Path(changes[key])
    config = replace(config, **changes)
    if budget_changes:
        config = replace(config, budgets=replace(config.budgets, **budget_changes))
    return config
