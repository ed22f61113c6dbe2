"""Run configuration: defaults, JSON config files, CLI overrides.

Precedence is flags > file values > defaults.  Secrets never live in the
config file: each backend entry names an environment variable holding its
bearer token (defaults derive from env_prefix, e.g. TALKGEN_WRITER_TOKEN).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .orchestrator import DEFAULT_TOPICS, PipelineOptions, PipelineVariant, RetryPolicy

DEFAULT_ENV_PREFIX = "TALKGEN"


@dataclass(frozen=True)
class BackendEndpoint:
    url: str
    model: str = ""
    token_env: str | None = None
    timeout_seconds: float = 120.0


@dataclass(frozen=True)
class RunConfig:
    pool: str = ""
    language: str = "EN"
    variant: str = "critic_loop"
    loops: int = 2
    dialogues: int = 30
    seed: int = 0
    parallelism: int = 1
    out_dir: str = "corpus"
    mock: bool = False
    prefer_related: bool = True
    temperature: float = 0.8
    min_utterances: int = 2
    max_utterances: int = 60
    participant_weights: tuple[tuple[int, float], ...] = (
        (2, 0.25), (3, 0.35), (4, 0.25), (5, 0.15))
    topics: tuple[str, ...] = ()
    gap_seconds: float = 0.3
    sample_rate: int = 22050
    critique_final: bool = False
    retry_attempts: int = 3
    retry_base_delay_seconds: float = 1.0
    retry_factor: float = 2.0
    env_prefix: str = DEFAULT_ENV_PREFIX
    writer: BackendEndpoint | None = None
    synthesizer: BackendEndpoint | None = None
    critic: BackendEndpoint | None = None
    predictor: BackendEndpoint | None = None

    def pipeline_variant(self) -> PipelineVariant:
        try:
            return PipelineVariant(mode=self.variant, loops=self.loops)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def pipeline_options(self) -> PipelineOptions:
        topics = self.topics or DEFAULT_TOPICS.get(self.language, DEFAULT_TOPICS["EN"])
        return PipelineOptions(
            language=self.language,
            topics=tuple(topics),
            participant_weights=self.participant_weights,
            prefer_related=self.prefer_related,
            temperature=self.temperature,
            min_utterances=self.min_utterances,
            max_utterances=self.max_utterances,
            gap_seconds=self.gap_seconds,
            sample_rate=self.sample_rate,
            critique_final=self.critique_final,
            retry=RetryPolicy(attempts=self.retry_attempts,
                              base_delay_seconds=self.retry_base_delay_seconds,
                              factor=self.retry_factor),
        )

    def to_dict(self) -> dict:
        def endpoint(e: BackendEndpoint | None) -> dict | None:
            if e is None:
                return None
            return {"url": e.url, "model": e.model, "token_env": e.token_env,
                    "timeout_seconds": e.timeout_seconds}

        return {
            "pool": self.pool,
            "language": self.language,
            "variant": self.variant,
            "loops": self.loops,
            "dialogues": self.dialogues,
            "seed": self.seed,
            "parallelism": self.parallelism,
            "out_dir": self.out_dir,
            "mock": self.mock,
            "prefer_related": self.prefer_related,
            "temperature": self.temperature,
            "min_utterances": self.min_utterances,
            "max_utterances": self.max_utterances,
            "participant_weights": {str(c): w for c, w in self.participant_weights},
            "topics": list(self.topics),
            "gap_seconds": self.gap_seconds,
            "sample_rate": self.sample_rate,
            "critique_final": self.critique_final,
            "retry": {"attempts": self.retry_attempts,
                      "base_delay_seconds": self.retry_base_delay_seconds,
                      "factor": self.retry_factor},
            "env_prefix": self.env_prefix,
            "backends": {
                "writer": endpoint(self.writer),
                "synthesizer": endpoint(self.synthesizer),
                "critic": endpoint(self.critic),
                "predictor": endpoint(self.predictor),
            },
        }


_SCALARS = {
    "pool": str, "language": str, "variant": str, "loops": int, "dialogues": int,
    "seed": int, "parallelism": int, "out_dir": str, "mock": bool,
    "prefer_related": bool, "temperature": (int, float), "min_utterances": int,
    "max_utterances": int, "gap_seconds": (int, float), "sample_rate": int,
    "critique_final": bool, "env_prefix": str,
}


def _parse_endpoint(name: str, raw: object, env_prefix: str) -> BackendEndpoint:
    if not isinstance(raw, dict) or "url" not in raw:
        raise ConfigError(f"backends.{name} must be an object with a 'url'")
    default_env = {
        "writer": f"{env_prefix}_WRITER_TOKEN",
        "synthesizer": f"{env_prefix}_SYNTH_TOKEN",
        "critic": f"{env_prefix}_CRITIC_TOKEN",
        "predictor": f"{env_prefix}_PREDICTOR_TOKEN",
    }[name]
    return BackendEndpoint(
        url=str(raw["url"]),
        model=str(raw.get("model", "")),
        token_env=raw.get("token_env", default_env),
        timeout_seconds=float(raw.get("timeout_seconds", 120.0)),
    )


def load_config(path: str | Path | None) -> RunConfig:
    """Build a RunConfig from defaults plus an optional JSON file."""
    config = RunConfig()
    if path is None:
        return config
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} "
                          f"(line {exc.lineno})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")

    updates: dict = {}
    for key, expected in _SCALARS.items():
        if key in raw:
            value = raw[key]
            if not isinstance(value, expected) or isinstance(value, bool) != (expected is bool):
                raise ConfigError(f"config field {key!r} has wrong type")
            updates[key] = value

    if "topics" in raw:
        if (not isinstance(raw["topics"], list)
                or not all(isinstance(t, str) for t in raw["topics"])):
            raise ConfigError("config field 'topics' must be a list of strings")
        updates["topics"] = tuple(raw["topics"])

    if "participant_weights" in raw:
        weights = raw["participant_weights"]
        if not isinstance(weights, dict):
            raise ConfigError("config field 'participant_weights' must be an object")
        try:
            updates["participant_weights"] = tuple(
                sorted((int(count), float(weight)) for count, weight in weights.items()))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad participant_weights: {exc}") from exc

    if "retry" in raw:
        retry = raw["retry"]
        if not isinstance(retry, dict):
            raise ConfigError("config field 'retry' must be an object")
        if "attempts" in retry:
            updates["retry_attempts"] = int(retry["attempts"])
        if "base_delay_seconds" in retry:
            updates["retry_base_delay_seconds"] = float(retry["base_delay_seconds"])
        if "factor" in retry:
            updates["retry_factor"] = float(retry["factor"])

    env_prefix = updates.get("env_prefix", config.env_prefix)
    if "backends" in raw:
        backends = raw["backends"]
        if not isinstance(backends, dict):
            raise ConfigError("config field 'backends' must be an object")
        for name in ("writer", "synthesizer", "critic", "predictor"):
            if backends.get(name) is not None:
                updates[name] = _parse_endpoint(name, backends[name], env_prefix)

    unknown = set(raw) - set(_SCALARS) - {"topics", "participant_weights", "retry",
                                          "backends"}
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")

    return replace(config, **updates)


def validate_config(config: RunConfig, for_generate: bool = False) -> RunConfig:
    """Cross-field checks; raises ConfigError (CLI exit code 2)."""
    if config.language not in ("CN", "EN"):
        raise ConfigError(f"language must be CN or EN, got {config.language!r}")
    if config.loops < 0:
        raise ConfigError(f"loops must be >= 0, got {config.loops}")
    if config.parallelism < 1:
        raise ConfigError(f"parallelism must be >= 1, got {config.parallelism}")
    config.pipeline_variant()
    if for_generate:
        if config.dialogues < 1:
            raise ConfigError(f"dialogues must be >= 1, got {config.dialogues}")
        if not config.pool:
            raise ConfigError("a character pool path is required (pool/--pool)")
        if not Path(config.pool).is_file():
            raise ConfigError(f"pool file does not exist: {config.pool}")
        if not config.mock:
            missing = [name for name in ("writer", "synthesizer")
                       if getattr(config, name) is None]
            if config.variant == "critic_loop" and config.loops > 0 and config.critic is None:
                missing.append("critic")
            if missing:
                raise ConfigError(
                    "non-mock generation requires backend endpoints for: "
                    + ", ".join(missing))
    return config
