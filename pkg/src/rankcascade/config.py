"""Pipeline configuration: YAML file -> validated dataclasses.

Unknown keys are rejected by name at every level -- a typo like `windw`
must fail loudly, not silently fall back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .fusion import DEFAULT_RRF_C
from .lexical import DEFAULT_B, DEFAULT_K1
from .corpus import DEFAULT_STRIDE, DEFAULT_WINDOW

MODES = ("sparse", "dense", "hybrid")
FUSION_METHODS = ("rrf", "union")
DEFAULT_RETRIEVAL_DEPTH = 1000


@dataclass
class BM25Config:
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B


@dataclass
class FusionStageConfig:
    method: str = "rrf"
    c: float = DEFAULT_RRF_C


@dataclass
class MonoConfig:
    depth: int = 50
    scorer: str = "builtin"
    endpoint: str | None = None


@dataclass
class DuoConfig:
    depth: int = 50
    method: str = "SYM-SUM"


@dataclass
class EnsembleConfig:
    runs: list[str] = field(default_factory=list)
    method: str = "mean"


@dataclass
class PipelineConfig:
    corpus: str
    queries: str
    tag: str = "rankcascade"
    expansions: str | None = None
    window: int = DEFAULT_WINDOW
    stride: int = DEFAULT_STRIDE
    prepend_meta: bool = True
    mode: str = "sparse"
    k_sparse: int = DEFAULT_RETRIEVAL_DEPTH
    k_dense: int = DEFAULT_RETRIEVAL_DEPTH
    passage_embeddings: str | None = None
    query_embeddings: str | None = None
    bm25: BM25Config = field(default_factory=BM25Config)
    fusion: FusionStageConfig = field(default_factory=FusionStageConfig)
    mono: MonoConfig | None = None
    duo: DuoConfig | None = None
    ensemble: EnsembleConfig | None = None
    threads: int = 1


def _require_mapping(value: Any, context: str) -> Mapping:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{context} must be a mapping, got {type(value).__name__}")
    return value


def _check_keys(mapping: Mapping, allowed: set[str], context: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(map(repr, unknown))}")


def _get_str(mapping: Mapping, key: str, context: str, default=None) -> Any:
    value = mapping.get(key, default)
    if value is not None and not isinstance(value, str):
        raise ConfigError(f"{context}.{key} must be a string")
    return value


def _get_int(mapping: Mapping, key: str, context: str, default: int,
             minimum: int = 1) -> int:
    value = mapping.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{context}.{key} must be an integer")
    if value < minimum:
        raise ConfigError(f"{context}.{key} must be >= {minimum}, got {value}")
    return value


def _get_float(mapping: Mapping, key: str, context: str,
               default: float) -> float:
    value = mapping.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context}.{key} must be a number")
    return float(value)


def _get_bool(mapping: Mapping, key: str, context: str,
              default: bool) -> bool:
    value = mapping.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"{context}.{key} must be true or false")
    return value


def config_from_mapping(raw: Mapping) -> PipelineConfig:
    _check_keys(raw, {
        "corpus", "queries", "tag", "expansions", "window", "stride",
        "prepend_meta", "mode", "k_sparse", "k_dense", "embeddings",
        "bm25", "fusion", "mono", "duo", "ensemble", "threads",
    }, "config")
    corpus = _get_str(raw, "corpus", "config")
    queries = _get_str(raw, "queries", "config")
    if not corpus:
        raise ConfigError("config.corpus is required")
    if not queries:
        raise ConfigError("config.queries is required")
    mode = _get_str(raw, "mode", "config", "sparse")
    if mode not in MODES:
        raise ConfigError(
            f"config.mode must be one of {', '.join(MODES)}, got {mode!r}")
    window = _get_int(raw, "window", "config", DEFAULT_WINDOW)
    stride = _get_int(raw, "stride", "config", DEFAULT_STRIDE)
    if stride > window:
        raise ConfigError(
            f"config.stride ({stride}) must not exceed window ({window})")

    passage_embeddings = query_embeddings = None
    if "embeddings" in raw:
        emb = _require_mapping(raw["embeddings"], "config.embeddings")
        _check_keys(emb, {"passages", "queries"}, "config.embeddings")
        passage_embeddings = _get_str(emb, "passages", "config.embeddings")
        query_embeddings = _get_str(emb, "queries", "config.embeddings")
    if mode in ("dense", "hybrid"):
        if not passage_embeddings or not query_embeddings:
            raise ConfigError(
                f"mode {mode!r} needs embeddings.passages and "
                f"embeddings.queries")

    bm25 = BM25Config()
    if "bm25" in raw:
        section = _require_mapping(raw["bm25"], "config.bm25")
        _check_keys(section, {"k1", "b"}, "config.bm25")
        bm25 = BM25Config(k1=_get_float(section, "k1", "config.bm25", DEFAULT_K1),
                          b=_get_float(section, "b", "config.bm25", DEFAULT_B))
        if bm25.k1 < 0 or not 0 <= bm25.b <= 1:
            raise ConfigError("config.bm25 needs k1 >= 0 and b in [0, 1]")

    fusion = FusionStageConfig()
    if "fusion" in raw:
        section = _require_mapping(raw["fusion"], "config.fusion")
        _check_keys(section, {"method", "c"}, "config.fusion")
        method = _get_str(section, "method", "config.fusion", "rrf")
        if method not in FUSION_METHODS:
            raise ConfigError(
                f"config.fusion.method must be one of "
                f"{', '.join(FUSION_METHODS)}, got {method!r}")
        c = _get_float(section, "c", "config.fusion", DEFAULT_RRF_C)
        if c <= 0:
            raise ConfigError(f"config.fusion.c must be > 0, got {c}")
        fusion = FusionStageConfig(method=method, c=c)

    mono = None
    if "mono" in raw:
        section = _require_mapping(raw["mono"], "config.mono")
        _check_keys(section, {"depth", "scorer", "endpoint"}, "config.mono")
        scorer = _get_str(section, "scorer", "config.mono", "builtin")
        if scorer not in ("builtin", "external"):
            raise ConfigError(
                f"config.mono.scorer must be builtin or external, "
                f"got {scorer!r}")
        endpoint = _get_str(section, "endpoint", "config.mono")
        if scorer == "external" and not endpoint:
            raise ConfigError("config.mono.scorer external needs an endpoint")
        mono = MonoConfig(depth=_get_int(section, "depth", "config.mono", 50),
                          scorer=scorer, endpoint=endpoint)

    duo = None
    if "duo" in raw:
        section = _require_mapping(raw["duo"], "config.duo")
        _check_keys(section, {"depth", "method"}, "config.duo")
        method = _get_str(section, "method", "config.duo", "SYM-SUM")
        if method not in ("SUM", "SYM-SUM"):
            raise ConfigError(
                f"config.duo.method must be SUM or SYM-SUM, got {method!r}")
        duo = DuoConfig(depth=_get_int(section, "depth", "config.duo", 50,
                                       minimum=2),
                        method=method)

    ensemble = None
    if "ensemble" in raw:
        section = _require_mapping(raw["ensemble"], "config.ensemble")
        _check_keys(section, {"runs", "method"}, "config.ensemble")
        method = _get_str(section, "method", "config.ensemble", "mean")
        if method not in ("mean", "rrf"):
            raise ConfigError(
                f"config.ensemble.method must be mean or rrf, got {method!r}")
        runs = section.get("runs", [])
        if not isinstance(runs, list) or not runs \
                or not all(isinstance(r, str) for r in runs):
            raise ConfigError(
                "config.ensemble.runs must be a non-empty list of run paths")
        ensemble = EnsembleConfig(runs=list(runs), method=method)

    config = PipelineConfig(
        corpus=corpus,
        queries=queries,
        tag=_get_str(raw, "tag", "config", "rankcascade"),
        expansions=_get_str(raw, "expansions", "config"),
        window=window,
        stride=stride,
        prepend_meta=_get_bool(raw, "prepend_meta", "config", True),
        mode=mode,
        k_sparse=_get_int(raw, "k_sparse", "config", DEFAULT_RETRIEVAL_DEPTH),
        k_dense=_get_int(raw, "k_dense", "config", DEFAULT_RETRIEVAL_DEPTH),
        passage_embeddings=passage_embeddings,
        query_embeddings=query_embeddings,
        bm25=bm25,
        fusion=fusion,
        mono=mono,
        duo=duo,
        ensemble=ensemble,
        threads=_get_int(raw, "threads", "config", 1),
    )
    _validate_depths(config)
    return config


def _validate_depths(config: PipelineConfig) -> None:
    """Enforce duo.depth <= mono.depth <= max(k_sparse, k_dense)."""
    if config.mode == "sparse":
        retrieval_depth = config.k_sparse
    elif config.mode == "dense":
        retrieval_depth = config.k_dense
    else:
        retrieval_depth = max(config.k_sparse, config.k_dense)
    if config.mono is not None and config.mono.depth > retrieval_depth:
        raise ConfigError(
            f"config.mono.depth ({config.mono.depth}) exceeds the retrieval "
            f"depth ({retrieval_depth})")
    if config.duo is not None:
        if config.mono is None:
            raise ConfigError("config.duo requires config.mono (the duo head "
                              "is drawn from the mono pool)")
        if config.duo.depth > config.mono.depth:
            raise ConfigError(
                f"config.duo.depth ({config.duo.depth}) exceeds "
                f"config.mono.depth ({config.mono.depth})")


def parse_config(path: str) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path!r}: {exc}") from None
    if raw is None:
        raise ConfigError(f"config {path!r} is empty")
    return config_from_mapping(_require_mapping(raw, "config"))
