"""Pipeline configuration: YAML/JSON file, flag overrides, fingerprint.

Example config file::

    lang: de
    tokenization: {zh: char}
    n_samples: 8
    bleu: {max_ngram_order: 4, smoothing: exp}
    filter: {lo: 20, hi: 80}
    backend: {kind: http, endpoint: http://localhost:8080/translate, max_attempts: 3}
    semsim: {endpoint: http://localhost:8081/embed, batch_size: 32}
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import yaml

from .gateway import BackendDescriptor
from .metrics import BleuConfig
from .selection import FilterRange
from .textnorm import MODES, default_mode


@dataclass(frozen=True)
class SemsimConfig:
    endpoint: str | None = None
    batch_size: int = 32
    timeout_ms: int = 60_000
    max_attempts: int = 3
    max_in_flight: int = 4


@dataclass(frozen=True)
class PipelineConfig:
    lang: str = "en"
    source_lang: str = "en"
    mode: str | None = None
    tokenization: dict[str, str] = field(default_factory=dict)
    bleu: BleuConfig = BleuConfig()
    filter: FilterRange | None = None
    backend: BackendDescriptor = BackendDescriptor()
    semsim: SemsimConfig = SemsimConfig()
    n_samples: int = 8
    beam_size: int | None = None
    seed: int = 0
    workers: int | None = None
    checkpoint_every: int = 1000

    def __post_init__(self):
        for m in [self.mode, *self.tokenization.values()]:
            if m is not None and m not in MODES:
                raise ValueError(f"unknown tokenization mode {m!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def mode_for(self, language: str | None = None) -> str:
        """Explicit ``mode`` wins, then the per-language table, then the default."""
        if self.mode:
            return self.mode
        lang = language or self.lang
        if lang in self.tokenization:
            return self.tokenization[lang]
        primary = (lang or "").split("-")[0]
        return self.tokenization.get(primary, default_mode(lang))

    def scoring_dict(self) -> dict[str, Any]:
        """Settings that change output scores or selection; nothing else."""
        return {
            "lang": self.lang,
            "mode": self.mode_for(),
            "bleu": asdict(self.bleu),
            "filter": asdict(self.filter) if self.filter else None,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }

    def fingerprint(self) -> str:
        canonical = json.dumps(self.scoring_dict(), sort_keys=True, separators=(",", ":"))
        return "cfg:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["backend"].pop("token", None)
        return d


def _build(cls, data: dict | None, where: str):
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ValueError(f"config section {where!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown key(s) in {where!r}: {sorted(unknown)}")
    return cls(**data)


def from_dict(data: dict[str, Any]) -> PipelineConfig:
    data = dict(data)
    sections = {
        "bleu": BleuConfig,
        "filter": FilterRange,
        "backend": BackendDescriptor,
        "semsim": SemsimConfig,
    }
    kwargs: dict[str, Any] = {}
    for key, cls in sections.items():
        if key in data:
            kwargs[key] = _build(cls, data.pop(key), key)
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config key(s): {sorted(unknown)}")
    kwargs.update(data)
    return PipelineConfig(**kwargs)


def load(path: str | os.PathLike | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return from_dict(data)


def override(cfg: PipelineConfig, **changes: Any) -> PipelineConfig:
    """Apply non-None flag values; dotted keys reach into sections."""
    top: dict[str, Any] = {}
    nested: dict[str, dict[str, Any]] = {}
    for key, value in changes.items():
        if value is None:
            continue
        if "." in key:
            section, sub = key.split(".", 1)
            nested.setdefault(section, {})[sub] = value
        else:
            top[key] = value
    for section, sub in nested.items():
        current = getattr(cfg, section)
        if current is None and section == "filter":
            current = FilterRange()
        top[section] = replace(current, **sub)
    return replace(cfg, **top) if top else cfg
