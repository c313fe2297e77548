"""Pipeline configuration, loaded from and echoed as JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..embedding import SkipgramConfig
from ..optim import TrainConfig


@dataclass(frozen=True)
class PipelineConfig:
    d: int = 256
    steps: int = 3
    K: int = 1000
    layers: int = 2
    min_members: int = 1
    kmeans_max_iters: int = 300
    threshold: float = 0.5
    seed: int = 0
    ratios: tuple = (0.8, 0.1, 0.1)
    stratified: bool = False
    api_list: str | None = None
    baseline: bool = True
    skipgram: SkipgramConfig = field(default_factory=SkipgramConfig)
    intra: TrainConfig = field(default_factory=TrainConfig)
    hgnn: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios) or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("ratios must be three nonnegative numbers summing to 1")
        if self.steps < 1 or self.K < 1 or self.layers < 1 or self.d < 1:
            raise ValueError("d, steps, K and layers must be positive")
        if self.skipgram.d != self.d:
            object.__setattr__(self, "skipgram", replace(self.skipgram, d=self.d))
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Same settings with every stage reseeded from ``seed``."""
        return replace(
            self,
            seed=seed,
            skipgram=replace(self.skipgram, seed=seed),
            intra=replace(self.intra, seed=seed),
            hgnn=replace(self.hgnn, seed=seed),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ratios"] = list(self.ratios)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        raw = dict(raw)
        nested = {"skipgram": SkipgramConfig, "intra": TrainConfig, "hgnn": TrainConfig}
        for key, kind in nested.items():
            if key in raw:
                raw[key] = kind(**raw[key])
        if "d" in raw and "skipgram" in raw:
            raw["skipgram"] = replace(raw["skipgram"], d=raw["d"])
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))
