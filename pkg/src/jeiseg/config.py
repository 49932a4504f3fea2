"""Segmentation configuration with the standard graph-construction defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .graphnet import GraphSpec


@dataclass(frozen=True)
class SegmentationConfig:
    k: int = 61
    node_spacing: float = 0.2
    smoothness: int = 2
    inter_surface: tuple[int, int] = (0, 20)
    inter_object: tuple[int, int] = (0, 60)
    inter_time: int = 5
    w: float = 0.5
    delta_default: float = 0.4  # nudge tolerance, 2 * node spacing
    n_nearest_default: int = 12
    column_method: str = "normal"
    inner_fraction: float = 0.5
    bone_sign: float = 1.0
    cartilage_sign1: float = -1.0
    cartilage_sign2: float = 1.0
    contact_mm: float = 5.0
    contact_angle_deg: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if self.k < 3:
            raise ValueError("k must be >= 3")
        if self.node_spacing <= 0:
            raise ValueError("node_spacing must be positive")
        if not (0.0 <= self.w <= 1.0):
            raise ValueError("w must be in [0, 1]")
        if self.delta_default <= 0 or self.n_nearest_default < 1:
            raise ValueError("invalid nudge defaults")
        if self.column_method not in ("normal", "elf"):
            raise ValueError(f"unknown column method {self.column_method!r}")
        object.__setattr__(self, "inter_surface", tuple(self.inter_surface))
        object.__setattr__(self, "inter_object", tuple(self.inter_object))

    def graph_spec(self) -> GraphSpec:
        return GraphSpec(
            smoothness=self.smoothness,
            inter_surface=self.inter_surface,
            inter_object=self.inter_object,
            inter_time=self.inter_time,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_dict(d: dict) -> "SegmentationConfig":
        base = asdict(SegmentationConfig())
        unknown = set(d) - set(base)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        base.update(d)
        return SegmentationConfig(**base)

    @staticmethod
    def from_json(text: str) -> "SegmentationConfig":
        return SegmentationConfig.from_dict(json.loads(text))
