"""YAML benchmark configuration.

Example::

    application: rclrp          # or bacasp
    sizes: [4, 5]               # customers (rclrp) or vessels (bacasp)
    scenarios: [4, 8]           # scenario count per instance
    seeds: [0]
    repetitions: 2              # instances per (size, scenarios, seed)
    strategies: [ISAM, SRP, ASBP]
    target_gaps: [0.0, 0.05, 0.10]
    time_limit: 60              # seconds per run
    variants: [ASBP, noLB]      # ASBP toggle combinations; ASBP alone if omitted
    output_dir: results
    workers: 1
    warehouses: 2               # rclrp only
    generator: {}               # extra keyword arguments for bacasp_generate
    sam: {}                     # extra SamConfig fields, e.g. master_backend

``variants`` is either a list of preset names or a mapping from a name to
``use_lb`` / ``use_zb`` / ``use_tl`` overrides.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from ..engine import SamConfig, Strategy

APPLICATIONS = ("rclrp", "bacasp")

VARIANT_PRESETS: dict[str, dict[str, bool]] = {
    "ASBP": {},
    "noLB": {"use_lb": False},
    "noZB": {"use_zb": False},
    "noTL": {"use_tl": False},
}
TOGGLES = ("use_lb", "use_zb", "use_tl")


@dataclass
class BenchConfig:
    application: str
    sizes: list[int]
    scenarios: list[int]
    seeds: list[int]
    strategies: list[str]
    target_gaps: list[float]
    time_limit: float
    repetitions: int = 1
    variants: dict[str, dict[str, bool]] = field(default_factory=lambda: {"ASBP": {}})
    output_dir: str = "bench_out"
    workers: int = 1
    warehouses: int = 2
    generator: dict = field(default_factory=dict)
    sam: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.application not in APPLICATIONS:
            raise ValueError(f"application must be one of {APPLICATIONS}, got {self.application!r}")
        for name in ("sizes", "scenarios", "seeds", "strategies", "target_gaps"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be a non-empty list")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.repetitions < 1 or self.workers < 1:
            raise ValueError("repetitions and workers must be at least 1")
        self.strategies = [Strategy(s).value for s in self.strategies]
        self.target_gaps = [float(g) for g in self.target_gaps]
        if isinstance(self.variants, (list, tuple)):
            unknown = [v for v in self.variants if v not in VARIANT_PRESETS]
            if unknown:
                raise ValueError(f"unknown variant presets {unknown}; known: {sorted(VARIANT_PRESETS)}")
            self.variants = {v: dict(VARIANT_PRESETS[v]) for v in self.variants}
        if not self.variants:
            raise ValueError("variants must be non-empty")
        for name, toggles in self.variants.items():
            bad = set(toggles or {}) - set(TOGGLES)
            if bad:
                raise ValueError(f"variant {name!r} sets unknown toggles {sorted(bad)}")
        known = {f.name for f in fields(SamConfig)}
        reserved = {"strategy", "target_gap", "global_time_limit", *TOGGLES}
        bad = set(self.sam) - known | set(self.sam) & reserved
        if bad:
            raise ValueError(f"sam section cannot set {sorted(bad)}")

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "BenchConfig":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a mapping at top level")
        return cls.from_dict(data)

    def runs(self):
        """Cross product of run coordinates, in canonical order."""
        for size in self.sizes:
            for n_scen in self.scenarios:
                for seed in self.seeds:
                    for rep in range(self.repetitions):
                        for gap in self.target_gaps:
                            for strategy in self.strategies:
                                if strategy == Strategy.ASBP.value:
                                    for variant, toggles in self.variants.items():
                                        yield RunSpec(self.application, size, n_scen, seed, rep, strategy,
                                                      variant, gap, dict(toggles or {}))
                                else:
                                    yield RunSpec(self.application, size, n_scen, seed, rep, strategy,
                                                  strategy, gap, {})


@dataclass(frozen=True)
class RunSpec:
    application: str
    size: int
    scenarios: int
    seed: int
    repetition: int
    strategy: str
    variant: str
    target_gap: float
    toggles: dict
