"""Experiment configuration and result tables (CSV plus a JSON sidecar)."""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .sampling import BodySpec

EVALUATORS = ("exact", "kubota")
HULL_METHODS = ("qhull", "incremental")


@dataclass(frozen=True)
class ExperimentConfig:
    body: BodySpec
    s: int
    n_grid: tuple = (128, 256, 512, 1024, 2048, 4096, 8192)
    reps: int = 500
    seed: int = 0
    evaluator: str = "exact"
    kubota_n: int | None = None  # None: pilot-sized per level
    common_frames: bool = True
    angle_samples: int = 4000
    extra_points: int = 64
    hull_method: str = "qhull"
    threads: int | None = None  # never part of the hash
    out: str | None = None

    def __post_init__(self):
        d = self.body.d
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not 1 <= self.s <= d:
            raise ValueError(f"s must lie in [1, {d}], got {self.s}")
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be non-empty and strictly increasing")
        if grid[0] < d + 1:
            raise ValueError(f"every n must be at least d+1 = {d + 1}")
        if self.reps < 2:
            raise ValueError("reps must be at least 2")
        if self.evaluator not in EVALUATORS:
            raise ValueError(f"evaluator must be one of {EVALUATORS}, got {self.evaluator!r}")
        if self.hull_method not in HULL_METHODS:
            raise ValueError(f"hull_method must be one of {HULL_METHODS}")
        if self.kubota_n is not None and self.kubota_n < 2:
            raise ValueError("kubota_n must be at least 2")
        if self.extra_points < 1:
            raise ValueError("extra_points must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def d(self) -> int:
        return self.body.d

    def canonical(self) -> dict:
        out = asdict(self)
        out["body"] = list(self.body.semiaxes)
        out["n_grid"] = list(self.n_grid)
        out.pop("threads")
        out.pop("out")
        return out

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


@dataclass
class ExperimentTable:
    columns: tuple
    rows: list
    slope: float = math.nan
    stderr: float = math.nan
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(format_value(v) for v in r) + "\n")
        return buf.getvalue()

    def sidecar(self) -> dict:
        meta = dict(self.metadata)
        out = {
            "slope": self.slope,
            "stderr": self.stderr,
            "config_hash": meta.pop("config_hash", None),
            "seed": meta.pop("seed", None),
            "resamples": meta.pop("resamples", 0),
        }
        out.update(meta)
        return _json_safe(out)

    def write(self, path) -> tuple[Path, Path]:
        """Write the CSV to ``path`` and the sidecar next to it (``.json``)."""
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8", newline="")
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.sidecar(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path, side
