"""Run configuration schema.

Frequencies are given in ordinary kHz and converted to rad/s when a run is
built. Unknown keys are rejected.
"""

from __future__ import annotations

import itertools
import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError

MAX_SWEEP_FIELDS = 2
MAX_GRID = 256

Model = Literal[
    "single_mode_1drive",
    "single_mode_2drive",
    "multi_mode_2drive",
    "effective",
    "qlm",
    "gate_check",
    "ghz_scan",
]
DRIVE_MODELS = {"single_mode_1drive", "single_mode_2drive", "multi_mode_2drive", "effective", "ghz_scan"}
SINGLE_MODE_MODELS = {"single_mode_1drive", "single_mode_2drive"}

# accuracy-driven step rule for the cheap single-mode runs (see README)
SINGLE_MODE_STEPS_PER_PERIOD = 500
MULTI_MODE_STEPS_PER_PERIOD = 50


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    model: Model
    name: str | None = None

    # trap
    n_ions: int = Field(3, ge=1)
    omega_x_khz: float = 5000.0
    omega_z_khz: float = 1000.0
    omega_rec_khz: float = 26.0

    # drives
    delta_khz: float | None = None
    omega_r_khz: float | None = None
    omega_b_khz: float | None = None
    q: float = 1.3
    mirror: bool = True

    # state space and propagation
    trunc_com: int = Field(6, ge=0)
    trunc_other: int = Field(2, ge=0)
    initial_spins: str = "↓↓↓"
    t_final_ms: float | None = None
    dt_ns: float | None = None
    steps_per_period: int | None = None
    record_interval_us: float = Field(10.0, gt=0)
    average_window_ms: float | None = None
    convergence_check: bool = False

    # quantum link model
    n_stag: int = 4
    J: float = 1.0
    mu: float = 0.5
    g: float | None = None
    boundary: int = 1
    t_max: float = Field(20.0, gt=0)
    n_times: int = Field(2001, ge=2)

    # gate check
    alpha: float = 0.7

    output: str | None = None
    sweep: dict[str, list] | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.model in DRIVE_MODELS:
            for field in ("delta_khz", "omega_r_khz"):
                if getattr(self, field) is None:
                    raise ValueError(f"field '{field}' is required for model '{self.model}'")
        if self.model == "single_mode_2drive" and not self.mirror:
            raise ValueError("model 'single_mode_2drive' requires mirror=true")
        if self.sweep:
            if len(self.sweep) > MAX_SWEEP_FIELDS:
                raise ValueError(f"sweep allows at most {MAX_SWEEP_FIELDS} list-valued fields")
            for key in self.sweep:
                if key not in type(self).model_fields or key in ("sweep", "model", "name", "output"):
                    raise ValueError(f"sweep field '{key}' is not a sweepable config field")
            size = math.prod(len(v) for v in self.sweep.values())
            if size > MAX_GRID:
                raise ValueError(f"sweep grid has {size} points, cap is {MAX_GRID}")
        return self

    @property
    def label(self):
        return self.name or self.model

    @property
    def is_single_mode(self):
        return self.model in SINGLE_MODE_MODELS

    def resolved_steps_per_period(self):
        if self.steps_per_period is not None:
            return self.steps_per_period
        return SINGLE_MODE_STEPS_PER_PERIOD if self.is_single_mode else MULTI_MODE_STEPS_PER_PERIOD

    def expand(self):
        """Concrete configs of the sweep grid, in lexicographic parameter order.

        Returns a list of (params, config); params is () for a plain config.
        """
        if not self.sweep:
            return [((), self)]
        keys = sorted(self.sweep)
        values = [sorted(self.sweep[k]) for k in keys]
        out = []
        for combo in itertools.product(*values):
            params = tuple(zip(keys, combo))
            suffix = "_".join(f"{k}={_fmt(v)}" for k, v in params)
            update = dict(params, sweep=None, name=f"{self.label}_{suffix}")
            out.append((params, validate({**self.model_dump(), **update})))
        return out


def _fmt(v):
    return f"{v:g}" if isinstance(v, float) else str(v)


def validate(data):
    """Build a RunConfig, turning schema errors into ConfigError with field paths."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        parts = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            msg = err["msg"].removeprefix("Value error, ")
            parts.append(f"{loc}: {msg}")
        raise ConfigError("invalid config: " + "; ".join(parts)) from None


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a JSON object")
    return validate(data)
