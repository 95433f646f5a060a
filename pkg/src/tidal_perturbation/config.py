"""Strict JSON experiment configuration."""
from __future__ import annotations

import hashlib
import json
import math
import os
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import fields as fieldmod
from .errors import DomainError
from .full_solver import InitialData
from .spectral import TorusGrid

DEFAULT_EPS = [1 / 10, 1 / 20, 1 / 40, 1 / 80]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    nx: int = 64
    ny: int = 64
    Lx: float = 2 * math.pi
    Ly: float = 2 * math.pi

    def build(self):
        return TorusGrid(self.nx, self.ny, self.Lx, self.Ly)


class InitialSpec(_Strict):
    iota_amp: float = 0.5
    stream_amp: float = 0.5
    compressible: float = 0.1
    width: float = Field(2.0, gt=0)
    iota_center: tuple[float, float] = (3.0, 3.0)
    stream_center: tuple[float, float] = (3.5, 2.5)
    potential_center: tuple[float, float] = (2.5, 3.5)

    def build(self):
        return InitialData(**self.model_dump())


class Mode(_Strict):
    """``a cos(kx x1 + ky x2) + b sin(kx x1 + ky x2)``."""

    a: float = 0.0
    b: float = 0.0
    kx: int = 0
    ky: int = 0


class PsiSpec(_Strict):
    """Either a scalar ``phi`` (expanded to ``(phi, -d2 phi, d1 phi)``) or all three components of ``psi``."""

    phi: Optional[list[Mode]] = None
    psi: Optional[tuple[list[Mode], list[Mode], list[Mode]]] = None
    envelope: Literal["bump", "none"] = "bump"

    @model_validator(mode="after")
    def _one_form(self):
        if (self.phi is None) == (self.psi is None):
            raise ValueError("give exactly one of 'phi' or 'psi'")
        return self


def default_test_functions():
    return [
        PsiSpec(phi=[Mode(a=1.0, kx=1)]),
        PsiSpec(phi=[Mode(b=1.0, ky=1)]),
        PsiSpec(phi=[Mode(a=1.0, kx=1, ky=1)]),
        PsiSpec(phi=[Mode(b=1.0, kx=1, ky=-1)]),
        PsiSpec(phi=[Mode(b=0.5, kx=1, ky=1), Mode(b=-0.5, kx=1, ky=-1)]),
    ]


class ExperimentConfig(_Strict):
    grid: GridSpec = GridSpec()
    scenario: Union[Literal["default", "calm"], str, dict] = "default"
    initial: InitialSpec = InitialSpec()
    eps: list[float] = Field(default_factory=lambda: list(DEFAULT_EPS))
    T: float = 0.5
    test_functions: list[PsiSpec] = Field(default_factory=default_test_functions)
    init_variant: Literal["literal", "curl", "both"] = "both"
    safety: float = Field(0.5, gt=0, le=1)
    output_stride: int = Field(10, ge=1)
    output_dir: str = "runs"
    workers: int = Field(1, ge=1)

    @field_validator("eps")
    @classmethod
    def _eps_decreasing(cls, v):
        if not v:
            raise ValueError("eps list must not be empty")
        for e in v:
            if not 0 < e < 1:
                raise ValueError(f"every eps must lie in (0, 1), got {e}")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("eps list must be strictly decreasing")
        return v

    @field_validator("T")
    @classmethod
    def _T_positive(cls, v):
        if not v > 0:
            raise ValueError("T must be positive")
        return v

    def canonical(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self, *extra):
        h = hashlib.sha256(self.canonical().encode())
        for e in extra:
            h.update(b"\0" + str(e).encode())
        return h.hexdigest()[:12]


def load_config(path=None, **overrides):
    """Read and validate a config file; raises :class:`DomainError` on any problem."""
    data = {}
    base = os.getcwd()
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DomainError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise DomainError("config must be a JSON object")
        base = os.path.dirname(os.path.abspath(path))
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise DomainError(f"invalid config: {exc}") from None
    scen = cfg.scenario
    if isinstance(scen, str) and scen not in ("default", "calm") and not os.path.isabs(scen):
        cfg = cfg.model_copy(update={"scenario": os.path.join(base, scen)})
    return cfg


def build_scenario(spec):
    if spec == "default":
        return fieldmod.default_scenario()
    if spec == "calm":
        return fieldmod.Scenario()
    try:
        if isinstance(spec, dict):
            return fieldmod.Scenario.from_dict(spec)
        return fieldmod.load(spec)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DomainError(f"cannot load scenario: {exc}") from None
