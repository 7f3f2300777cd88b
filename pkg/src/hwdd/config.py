"""JSON run configuration, validated before any work starts."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import benchmark as bm
from .reference_plasticity import ReferenceMaterial


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MaterialConfig(_Strict):
    E: float = 3e10
    nu: float = 0.2
    H: float = 2.5e9
    sigma0: float = 3e8
    h: float = 2.0
    k: float = 0.75

    def build(self):
        return ReferenceMaterial(self.E, self.nu, self.H, self.sigma0, self.h, self.k)


class MeshConfig(_Strict):
    kind: Literal["cube", "plate", "tet", "file"] = "plate"
    path: Optional[str] = None
    order: Literal[1, 2] = 1
    # cube
    nx: int = 2
    ny: int = 2
    nz: int = 2
    lengths: tuple[float, float, float] = (1.0, 1.0, 1.0)
    # quarter plate with a hole
    a: float = 5.0
    b: float = 5.0
    c: float = 2.0
    r: float = 1.0
    n_theta: int = 4
    n_r: int = 5
    n_z: int = 2

    @model_validator(mode="after")
    def _file_needs_path(self):
        if self.kind == "file" and not self.path:
            raise ValueError("mesh kind 'file' needs a path")
        return self

    def spec(self):
        """Keyword spec for ``fem_core.generate_mesh`` (not for ``kind == 'file'``)."""
        if self.kind == "cube":
            return dict(kind="cube", nx=self.nx, ny=self.ny, nz=self.nz, lengths=self.lengths, order=self.order)
        if self.kind == "plate":
            return dict(
                kind="plate", a=self.a, b=self.b, c=self.c, r=self.r,
                n_theta=self.n_theta, n_r=self.n_r, n_z=self.n_z, order=self.order,
            )
        if self.kind == "tet":
            return dict(kind="tet", order=self.order)
        raise ValueError("file meshes have no generator spec")


class SegmentConfig(_Strict):
    u_bar: float
    p: float = 0.0
    steps: int = Field(ge=1)


class DataConfig(_Strict):
    n1: int = Field(50, ge=2)
    n2: int = Field(100, ge=2)
    n_p: int = Field(4, ge=1)
    seed: int = 0
    eps_max: float = Field(0.05, gt=0)
    yield_points: Optional[str] = None
    tensile: Optional[str] = None


class SolverConfig(_Strict):
    kind: Literal["spline", "linear", "nearest"] = "spline"
    check_fixed_point: bool = False
    fixed_point_rtol: float = 1e-9
    reference_rtol: float = 1e-8


class StudyConfig(_Strict):
    n2_values: list[int] = [10, 100, 1000, 10000]
    n_p_values: list[int] = [4]
    seeds: list[int] = [0, 1, 2]


def _default_schedule():
    return [SegmentConfig(u_bar=s.u_bar, p=s.p, steps=s.steps) for s in bm.benchmark_segments(50)]


class RunConfig(_Strict):
    material: MaterialConfig = MaterialConfig()
    mesh: MeshConfig = MeshConfig()
    schedule: list[SegmentConfig] = Field(default_factory=_default_schedule)
    data: DataConfig = DataConfig()
    solver: SolverConfig = SolverConfig()
    study: StudyConfig = StudyConfig()
    output_dir: str = "hwdd_out"

    def segments(self):
        return [bm.LoadSegment(s.u_bar, s.p, s.steps) for s in self.schedule]


def load_config(path=None):
    """Read and validate a config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    return RunConfig.model_validate(json.loads(Path(path).read_text()))
