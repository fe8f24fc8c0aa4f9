#!/usr/bin/env python3
"""
Typed records shared by the calculations and the command line:
the reconstruction config, file metadata and run reports.
"""

import os
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

METHODS_3D = ("exterior3d", "interior3d-volterra", "interior3d-residue", "halftime", "fr-xcheck")
METHODS_2D = ("exterior2d", "iterative2d", "halftime")
FORMAT_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class GridSettings(_Section):
    dimension: Literal[2, 3] = 3
    dt: float = Field(2e-3, gt=0)
    T: float = Field(2.2, gt=0)
    n_theta: int = Field(0, ge=0)  # 0: nmax + 2
    n_phi: int = Field(0, ge=0)  # 0: 2 * nmax + 4
    n_r: int = Field(24, gt=1)


class ReconSettings(_Section):
    nmax: int = Field(12, ge=0)
    method: str = "exterior3d"
    volterra_path: Literal["direct", "resolvent"] = "direct"
    n_iter: int = Field(3, gt=0)
    residue_terms: int = Field(32, gt=0)


class QuadSettings(_Section):
    sphere: int = Field(0, ge=0)  # 0: 2 * nmax + 4 polar nodes
    disc: int = Field(64, gt=0)
    shell: int = Field(96, gt=3)
    mean: int = Field(96, gt=0)
    psi: int = Field(48, gt=0)
    alpha: int = Field(64, gt=0)
    bromwich_nodes: int = Field(20000, gt=10)
    bromwich_height: float = Field(200.0, gt=0)
    bromwich_sigma: float = Field(1.0, gt=0)


class DiffSettings(_Section):
    h_t: Optional[float] = Field(None, gt=0)  # None: dt / 4


class TolSettings(_Section):
    multiplicity: float = Field(1e-8, gt=0)
    coincidence: float = Field(1e-8, gt=0)
    residue_tail: float = Field(1e-4, gt=0)
    divergence_window: int = Field(3, gt=1)
    consistency: float = Field(0.25, gt=0)
    locality: float = Field(1e-9, ge=0)


class PhantomSettings(_Section):
    name: str = "bump"
    component: Literal["a", "b"] = "a"
    center: List[float] = [0.3, 0.0, 0.0]
    radius: float = Field(0.5, gt=0)
    power: int = Field(3, ge=1)
    width: float = Field(0.2, gt=0)
    seed: int = 0
    n_bumps: int = Field(3, gt=0)
    band: int = Field(3, ge=0)


class RunSettings(_Section):
    workers: int = Field(0, ge=0)  # 0: machine parallelism
    progress: bool = True


class ReconConfig(_Section):
    grid: GridSettings = GridSettings()
    recon: ReconSettings = ReconSettings()
    quad: QuadSettings = QuadSettings()
    diff: DiffSettings = DiffSettings()
    tol: TolSettings = TolSettings()
    phantom: PhantomSettings = PhantomSettings()
    run: RunSettings = RunSettings()

    @model_validator(mode="after")
    def check_method(self):
        allowed = METHODS_3D if self.grid.dimension == 3 else METHODS_2D
        if self.recon.method not in allowed:
            raise ValueError(
                f"method {self.recon.method!r} is not valid for dimension "
                f"{self.grid.dimension}; choose one of {', '.join(allowed)}"
            )
        if len(self.phantom.center) != self.grid.dimension:
            raise ValueError(f"phantom.center needs {self.grid.dimension} coordinates")
        return self

    @classmethod
    def defaults(cls, dimension: int = 3) -> "ReconConfig":
        if dimension == 2:
            return cls(
                grid=GridSettings(dimension=2, dt=5e-3, T=6.0),
                recon=ReconSettings(nmax=8, method="iterative2d"),
                phantom=PhantomSettings(center=[0.3, 0.0]),
            )
        return cls()

    # derived sizes

    @property
    def h_t(self) -> float:
        return self.diff.h_t if self.diff.h_t is not None else self.grid.dt / 4.0

    @property
    def n_theta(self) -> int:
        return self.grid.n_theta or self.recon.nmax + 2

    @property
    def n_phi(self) -> int:
        n_phi = self.grid.n_phi or 2 * self.recon.nmax + 4
        return n_phi + (n_phi % 2)

    @property
    def sphere_order(self) -> int:
        return self.quad.sphere or 2 * self.recon.nmax + 4

    @property
    def workers(self) -> int:
        return self.run.workers or (os.cpu_count() or 1)


class FileMetadata(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = FORMAT_VERSION
    kind: Literal["observation", "field"]
    dimension: Literal[2, 3]
    angular: Dict[str, int]
    radii: List[float] = []
    T: float = 0.0
    dt: float = 0.0
    n_times: int = 0
    components: List[str] = []
    units: str = "sound speed 1; pressure in arbitrary consistent units"
    provenance: str = ""


class RunReport(BaseModel):
    method: str
    dimension: int
    nmax: int
    T: float
    dt: float
    timings: Dict[str, float] = {}
    mode_residuals: Dict[str, float] = {}
    iteration_norms: List[float] = []
    metrics: Dict[str, float] = {}
    notes: List[str] = []
