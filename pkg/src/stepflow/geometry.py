"""Backward-facing-step channel geometry and uniform grid construction.

All lengths are dimensionless: the full channel height is the unit, the
step height ``h`` and channel length ``L`` are given as fractions/multiples
of it.  Fields live on nodes ``x_i = i*hx`` (``i = 0..nx-1``),
``y_j = j*hy`` (``j = 0..ny-1``); ``nx``/``ny`` follow the usual
"cells across the dimension" counting, so an ``hx = hy = 0.0125`` channel
of height 1 and length 5 is an 80 x 400 grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import GridError

# Relative slack accepted when snapping a (possibly decimal-rounded) grid
# step to an integer node count, e.g. hx = 0.00833 -> 120 nodes per unit.
_SNAP_RTOL = 5e-4


class CellKind(IntEnum):
    FLUID = 0
    SOLID = 1
    INLET = 2   # inlet-face: prescribed inflow column above the step
    OUTLET = 3  # outlet-face: zero-gradient outflow column
    WALL = 4    # wall-face: no-slip (channel walls, step face and crest)


@dataclass(frozen=True)
class StepGeometry:
    """Channel with a backward-facing step on the lower wall.

    step_height_ratio: step height h as a fraction of the channel height;
        0 is allowed and degenerates to a straight channel (used by the
        verification tests).
    channel_length: total length L in channel-height units.
    step_x: abscissa of the step face; 0 places the step in the inlet
        plane so the inflow enters only over the upper 1 - h of it.
    """

    step_height_ratio: float
    channel_length: float
    step_x: float = 0.0
    channel_height: float = 1.0

    def __post_init__(self):
        if self.channel_height != 1.0:
            raise GridError("channel_height is the length unit and must be 1")
        if not 0.0 <= self.step_height_ratio < 1.0:
            raise GridError(
                f"step_height_ratio must lie in [0, 1), got {self.step_height_ratio}"
            )
        if not self.channel_length > 1.0:
            raise GridError(
                f"channel_length must exceed the channel height, got {self.channel_length}"
            )
        if not 0.0 <= self.step_x < self.channel_length:
            raise GridError(f"step_x must lie in [0, L), got {self.step_x}")

    @property
    def inlet_height(self) -> float:
        return self.channel_height - self.step_height_ratio


@dataclass(frozen=True)
class UniformGrid:
    """Uniform collocated grid over the step channel with per-node kinds."""

    geometry: StepGeometry
    hx: float
    hy: float
    nx: int
    ny: int
    cell_kinds: np.ndarray = field(repr=False)  # (ny, nx) uint8, CellKind values
    j_step: int = 0  # node row of the step crest
    i_step: int = 0  # node column of the step face

    def __post_init__(self):
        self.cell_kinds.setflags(write=False)

    @property
    def x_coords(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @property
    def y_coords(self) -> np.ndarray:
        return np.arange(self.ny) * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def has_solid(self) -> bool:
        return bool((self.cell_kinds == CellKind.SOLID).any())

    def mask(self, kind: CellKind) -> np.ndarray:
        return self.cell_kinds == kind

    def inlet_rows(self) -> np.ndarray:
        """Row indices of the inlet opening (column 0)."""
        return np.nonzero(self.cell_kinds[:, 0] == CellKind.INLET)[0]


def _snap_count(length: float, step: float, name: str) -> int:
    """Number of grid steps spanning `length`, or raise if `step` does not fit."""
    n = length / step
    n_round = round(n)
    if n_round < 4:
        raise GridError(f"{name} = {length} spans fewer than 4 steps of {step}")
    if abs(n_round * step - length) > _SNAP_RTOL * length:
        raise GridError(
            f"grid step {step} does not divide {name} = {length} "
            f"(nearest count {n_round} reproduces {n_round * step:g})"
        )
    return n_round


def _build_cell_kinds(ny, nx, j_step, i_step, step_at_top=False) -> np.ndarray:
    kinds = np.full((ny, nx), int(CellKind.FLUID), dtype=np.uint8)
    j = np.arange(ny)[:, None]
    i = np.arange(nx)[None, :]

    if step_at_top:
        j_crest = ny - 1 - j_step
        solid = (i < i_step) & (j > j_crest)
        crest = (i <= i_step) & (j == j_crest)
        face = (i == i_step) & (j >= j_crest)
        inlet_open = (i == 0) & (j < j_crest) & (j > 0)
    else:
        solid = (i < i_step) & (j < j_step)
        crest = (i <= i_step) & (j == j_step)
        face = (i == i_step) & (j <= j_step)
        inlet_open = (i == 0) & (j > j_step) & (j < ny - 1)

    kinds[solid] = CellKind.SOLID
    wall = (j == 0) | (j == ny - 1) | crest | face
    kinds[wall & ~solid] = CellKind.WALL
    kinds[inlet_open & (kinds == CellKind.FLUID)] = CellKind.INLET
    outlet = (i == nx - 1) & (kinds == CellKind.FLUID)
    kinds[outlet] = CellKind.OUTLET
    return kinds


def build_grid(geom: StepGeometry, hx: float) -> UniformGrid:
    """Build the uniform grid (equal steps in both directions) for `geom`.

    The step must divide the channel height and length to within the snap
    tolerance; otherwise a GridError names the offending dimension.
    """
    if hx <= 0:
        raise GridError(f"grid step must be positive, got {hx}")
    ny = _snap_count(geom.channel_height, hx, "channel_height")
    nx = _snap_count(geom.channel_length, hx, "channel_length")
    hy = hx
    j_step = int(math.floor(geom.step_height_ratio / hy + 1e-9))
    i_step = int(math.floor(geom.step_x / hx + 1e-9))
    kinds = _build_cell_kinds(ny, nx, j_step, i_step)
    return UniformGrid(
        geometry=geom, hx=hx, hy=hy, nx=nx, ny=ny,
        cell_kinds=kinds, j_step=j_step, i_step=i_step,
    )


def classify_cell(grid: UniformGrid, i: int, j: int) -> CellKind:
    """Kind of the node in column i, row j.  Out-of-range indices raise."""
    if not 0 <= i < grid.nx:
        raise IndexError(f"column index {i} outside [0, {grid.nx})")
    if not 0 <= j < grid.ny:
        raise IndexError(f"row index {j} outside [0, {grid.ny})")
    return CellKind(grid.cell_kinds[j, i])
