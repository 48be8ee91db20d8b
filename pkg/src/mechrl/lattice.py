"""Design grids, tiling orders, and frame-model assembly.

A :class:`DesignGrid` digitizes a rectangular domain into slots that are
either fixed to a cell kind, open design slots, or holes outside the
structure. Assembly unions the ligaments of all placed cells into a
:class:`FrameModel` with exact node deduplication; ligaments emitted twice
by neighboring cells (shared walls) collapse into a single element.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from typing import Sequence, Union

import networkx as nx
import numpy as np

from .cells import CellKind, CellParams, Point, emit_geometry, kind_from_code

NODE_TOL = 1e-6  # mm; duplicate-node merge tolerance


class SlotMarker(enum.Enum):
    DESIGN = "?"
    HOLE = "_"


Slot = Union[CellKind, SlotMarker]

DESIGN = SlotMarker.DESIGN
HOLE = SlotMarker.HOLE


class GuidancePreset(enum.Enum):
    LATCH_UNGUIDED = "latch-unguided"
    LATCH_GUIDED = "latch-guided"
    GRIPPER_GUIDED = "gripper-guided"


@dataclass(frozen=True)
class Material:
    """Linear elastic wall material (E in MPa; nu carried for provenance)."""

    E: float = 24.1
    nu: float = 0.39


@dataclass(frozen=True)
class DesignGrid:
    """Slot grid; row 0 is the bottom row, slot (r, c) sits at
    origin + (c*l_c, r*l_c)."""

    rows: int
    cols: int
    slots: tuple[tuple[Slot, ...], ...]
    origin: Point = (0.0, 0.0)

    def __post_init__(self):
        if len(self.slots) != self.rows or any(len(row) != self.cols for row in self.slots):
            raise ValueError("slot table shape does not match rows x cols")

    @classmethod
    def filled_with(cls, rows: int, cols: int, value: Slot = DESIGN, origin: Point = (0.0, 0.0)) -> "DesignGrid":
        return cls(rows, cols, tuple(tuple(value for _ in range(cols)) for _ in range(rows)), origin)

    def slot(self, r: int, c: int) -> Slot:
        return self.slots[r][c]

    def with_slots(self, assignments: dict[tuple[int, int], Slot]) -> "DesignGrid":
        table = [list(row) for row in self.slots]
        for (r, c), value in assignments.items():
            table[r][c] = value
        return replace(self, slots=tuple(tuple(row) for row in table))

    def design_slots(self) -> tuple[tuple[int, int], ...]:
        """Design-slot positions in row-major order; their list index is
        the slot index referenced by tiling orders and placements."""
        return tuple(
            (r, c) for r in range(self.rows) for c in range(self.cols) if self.slots[r][c] is DESIGN
        )

    @property
    def horizon(self) -> int:
        return len(self.design_slots())

    def slot_origin(self, r: int, c: int, params: CellParams) -> Point:
        return (self.origin[0] + c * params.l_c, self.origin[1] + r * params.l_c)

    def filled(self, placements: Sequence[CellKind], order: "TilingOrder") -> "DesignGrid":
        """Resolve every design slot by placing ``placements[i]`` at tiling
        position i."""
        positions = self.design_slots()
        if len(placements) != len(positions) or len(order.order) != len(positions):
            raise ValueError("placements/order length must equal the design horizon")
        assignments = {positions[slot_index]: kind for slot_index, kind in zip(order.order, placements)}
        return self.with_slots(assignments)


class TilingStrategy(enum.Enum):
    SPIRAL = "spiral"
    ZIGZAG = "zigzag"


class TilingDirection(enum.Enum):
    INWARD = "inward"
    OUTWARD = "outward"


class TilingAxis(enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class TilingOrder:
    strategy: TilingStrategy
    direction: TilingDirection
    axis: TilingAxis
    order: tuple[int, ...]


def _spiral_positions(rmin, rmax, cmin, cmax):
    while rmin <= rmax and cmin <= cmax:
        for c in range(cmin, cmax + 1):
            yield (rmin, c)
        for r in range(rmin + 1, rmax + 1):
            yield (r, cmax)
        if rmax > rmin:
            for c in range(cmax - 1, cmin - 1, -1):
                yield (rmax, c)
        if cmax > cmin:
            for r in range(rmax - 1, rmin, -1):
                yield (r, cmin)
        rmin += 1
        rmax -= 1
        cmin += 1
        cmax -= 1


def tiling_order(
    grid: DesignGrid,
    strategy: TilingStrategy = TilingStrategy.SPIRAL,
    direction: TilingDirection = TilingDirection.INWARD,
    axis: TilingAxis = TilingAxis.HORIZONTAL,
) -> TilingOrder:
    """Permutation of design-slot indices visited by the chosen tiling.

    Spiral walks the bounding box of the design region ring by ring from
    the outside in (direction INWARD); zigzag sweeps rows (HORIZONTAL) or
    columns (VERTICAL) serpentine-fashion starting at the low corner
    (direction OUTWARD). The opposite direction is the exact reverse.
    Spiral ignores ``axis``.
    """
    positions = grid.design_slots()
    if not positions:
        raise ValueError("grid has no design slots")
    index = {pos: i for i, pos in enumerate(positions)}
    rs = [r for r, _ in positions]
    cs = [c for _, c in positions]

    if strategy is TilingStrategy.SPIRAL:
        walk = _spiral_positions(min(rs), max(rs), min(cs), max(cs))
        seq = [index[p] for p in walk if p in index]
        if direction is TilingDirection.OUTWARD:
            seq.reverse()
    else:
        seq = []
        if axis is TilingAxis.HORIZONTAL:
            for r in range(min(rs), max(rs) + 1):
                cols = range(min(cs), max(cs) + 1)
                if (r - min(rs)) % 2:
                    cols = reversed(cols)
                seq.extend(index[(r, c)] for c in cols if (r, c) in index)
        else:
            for c in range(min(cs), max(cs) + 1):
                rows = range(min(rs), max(rs) + 1)
                if (c - min(cs)) % 2:
                    rows = reversed(rows)
                seq.extend(index[(r, c)] for r in rows if (r, c) in index)
        if direction is TilingDirection.INWARD:
            seq.reverse()
    return TilingOrder(strategy, direction, axis, tuple(seq))


def _design_bbox(grid: DesignGrid):
    positions = grid.design_slots()
    rs = [r for r, _ in positions]
    cs = [c for _, c in positions]
    return min(rs), max(rs), min(cs), max(cs)


def apply_guidance(
    grid: DesignGrid,
    preset,
    ring_kind: CellKind = CellKind.PARA_F_PURE,
) -> DesignGrid:
    """Predefine part of the design region per a guidance preset.

    LATCH_GUIDED fills the bounding-box ring of the design region with
    ``ring_kind``, keeping designable the three ring cells that face the
    externally attached latch (the latch rows plus the cell below).
    GRIPPER_GUIDED fills the first design column (at the symmetry plane)
    with forward parallelogram cells, the last column with backward ones,
    and plants rigid cells against the jaw and handle mounts. A file path
    instead of a preset overlays the fixed slots of that design file onto
    the grid's design slots.
    """
    if not isinstance(preset, GuidancePreset):
        overlay, _ = load_design(preset)
        if (overlay.rows, overlay.cols) != (grid.rows, grid.cols):
            raise ValueError(
                f"guidance file is {overlay.rows}x{overlay.cols}, grid is {grid.rows}x{grid.cols}"
            )
        assignments = {
            (r, c): overlay.slot(r, c)
            for r, c in grid.design_slots()
            if isinstance(overlay.slot(r, c), CellKind)
        }
        return grid.with_slots(assignments)
    if preset is GuidancePreset.LATCH_UNGUIDED:
        return grid
    rmin, rmax, cmin, cmax = _design_bbox(grid)
    assignments: dict[tuple[int, int], Slot] = {}
    if preset is GuidancePreset.LATCH_GUIDED:
        latch_rows = sorted(
            r
            for r in range(grid.rows)
            for c in range(cmax + 1, grid.cols)
            if grid.slot(r, c) is CellKind.RIGID
        )
        keep = set()
        if latch_rows:
            keep = {(r, cmax) for r in range(latch_rows[0] - 1, latch_rows[-1] + 1)}
        for r, c in grid.design_slots():
            on_ring = r in (rmin, rmax) or c in (cmin, cmax)
            if on_ring and (r, c) not in keep:
                assignments[(r, c)] = ring_kind
    elif preset is GuidancePreset.GRIPPER_GUIDED:
        for r, c in grid.design_slots():
            below_rigid = r == rmin and r > 0 and grid.slot(r - 1, c) is CellKind.RIGID
            above_rigid = r == rmax and r + 1 < grid.rows and grid.slot(r + 1, c) is CellKind.RIGID
            if below_rigid or above_rigid:
                assignments[(r, c)] = CellKind.RIGID
            elif c == cmin:
                assignments[(r, c)] = CellKind.PARA_F_PURE
            elif c == cmax:
                assignments[(r, c)] = CellKind.PARA_B_PURE
    return grid.with_slots(assignments)


@dataclass(frozen=True)
class FrameElement:
    """One beam ligament between two model nodes."""

    i: int
    j: int
    area: float
    inertia: float
    E: float
    rigid_only: bool = False


class FrameModel:
    """Deduplicated node set plus beam elements."""

    def __init__(self, nodes: np.ndarray, elements: list[FrameElement], material: Material):
        self.nodes = np.asarray(nodes, dtype=float).reshape(-1, 2)
        self.elements = elements
        self.material = material
        self._index = {
            (round(x, 6), round(y, 6)): i for i, (x, y) in enumerate(self.nodes)
        }

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_dofs(self) -> int:
        return 3 * len(self.nodes)

    def node_at(self, point: Point, tol: float = 1e-3) -> int:
        """Index of the node at ``point`` (within ``tol`` mm)."""
        key = (round(point[0], 6), round(point[1], 6))
        if key in self._index:
            return self._index[key]
        if len(self.nodes) == 0:
            raise KeyError(f"no node near {point}")
        d = np.linalg.norm(self.nodes - np.asarray(point), axis=1)
        k = int(np.argmin(d))
        if d[k] > tol:
            raise KeyError(f"no node near {point} (closest is {d[k]:.4g} mm away)")
        return k

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=int)
        for e in self.elements:
            deg[e.i] += 1
            deg[e.j] += 1
        return deg

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from((e.i, e.j) for e in self.elements)
        return g


class _NodePool:
    def __init__(self):
        self.coords: list[Point] = []
        self.index: dict[tuple[float, float], int] = {}

    def add(self, p: Point) -> int:
        key = (round(p[0], 6), round(p[1], 6))
        i = self.index.get(key)
        if i is None:
            i = len(self.coords)
            self.index[key] = i
            self.coords.append((key[0], key[1]))
        return i


def _merged_segments(grid: DesignGrid, params: CellParams):
    """Union of all cell ligaments with node dedup and coincident-segment
    merge. Returns (node coords, {(i, j): (segment, rigid_only)})."""
    pool = _NodePool()
    merged: dict[tuple[int, int], list] = {}
    for r in range(grid.rows):
        for c in range(grid.cols):
            slot = grid.slot(r, c)
            if slot is DESIGN:
                raise ValueError(f"unresolved design slot at ({r}, {c})")
            if slot is HOLE or slot is CellKind.EMPTY:
                continue
            rigid = slot is CellKind.RIGID
            for seg in emit_geometry(slot, grid.slot_origin(r, c, params), params):
                i, j = pool.add(seg.a), pool.add(seg.b)
                key = (min(i, j), max(i, j))
                entry = merged.get(key)
                if entry is None:
                    merged[key] = [seg, rigid]
                else:
                    entry[1] = entry[1] and rigid
    return pool.coords, merged


def assemble(
    grid: DesignGrid,
    params: CellParams,
    material: Material,
    subdivide: int = 1,
) -> FrameModel:
    """Build the frame model for a fully resolved grid.

    ``subdivide`` > 1 splits every ligament into equal parts; nodal
    results of the frame elements used here are exact without it, so
    subdivision only matters for rendering smooth deformed shapes.
    """
    coords, merged = _merged_segments(grid, params)
    coords = list(coords)
    elements: list[FrameElement] = []
    for (i, j), (seg, rigid) in merged.items():
        if subdivide <= 1:
            elements.append(FrameElement(i, j, seg.area, seg.inertia, material.E, rigid))
            continue
        ax, ay = coords[i]
        bx, by = coords[j]
        prev = i
        for k in range(1, subdivide):
            f = k / subdivide
            coords.append((ax + f * (bx - ax), ay + f * (by - ay)))
            nxt = len(coords) - 1
            elements.append(FrameElement(prev, nxt, seg.area, seg.inertia, material.E, rigid))
            prev = nxt
        elements.append(FrameElement(prev, j, seg.area, seg.inertia, material.E, rigid))
    nodes = np.array(coords, dtype=float) if coords else np.zeros((0, 2))
    return FrameModel(nodes, elements, material)


def count_disconnected_hinges(model: FrameModel) -> int:
    """Number of disconnected hinges in the designed structure.

    A hinge is disconnected when it joins its surroundings with fewer
    than two independent connections, i.e. it is the only junction
    holding two parts of the ligament graph together (a cut vertex);
    such a point contact lets the parts pivot about it. Hinges buried
    inside the rigid predefined regions are not counted.
    """
    g = model.graph()
    rigid_node = np.ones(model.n_nodes, dtype=bool)
    for e in model.elements:
        if not e.rigid_only:
            rigid_node[e.i] = False
            rigid_node[e.j] = False
    return sum(1 for v in nx.articulation_points(g) if not rigid_node[v])


def area_density(grid: DesignGrid, params: CellParams) -> float:
    """Material cross-section area as a percentage of the domain area.

    Shared walls are counted once; the domain area is the total area of
    non-hole slots.
    """
    domain_slots = sum(
        1
        for r in range(grid.rows)
        for c in range(grid.cols)
        if grid.slot(r, c) is not HOLE
    )
    if domain_slots == 0:
        return 0.0
    _, merged = _merged_segments(grid, params)
    wall_area = sum(seg.length * params.t for seg, _ in merged.values())
    return 100.0 * wall_area / (domain_slots * params.l_c**2)


# ---------------------------------------------------------------------------
# Design files: JSON with one code per slot. Codes are the cell codes from
# cells.CellKind plus "R" (rigid), "." (empty), "?" (design slot) and "_"
# (hole, outside the structure). Rows are listed bottom row first.


def _slot_code(slot: Slot) -> str:
    if slot is DESIGN:
        return "?"
    if slot is HOLE:
        return "_"
    return slot.code


def _slot_from_code(code: str) -> Slot:
    if code == "?":
        return DESIGN
    if code == "_":
        return HOLE
    return kind_from_code(code)


def design_to_dict(grid: DesignGrid, params: CellParams) -> dict:
    return {
        "rows": grid.rows,
        "cols": grid.cols,
        "origin": list(grid.origin),
        "slots": [[_slot_code(s) for s in row] for row in grid.slots],
        "params": {
            "l_c": params.l_c,
            "t": params.t,
            "depth": params.depth,
            "para_shear": params.para_shear,
        },
    }


def design_from_dict(data: dict) -> tuple[DesignGrid, CellParams]:
    params = CellParams(**data.get("params", {}))
    slots = tuple(tuple(_slot_from_code(code) for code in row) for row in data["slots"])
    origin = tuple(data.get("origin", (0.0, 0.0)))
    grid = DesignGrid(int(data["rows"]), int(data["cols"]), slots, origin)
    return grid, params


def save_design(grid: DesignGrid, params: CellParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(design_to_dict(grid, params), fh, indent=1)
        fh.write("\n")


def load_design(path) -> tuple[DesignGrid, CellParams]:
    with open(path, encoding="utf-8") as fh:
        return design_from_dict(json.load(fh))
