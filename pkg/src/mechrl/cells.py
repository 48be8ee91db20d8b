"""Unit-cell vocabulary and beam-ligament geometry.

Two cell families tile the design domain: square cells (SC) and
parallelogram cells (PC), each in four reinforcement variants (pure,
forward-diagonal, backward-diagonal, double-diagonal). Parallelograms come
in a forward- and a backward-facing orientation, giving twelve placeable
kinds in total, plus two non-placeable markers: RIGID (geometry of a
double-diagonal square, used for predefined frame regions) and EMPTY.

Geometry conventions (all relative to a slot origin at the cell's
bottom-left corner, cell size ``l_c``, shear offset ``para_shear``):

* square corners        A=(0,0)  B=(l,0)  C=(l,l)      D=(0,l)
* forward PC corners    A=(0,0)  B=(l,0)  C=(s+l,l)    D=(s,l)
* backward PC corners   A=(0,0)  B=(l,0)  C=(l-s,l)    D=(-s,l)

The forward diagonal runs A->C, the backward diagonal B->D; a
double-diagonal cell carries both, crossing without an intermediate node.
With the default ``para_shear = l_c`` the backward diagonal of a
forward-facing PC (and the forward diagonal of a backward-facing PC) is a
vertical ligament.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

Point = tuple[float, float]


class Family(enum.Enum):
    SQUARE = "square"
    PARALLELOGRAM = "parallelogram"


class Reinforcement(enum.Enum):
    PURE = "pure"
    FDR = "fdr"
    BDR = "bdr"
    DDR = "ddr"


class Facing(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class CellKind(enum.Enum):
    """Placeable cell variants plus the RIGID / EMPTY markers.

    Enum order of the first twelve members defines the action index
    (0..11) used throughout the package.
    """

    SQUARE_PURE = ("s", Family.SQUARE, Reinforcement.PURE, None)
    SQUARE_FDR = ("sf", Family.SQUARE, Reinforcement.FDR, None)
    SQUARE_BDR = ("sb", Family.SQUARE, Reinforcement.BDR, None)
    SQUARE_DDR = ("sd", Family.SQUARE, Reinforcement.DDR, None)
    PARA_F_PURE = ("f", Family.PARALLELOGRAM, Reinforcement.PURE, Facing.FORWARD)
    PARA_F_FDR = ("ff", Family.PARALLELOGRAM, Reinforcement.FDR, Facing.FORWARD)
    PARA_F_BDR = ("fb", Family.PARALLELOGRAM, Reinforcement.BDR, Facing.FORWARD)
    PARA_F_DDR = ("fd", Family.PARALLELOGRAM, Reinforcement.DDR, Facing.FORWARD)
    PARA_B_PURE = ("b", Family.PARALLELOGRAM, Reinforcement.PURE, Facing.BACKWARD)
    PARA_B_FDR = ("bf", Family.PARALLELOGRAM, Reinforcement.FDR, Facing.BACKWARD)
    PARA_B_BDR = ("bb", Family.PARALLELOGRAM, Reinforcement.BDR, Facing.BACKWARD)
    PARA_B_DDR = ("bd", Family.PARALLELOGRAM, Reinforcement.DDR, Facing.BACKWARD)
    RIGID = ("R", Family.SQUARE, Reinforcement.DDR, None)
    EMPTY = (".", None, None, None)

    def __init__(self, code, family, reinforcement, facing):
        self.code = code
        self.family = family
        self.reinforcement = reinforcement
        self.facing = facing

    @property
    def action_eligible(self) -> bool:
        return self not in (CellKind.RIGID, CellKind.EMPTY)


_CATALOG = tuple(k for k in CellKind if k.action_eligible)
_BY_CODE = {k.code: k for k in CellKind}

# Mirror partners: an x-mirror swaps facing and FDR<->BDR.
_MIRROR = {
    CellKind.SQUARE_PURE: CellKind.SQUARE_PURE,
    CellKind.SQUARE_FDR: CellKind.SQUARE_BDR,
    CellKind.SQUARE_BDR: CellKind.SQUARE_FDR,
    CellKind.SQUARE_DDR: CellKind.SQUARE_DDR,
    CellKind.PARA_F_PURE: CellKind.PARA_B_PURE,
    CellKind.PARA_F_FDR: CellKind.PARA_B_BDR,
    CellKind.PARA_F_BDR: CellKind.PARA_B_FDR,
    CellKind.PARA_F_DDR: CellKind.PARA_B_DDR,
    CellKind.PARA_B_PURE: CellKind.PARA_F_PURE,
    CellKind.PARA_B_FDR: CellKind.PARA_F_BDR,
    CellKind.PARA_B_BDR: CellKind.PARA_F_FDR,
    CellKind.PARA_B_DDR: CellKind.PARA_F_DDR,
    CellKind.RIGID: CellKind.RIGID,
    CellKind.EMPTY: CellKind.EMPTY,
}


def catalog() -> tuple[CellKind, ...]:
    """The twelve placeable kinds in fixed action order."""
    return _CATALOG


def kind_from_code(code: str) -> CellKind:
    try:
        return _BY_CODE[code]
    except KeyError:
        raise ValueError(f"unknown cell code {code!r}") from None


def mirror_kind(kind: CellKind) -> CellKind:
    """The kind whose geometry is the x-mirror of ``kind``'s."""
    return _MIRROR[kind]


@dataclass(frozen=True)
class CellParams:
    """Cell dimensions in mm.

    ``para_shear`` must be an integer multiple of ``l_c`` so that sheared
    top edges land on the same node lattice as the squares.
    """

    l_c: float = 10.0
    t: float = 1.2
    depth: float = 25.0
    para_shear: float | None = None

    def __post_init__(self):
        shear = self.l_c if self.para_shear is None else self.para_shear
        object.__setattr__(self, "para_shear", shear)
        if self.l_c <= 0 or self.t <= 0 or self.depth <= 0 or shear <= 0:
            raise ValueError("cell parameters must be strictly positive")
        ratio = shear / self.l_c
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("para_shear must be an integer multiple of l_c")

    @property
    def area(self) -> float:
        """Wall cross-section area t*depth (mm^2)."""
        return self.t * self.depth

    @property
    def inertia(self) -> float:
        """In-plane second moment of area depth*t^3/12 (mm^4)."""
        return self.depth * self.t**3 / 12.0


@dataclass(frozen=True)
class Segment:
    """One straight ligament with its wall section."""

    a: Point
    b: Point
    area: float
    inertia: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("degenerate segment")

    @property
    def length(self) -> float:
        return ((self.b[0] - self.a[0]) ** 2 + (self.b[1] - self.a[1]) ** 2) ** 0.5


def _corners(kind: CellKind, origin: Point, params: CellParams) -> tuple[Point, ...]:
    x0, y0 = origin
    l = params.l_c
    if kind.family is Family.SQUARE:
        return ((x0, y0), (x0 + l, y0), (x0 + l, y0 + l), (x0, y0 + l))
    s = params.para_shear if kind.facing is Facing.FORWARD else -params.para_shear
    return ((x0, y0), (x0 + l, y0), (x0 + s + l, y0 + l), (x0 + s, y0 + l))


def emit_geometry(kind: CellKind, slot_origin: Point, params: CellParams) -> list[Segment]:
    """Ligaments of one cell placed at ``slot_origin``.

    Returns the four perimeter ligaments plus 0/1/1/2 diagonals for
    pure/FDR/BDR/DDR. RIGID emits double-diagonal square geometry; EMPTY
    is rejected.
    """
    if not kind.action_eligible and kind is not CellKind.RIGID:
        raise ValueError(f"{kind.name} has no geometry")
    a, b, c, d = _corners(kind, slot_origin, params)
    seg = lambda p, q: Segment(p, q, params.area, params.inertia)
    segments = [seg(a, b), seg(b, c), seg(d, c), seg(a, d)]
    rein = kind.reinforcement
    if rein in (Reinforcement.FDR, Reinforcement.DDR):
        segments.append(seg(a, c))
    if rein in (Reinforcement.BDR, Reinforcement.DDR):
        segments.append(seg(b, d))
    return segments
