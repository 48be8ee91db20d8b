"""Linear-static 2D frame finite-element solver.

Each ligament is one Euler-Bernoulli frame element with three DOFs per
node (u_x, u_y, theta_z). Units are N, mm, MPa throughout; moments are
N*mm and rotations rad. Shear deformation is neglected (walls are
slender, t/l_c ~= 0.12), which is a documented fidelity limit relative
to general-purpose beam codes.

The solver is stateless: ``solve(model, case)`` assembles the sparse
global stiffness, removes constrained DOFs, and factorizes the reduced
symmetric positive-definite system directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .cells import Point
from .lattice import FrameElement, FrameModel

UX, UY, TH = 0, 1, 2
RESIDUAL_RTOL = 1e-10


class SingularSystemError(RuntimeError):
    """Raised when the constrained system still has rigid-body freedom.

    ``components`` lists, per offending connected component, the node ids
    and the number of constrained DOFs found in it.
    """

    def __init__(self, message: str, components=None):
        super().__init__(message)
        self.components = components or []


@dataclass
class LoadCase:
    """Nodal loads plus constraint sets for one analysis.

    ``fixed`` maps node id -> (fix u_x, fix u_y, fix theta); nodes in
    ``symmetry`` get u_x = 0 and theta = 0 (a vertical mirror plane).
    """

    loads: dict[tuple[int, int], float] = field(default_factory=dict)
    fixed: dict[int, tuple[bool, bool, bool]] = field(default_factory=dict)
    symmetry: set[int] = field(default_factory=set)

    def add_load(self, node: int, dof: int, value: float) -> None:
        key = (node, dof)
        self.loads[key] = self.loads.get(key, 0.0) + value

    def add_loads(self, increment: dict[tuple[int, int], float]) -> None:
        for (node, dof), value in increment.items():
            self.add_load(node, dof, value)

    def fix_node(self, node: int, ux: bool = True, uy: bool = True, theta: bool = True) -> None:
        prev = self.fixed.get(node, (False, False, False))
        self.fixed[node] = (prev[0] or ux, prev[1] or uy, prev[2] or theta)

    def fixed_dof_mask(self, n_nodes: int) -> np.ndarray:
        mask = np.zeros(3 * n_nodes, dtype=bool)
        for node, flags in self.fixed.items():
            for dof in range(3):
                if flags[dof]:
                    mask[3 * node + dof] = True
        for node in self.symmetry:
            mask[3 * node + UX] = True
            mask[3 * node + TH] = True
        return mask


@dataclass
class DisplacementField:
    """Per-node solution (u_x mm, u_y mm, theta_z rad)."""

    model: FrameModel
    values: np.ndarray

    def at_node(self, node: int) -> np.ndarray:
        return self.values[node]


def element_stiffness(elem: FrameElement, nodes: np.ndarray) -> np.ndarray:
    """6x6 global-coordinate stiffness of one frame element."""
    xi, yi = nodes[elem.i]
    xj, yj = nodes[elem.j]
    dx, dy = xj - xi, yj - yi
    L = float(np.hypot(dx, dy))
    if L <= 0.0:
        raise ValueError("zero-length element")
    E, A, I = elem.E, elem.area, elem.inertia
    ax = E * A / L
    b1 = 12.0 * E * I / L**3
    b2 = 6.0 * E * I / L**2
    b3 = 4.0 * E * I / L
    b4 = 2.0 * E * I / L
    k = np.array(
        [
            [ax, 0.0, 0.0, -ax, 0.0, 0.0],
            [0.0, b1, b2, 0.0, -b1, b2],
            [0.0, b2, b3, 0.0, -b2, b4],
            [-ax, 0.0, 0.0, ax, 0.0, 0.0],
            [0.0, -b1, -b2, 0.0, b1, -b2],
            [0.0, b2, b4, 0.0, -b2, b3],
        ]
    )
    c, s = dx / L, dy / L
    r = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    t = np.zeros((6, 6))
    t[:3, :3] = r
    t[3:, 3:] = r
    return t.T @ k @ t


def assemble_stiffness(model: FrameModel) -> sp.csr_matrix:
    """Global stiffness matrix before boundary conditions."""
    n = model.n_dofs
    rows, cols, vals = [], [], []
    for elem in model.elements:
        k = element_stiffness(elem, model.nodes)
        dofs = [3 * elem.i, 3 * elem.i + 1, 3 * elem.i + 2, 3 * elem.j, 3 * elem.j + 1, 3 * elem.j + 2]
        for a in range(6):
            for b in range(6):
                rows.append(dofs[a])
                cols.append(dofs[b])
                vals.append(k[a, b])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _adjacency(model: FrameModel) -> sp.csr_matrix:
    n = model.n_nodes
    if not model.elements:
        return sp.csr_matrix((n, n))
    i = [e.i for e in model.elements]
    j = [e.j for e in model.elements]
    data = np.ones(len(i))
    a = sp.coo_matrix((data, (i, j)), shape=(n, n))
    return (a + a.T).tocsr()


def _check_constrained(model: FrameModel, case: LoadCase) -> None:
    """Every connected component needs enough constraints to pin its three
    rigid-body modes; otherwise report the floating components."""
    mask = case.fixed_dof_mask(model.n_nodes)
    n_comp, labels = csgraph.connected_components(_adjacency(model), directed=False)
    bad = []
    for comp in range(n_comp):
        nodes = np.flatnonzero(labels == comp)
        dofs = np.concatenate([3 * nodes, 3 * nodes + 1, 3 * nodes + 2])
        n_fixed = int(mask[dofs].sum())
        if n_fixed < 3:
            bad.append({"nodes": nodes.tolist(), "constrained_dofs": n_fixed})
    if bad:
        raise SingularSystemError(
            f"{len(bad)} floating component(s) with fewer than 3 constrained DOFs",
            components=bad,
        )


def solve(model: FrameModel, case: LoadCase) -> DisplacementField:
    """Direct sparse solve of the constrained system.

    Raises :class:`SingularSystemError` for under-constrained or
    disconnected loaded structures; the error lists the floating
    components.
    """
    if model.n_nodes == 0:
        raise SingularSystemError("empty model")
    mask = case.fixed_dof_mask(model.n_nodes)
    for (node, dof) in case.loads:
        if mask[3 * node + dof]:
            raise ValueError(f"DOF {dof} of node {node} is both loaded and fixed")
    _check_constrained(model, case)

    K = assemble_stiffness(model)
    f = np.zeros(model.n_dofs)
    for (node, dof), value in case.loads.items():
        f[3 * node + dof] += value

    free = np.flatnonzero(~mask)
    Kff = K[free][:, free].tocsc()
    ff = f[free]
    try:
        lu = spla.splu(Kff)
        uf = lu.solve(ff)
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization failed: {exc}") from exc
    if not np.all(np.isfinite(uf)):
        raise SingularSystemError("non-finite solution (singular constrained system)")
    residual = np.linalg.norm(Kff @ uf - ff)
    if residual > RESIDUAL_RTOL * max(1.0, np.linalg.norm(ff)):
        raise SingularSystemError(f"solver residual {residual:.3e} exceeds tolerance")

    u = np.zeros(model.n_dofs)
    u[free] = uf
    return DisplacementField(model, u.reshape(-1, 3))


def apply_torque_couple(
    model: FrameModel,
    center: Point,
    corner_nodes,
    torque: float,
) -> dict[tuple[int, int], float]:
    """Load increment realizing a torque as four tangential corner forces.

    Corners must be equidistant from ``center`` and centered on it; each
    then carries a force of magnitude T/(4r) perpendicular to its radius
    vector (counterclockwise for positive ``torque``). Returns a loads
    dict suitable for :meth:`LoadCase.add_loads`.
    """
    ids = [n if isinstance(n, (int, np.integer)) else model.node_at(n) for n in corner_nodes]
    pts = model.nodes[ids]
    v = pts - np.asarray(center, dtype=float)
    r = np.linalg.norm(v, axis=1)
    if len(ids) < 2 or np.any(r < 1e-9):
        raise ValueError("degenerate corner set")
    if np.ptp(r) > 1e-6 * r.mean():
        raise ValueError("corner nodes are not equidistant from the center")
    if np.linalg.norm(v.sum(axis=0)) > 1e-6 * r.mean():
        raise ValueError("corner set is not centered on the torque center")
    mag = torque / (len(ids) * r.mean())
    loads: dict[tuple[int, int], float] = {}
    for node, (vx, vy), ri in zip(ids, v, r):
        tx, ty = -vy / ri, vx / ri
        loads[(node, UX)] = loads.get((node, UX), 0.0) + mag * tx
        loads[(node, UY)] = loads.get((node, UY), 0.0) + mag * ty
    return loads


_COMPONENTS = ("ux", "uy", "umag", "theta")


def probe(field: DisplacementField, where, component: str) -> float:
    """Displacement component at a node or at a point resolving to one.

    ``component`` is one of ``ux``, ``uy``, ``umag`` (in-plane magnitude)
    or ``theta``.
    """
    if component not in _COMPONENTS:
        raise ValueError(f"unknown component {component!r}")
    node = where if isinstance(where, (int, np.integer)) else field.model.node_at(where)
    ux, uy, th = field.values[node]
    if component == "ux":
        return float(ux)
    if component == "uy":
        return float(uy)
    if component == "theta":
        return float(th)
    return float(np.hypot(ux, uy))
