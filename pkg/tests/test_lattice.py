import numpy as np
import pytest

from mechrl.cells import CellKind, CellParams, catalog, mirror_kind
from mechrl.lattice import (
    DESIGN,
    HOLE,
    DesignGrid,
    Material,
    TilingAxis,
    TilingDirection,
    TilingStrategy,
    area_density,
    assemble,
    count_disconnected_hinges,
    design_from_dict,
    design_to_dict,
    load_design,
    save_design,
    tiling_order,
)

PARAMS = CellParams()
MAT = Material()


def all_design(rows, cols):
    return DesignGrid.filled_with(rows, cols, DESIGN)


# --- tiling -----------------------------------------------------------------


def test_zigzag_outward_horizontal_2x2():
    grid = all_design(2, 2)
    order = tiling_order(grid, TilingStrategy.ZIGZAG, TilingDirection.OUTWARD, TilingAxis.HORIZONTAL)
    positions = grid.design_slots()
    visited = [positions[i] for i in order.order]
    assert visited == [(0, 0), (0, 1), (1, 1), (1, 0)]


def test_spiral_inward_3x3_hand_enumeration():
    grid = all_design(3, 3)
    order = tiling_order(grid, TilingStrategy.SPIRAL, TilingDirection.INWARD)
    positions = grid.design_slots()
    visited = [positions[i] for i in order.order]
    assert visited == [
        (0, 0), (0, 1), (0, 2),
        (1, 2), (2, 2),
        (2, 1), (2, 0),
        (1, 0),
        (1, 1),
    ]


def test_zigzag_vertical_axis():
    grid = all_design(2, 3)
    order = tiling_order(grid, TilingStrategy.ZIGZAG, TilingDirection.OUTWARD, TilingAxis.VERTICAL)
    positions = grid.design_slots()
    visited = [positions[i] for i in order.order]
    assert visited == [(0, 0), (1, 0), (1, 1), (0, 1), (0, 2), (1, 2)]


@pytest.mark.parametrize("strategy", list(TilingStrategy))
@pytest.mark.parametrize("axis", list(TilingAxis))
def test_tiling_is_bijection_and_inward_reverses_outward(strategy, axis):
    rng = np.random.default_rng(7)
    for _ in range(10):
        rows, cols = rng.integers(1, 6, size=2)
        table = [
            [DESIGN if rng.random() < 0.7 else HOLE for _ in range(cols)]
            for _ in range(rows)
        ]
        grid = DesignGrid(int(rows), int(cols), tuple(tuple(r) for r in table))
        if grid.horizon == 0:
            continue
        out = tiling_order(grid, strategy, TilingDirection.OUTWARD, axis)
        inw = tiling_order(grid, strategy, TilingDirection.INWARD, axis)
        assert sorted(out.order) == list(range(grid.horizon))
        assert tuple(reversed(out.order)) == inw.order


def test_tiling_requires_design_slots():
    grid = DesignGrid.filled_with(2, 2, CellKind.SQUARE_PURE)
    with pytest.raises(ValueError):
        tiling_order(grid)


# --- assembly ---------------------------------------------------------------


def test_single_square_counts():
    grid = DesignGrid.filled_with(1, 1, CellKind.SQUARE_PURE)
    model = assemble(grid, PARAMS, MAT)
    assert model.n_nodes == 4
    assert len(model.elements) == 4


def test_two_adjacent_squares_share_an_edge():
    grid = DesignGrid.filled_with(1, 2, CellKind.SQUARE_PURE)
    model = assemble(grid, PARAMS, MAT)
    assert model.n_nodes == 6
    assert len(model.elements) == 7


def test_all_empty_assembles_to_nothing():
    grid = DesignGrid.filled_with(2, 2, CellKind.EMPTY)
    model = assemble(grid, PARAMS, MAT)
    assert model.n_nodes == 0
    assert len(model.elements) == 0


def test_unresolved_design_slot_rejected():
    grid = all_design(1, 1)
    with pytest.raises(ValueError):
        assemble(grid, PARAMS, MAT)


def test_assembly_idempotent_counts():
    grid = DesignGrid.filled_with(2, 3, CellKind.SQUARE_DDR)
    a = assemble(grid, PARAMS, MAT)
    b = assemble(grid, PARAMS, MAT)
    assert a.n_nodes == b.n_nodes
    assert len(a.elements) == len(b.elements)
    assert np.array_equal(a.nodes, b.nodes)


def test_translation_equivariance():
    base = DesignGrid.filled_with(2, 2, CellKind.PARA_F_FDR)
    shifted = DesignGrid(2, 2, base.slots, origin=(30.0, -20.0))
    a = assemble(base, PARAMS, MAT)
    b = assemble(shifted, PARAMS, MAT)
    assert len(a.elements) == len(b.elements)
    assert np.allclose(a.nodes + np.array([30.0, -20.0]), b.nodes)
    assert [(e.i, e.j) for e in a.elements] == [(e.i, e.j) for e in b.elements]


def test_mirrored_grid_assembles_to_mirror_image():
    rng = np.random.default_rng(3)
    kinds = catalog()
    table = [[kinds[rng.integers(12)] for _ in range(3)] for _ in range(2)]
    grid = DesignGrid(2, 3, tuple(tuple(r) for r in table))
    mirrored = DesignGrid(
        2, 3,
        tuple(tuple(mirror_kind(k) for k in reversed(row)) for row in table),
    )
    a = assemble(grid, PARAMS, MAT)
    b = assemble(mirrored, PARAMS, MAT)
    width = 3 * PARAMS.l_c
    mirrored_nodes = {(round(width - x, 6), round(y, 6)) for x, y in a.nodes}
    assert mirrored_nodes == {(round(x, 6), round(y, 6)) for x, y in b.nodes}
    edges_a = {
        frozenset(((round(width - a.nodes[e.i][0], 6), round(a.nodes[e.i][1], 6)),
                   (round(width - a.nodes[e.j][0], 6), round(a.nodes[e.j][1], 6))))
        for e in a.elements
    }
    edges_b = {
        frozenset(((round(b.nodes[e.i][0], 6), round(b.nodes[e.i][1], 6)),
                   (round(b.nodes[e.j][0], 6), round(b.nodes[e.j][1], 6))))
        for e in b.elements
    }
    assert edges_a == edges_b


def test_subdivision_adds_nodes_not_topology_changes():
    grid = DesignGrid.filled_with(1, 1, CellKind.SQUARE_PURE)
    model = assemble(grid, PARAMS, MAT, subdivide=4)
    assert model.n_nodes == 4 + 4 * 3
    assert len(model.elements) == 16


# --- hinge diagnostics ------------------------------------------------------


def test_fully_tiled_ddr_block_has_no_disconnected_hinges():
    grid = DesignGrid.filled_with(3, 3, CellKind.SQUARE_DDR)
    model = assemble(grid, PARAMS, MAT)
    assert count_disconnected_hinges(model) == 0


def test_dangling_segment_counts_one():
    from mechrl.lattice import FrameElement, FrameModel

    grid = DesignGrid.filled_with(1, 1, CellKind.SQUARE_PURE)
    model = assemble(grid, PARAMS, MAT)
    nodes = np.vstack([model.nodes, [20.0, 20.0]])
    tip = model.node_at((10.0, 10.0))
    elems = list(model.elements) + [FrameElement(tip, 4, PARAMS.area, PARAMS.inertia, MAT.E)]
    assert count_disconnected_hinges(FrameModel(nodes, elems, MAT)) == 1


def test_point_pivot_between_mismatched_cells_is_disconnected():
    # A backward parallelogram followed by a square touch at one node only.
    grid = DesignGrid(1, 2, ((CellKind.PARA_B_PURE, CellKind.SQUARE_PURE),))
    model = assemble(grid, PARAMS, MAT)
    assert count_disconnected_hinges(model) == 1


def test_rigid_region_hinges_not_counted():
    grid = DesignGrid.filled_with(1, 2, CellKind.RIGID)
    sparse = grid.with_slots({(0, 1): CellKind.EMPTY})
    model = assemble(sparse, PARAMS, MAT)
    assert count_disconnected_hinges(model) == 0


def test_hinge_count_matches_bruteforce_oracle():
    rng = np.random.default_rng(11)
    kinds = catalog()
    for _ in range(20):
        table = [[kinds[rng.integers(12)] for _ in range(3)] for _ in range(3)]
        grid = DesignGrid(3, 3, tuple(tuple(r) for r in table))
        model = assemble(grid, PARAMS, MAT)
        # oracle: remove each node in turn and recount components
        import networkx as nx

        g = model.graph()
        base = nx.number_connected_components(g)
        expected = 0
        for v in range(model.n_nodes):
            h = g.copy()
            h.remove_node(v)
            if h.number_of_nodes() and nx.number_connected_components(h) > base - (1 if g.degree(v) == 0 else 0):
                expected += 1
        assert count_disconnected_hinges(model) == expected


def test_hinge_count_invariant_under_node_renumbering():
    grid = DesignGrid(1, 2, ((CellKind.PARA_B_PURE, CellKind.SQUARE_PURE),))
    model = assemble(grid, PARAMS, MAT)
    perm = np.random.default_rng(5).permutation(model.n_nodes)
    from mechrl.lattice import FrameElement, FrameModel

    inv = np.argsort(perm)
    nodes = model.nodes[inv]
    elems = [
        FrameElement(int(perm[e.i]), int(perm[e.j]), e.area, e.inertia, e.E, e.rigid_only)
        for e in model.elements
    ]
    assert count_disconnected_hinges(FrameModel(nodes, elems, MAT)) == count_disconnected_hinges(model)


# --- area density -----------------------------------------------------------


def test_area_density_empty_grid():
    grid = DesignGrid.filled_with(2, 2, CellKind.EMPTY)
    assert area_density(grid, PARAMS) == 0.0


def test_area_density_single_square():
    grid = DesignGrid.filled_with(1, 1, CellKind.SQUARE_PURE)
    assert area_density(grid, PARAMS) == pytest.approx(4 * 10.0 * 1.2)  # 48 %


def test_area_density_ddr_above_pure():
    pure = DesignGrid.filled_with(1, 1, CellKind.SQUARE_PURE)
    ddr = DesignGrid.filled_with(1, 1, CellKind.SQUARE_DDR)
    assert area_density(ddr, PARAMS) > area_density(pure, PARAMS)


def test_area_density_counts_shared_walls_once():
    grid = DesignGrid.filled_with(1, 2, CellKind.SQUARE_PURE)
    assert area_density(grid, PARAMS) == pytest.approx(100.0 * 7 * 10.0 * 1.2 / 200.0)


# --- design files -----------------------------------------------------------


def test_design_file_round_trip(tmp_path):
    grid = DesignGrid(
        2,
        3,
        (
            (CellKind.RIGID, DESIGN, CellKind.EMPTY),
            (HOLE, CellKind.PARA_B_DDR, DESIGN),
        ),
        origin=(5.0, -10.0),
    )
    params = CellParams(l_c=10.0, t=1.5, depth=20.0, para_shear=10.0)
    path = tmp_path / "design.json"
    save_design(grid, params, path)
    loaded_grid, loaded_params = load_design(path)
    assert loaded_grid == grid
    assert loaded_params == params
    # and the dict form is stable
    assert design_to_dict(loaded_grid, loaded_params) == design_to_dict(grid, params)


def test_design_dict_codes():
    grid = DesignGrid(1, 4, ((CellKind.SQUARE_PURE, CellKind.RIGID, DESIGN, HOLE),))
    data = design_to_dict(grid, PARAMS)
    assert data["slots"] == [["s", "R", "?", "_"]]
    round_tripped, _ = design_from_dict(data)
    assert round_tripped == grid


def test_filled_places_actions_along_tiling_order():
    grid = all_design(2, 2)
    order = tiling_order(grid, TilingStrategy.ZIGZAG, TilingDirection.OUTWARD, TilingAxis.HORIZONTAL)
    kinds = [CellKind.SQUARE_PURE, CellKind.SQUARE_FDR, CellKind.SQUARE_BDR, CellKind.SQUARE_DDR]
    filled = grid.filled(kinds, order)
    # visit order was (0,0),(0,1),(1,1),(1,0)
    assert filled.slot(0, 0) is CellKind.SQUARE_PURE
    assert filled.slot(0, 1) is CellKind.SQUARE_FDR
    assert filled.slot(1, 1) is CellKind.SQUARE_BDR
    assert filled.slot(1, 0) is CellKind.SQUARE_DDR


# --- guidance presets ---------------------------------------------------------


def _latch_like_grid():
    from mechrl.mechanisms import build_door_latch

    return build_door_latch(guided=False).grid


def test_latch_guided_ring_leaves_29_design_slots():
    from mechrl.lattice import GuidancePreset, apply_guidance

    grid = _latch_like_grid()
    guided = apply_guidance(grid, GuidancePreset.LATCH_GUIDED)
    assert grid.horizon == 52
    assert guided.horizon == 29
    # the ring content defaults to pure forward parallelograms
    ring_kinds = {
        guided.slot(r, c)
        for r, c in grid.design_slots()
        if guided.slot(r, c) is not DESIGN
    }
    assert ring_kinds == {CellKind.PARA_F_PURE}


def test_latch_unguided_is_identity():
    from mechrl.lattice import GuidancePreset, apply_guidance

    grid = _latch_like_grid()
    assert apply_guidance(grid, GuidancePreset.LATCH_UNGUIDED) == grid


def test_custom_guidance_overlay(tmp_path):
    from mechrl.lattice import apply_guidance, save_design

    grid = DesignGrid.filled_with(2, 2, DESIGN)
    overlay = DesignGrid(
        2,
        2,
        (
            (CellKind.SQUARE_DDR, DESIGN),
            (DESIGN, CellKind.PARA_B_FDR),
        ),
    )
    path = tmp_path / "overlay.json"
    save_design(overlay, PARAMS, path)
    guided = apply_guidance(grid, path)
    assert guided.slot(0, 0) is CellKind.SQUARE_DDR
    assert guided.slot(1, 1) is CellKind.PARA_B_FDR
    assert guided.horizon == 2


def test_custom_guidance_dimension_mismatch(tmp_path):
    from mechrl.lattice import apply_guidance, save_design

    overlay = DesignGrid.filled_with(3, 3, CellKind.SQUARE_PURE)
    path = tmp_path / "overlay.json"
    save_design(overlay, PARAMS, path)
    with pytest.raises(ValueError, match="3x3"):
        apply_guidance(DesignGrid.filled_with(2, 2, DESIGN), path)
