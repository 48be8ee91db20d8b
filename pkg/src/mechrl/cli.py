"""Command-line front end.

Subcommands: ``characterize`` (unit-cell load tables), ``evaluate`` (score
a design file), ``train`` (Q-learning run with checkpoints and figures),
``baseline`` (random / greedy rollout statistics), ``render`` (design file
to SVG). Every command is deterministic given its configuration and seed;
file outputs are reproducible byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import agent
from .cells import CellKind, CellParams, catalog, kind_from_code
from .env import EvaluationCache, PlacementEnv
from .fea import SingularSystemError, solve
from .lattice import (
    DesignGrid,
    TilingAxis,
    TilingDirection,
    TilingStrategy,
    area_density,
    assemble,
    load_design,
    save_design,
    tiling_order,
)
from .mechanisms import (
    Scenario,
    build_door_latch,
    build_gripper,
    build_toy_gripper,
    build_toy_latch,
    cell_load_tests,
    ordering_report,
    scenario_from_dict,
)
from .render import (
    model_svg,
    save_characterization_figure,
    save_learning_curve_figure,
    save_reward_histogram,
)

CURVE_HEADER = ["episode", "reward", "moving_avg", "epsilon", "disconnections"]


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Experiment configuration (TOML)

_SECTION_KEYS = {
    "experiment": {"scenario", "out", "seed"},
    "tiling": {"strategy", "direction", "axis"},
    "train": {
        "episodes",
        "gamma",
        "lr",
        "batch_size",
        "eps_start",
        "eps_end",
        "eps_decay",
        "target_sync",
        "buffer_capacity",
        "seed",
        "trunk",
        "head_hidden",
        "double_dqn",
        "force_random_first_action",
        "moving_avg_window",
        "checkpoint_every",
    },
    "cells": {"l_c", "t", "depth", "para_shear"},
}


def _validate_config(data: dict, source: str) -> None:
    for section, body in data.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{source}: [{section}] must be a table")
        for key in body:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"{source}: unknown key '{key}' in [{section}]")


def load_experiment_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    _validate_config(data, str(path))
    return data


def make_scenario(name: str, params: CellParams | None = None) -> Scenario:
    """Resolve a scenario selector: a builtin name or a scenario JSON path."""
    kwargs = {} if params is None else {"params": params}
    builders = {
        "latch-unguided": lambda: build_door_latch(guided=False, **kwargs),
        "latch-guided": lambda: build_door_latch(guided=True, **kwargs),
        "gripper": lambda: build_gripper(**kwargs),
        "gripper-unpenalized": lambda: build_gripper(c2=0.0, **kwargs),
        "toy-latch": lambda: build_toy_latch(**kwargs),
        "toy-gripper": lambda: build_toy_gripper(**kwargs),
        "toy-gripper-unpenalized": lambda: build_toy_gripper(c2=0.0, **kwargs),
    }
    if name in builders:
        return builders[name]()
    if os.path.exists(name):
        try:
            with open(name, encoding="utf-8") as fh:
                return scenario_from_dict(json.load(fh))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: invalid scenario file ({exc})") from exc
    raise ConfigError(
        f"unknown scenario {name!r}; expected one of {sorted(builders)} or a scenario file path"
    )


def make_tiling(scenario: Scenario, tiling_block: dict | None):
    spec = scenario.tiling
    if tiling_block:
        try:
            strategy = TilingStrategy(tiling_block.get("strategy", spec.strategy.value))
            direction = TilingDirection(tiling_block.get("direction", spec.direction.value))
            axis = TilingAxis(tiling_block.get("axis", spec.axis.value))
        except ValueError as exc:
            raise ConfigError(f"[tiling]: {exc}") from exc
    else:
        strategy, direction, axis = spec.strategy, spec.direction, spec.axis
    return tiling_order(scenario.grid, strategy, direction, axis)


def make_train_config(train_block: dict, seed_override=None) -> tuple[agent.TrainConfig, int]:
    block = dict(train_block)
    checkpoint_every = int(block.pop("checkpoint_every", 0))
    if "trunk" in block:
        block["trunk"] = tuple(int(w) for w in block["trunk"])
    try:
        config = agent.TrainConfig(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[train]: {exc}") from exc
    if seed_override is not None:
        config.seed = int(seed_override)
    return config, checkpoint_every


def load_design_checked(path):
    try:
        return load_design(path)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid design file ({exc})") from exc


# ---------------------------------------------------------------------------
# Output helpers


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    return repr(float(value))


def _write_curve_csv(path, rows, append=False) -> None:
    mode = "a" if append and os.path.exists(path) else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(CURVE_HEADER)
        for r in rows:
            writer.writerow(
                [r["episode"], _fmt(r["reward"]), _fmt(r["moving_avg"]), _fmt(r["epsilon"]), r["disconnections"]]
            )


def _design_svgs(scenario: Scenario, grid: DesignGrid, out_dir, stem: str) -> None:
    model = assemble(grid, scenario.params, scenario.material)
    with open(os.path.join(out_dir, f"{stem}.svg"), "w", encoding="utf-8") as fh:
        fh.write(model_svg(model))
    try:
        field = solve(model, scenario.build_case(model))
    except SingularSystemError:
        return
    with open(os.path.join(out_dir, f"{stem}_deformed.svg"), "w", encoding="utf-8") as fh:
        fh.write(model_svg(model, field))


# ---------------------------------------------------------------------------
# Commands


def cmd_characterize(args) -> int:
    params = CellParams()
    if args.config:
        data = load_experiment_config(args.config)
        if "cells" in data:
            params = CellParams(**data["cells"])
    if args.kinds == "all":
        kinds = list(catalog())
    else:
        kinds = [kind_from_code(code.strip()) for code in args.kinds.split(",")]
    os.makedirs(args.out, exist_ok=True)
    results = {}
    for kind in kinds:
        results[kind] = cell_load_tests(kind, params)
        rows = [
            [name, _fmt(r.ux), _fmt(r.uy), _fmt(r.umag), _fmt(r.umax)]
            for name, r in results[kind].items()
        ]
        _write_csv(
            os.path.join(args.out, f"cell_{kind.code}.csv"),
            ["load_case", "ux", "uy", "u_mag", "u_max"],
            rows,
        )
    checks = ordering_report()
    report_lines = [f"{'HOLDS' if c.holds else 'FAILS'}  {c.name}  [{c.detail}]" for c in checks]
    with open(os.path.join(args.out, "orderings.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(report_lines) + "\n")
    save_characterization_figure(results, os.path.join(args.out, "characterization.png"))
    for line in report_lines:
        print(line)
    print(f"wrote {len(kinds)} cell tables to {args.out}")
    return 0


def _grid_matches_design_region(scenario: Scenario, grid: DesignGrid) -> bool:
    return grid.rows == scenario.grid.rows and grid.cols == scenario.grid.cols


def cmd_evaluate(args) -> int:
    scenario = make_scenario(args.scenario)
    grid, params = load_design_checked(args.design)
    if not _grid_matches_design_region(scenario, grid):
        raise ConfigError(
            f"design grid {grid.rows}x{grid.cols} does not match scenario "
            f"{scenario.grid.rows}x{scenario.grid.cols}"
        )
    reward, metrics = scenario.evaluate(grid)
    density = area_density(grid, params)
    report = {"scenario": scenario.name, "reward": reward, "area_density_percent": density}
    report.update(metrics)
    for key, value in report.items():
        print(f"{key}: {value}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1, sort_keys=True)
            fh.write("\n")
        _design_svgs(scenario, grid, args.out, "design")
    return 0


def cmd_train(args) -> int:
    data = load_experiment_config(args.config) if args.config else {}
    experiment = data.get("experiment", {})
    scenario_name = args.scenario or experiment.get("scenario")
    if not scenario_name:
        raise ConfigError("no scenario given (use --scenario or [experiment] scenario)")
    params = CellParams(**data["cells"]) if "cells" in data else None
    scenario = make_scenario(scenario_name, params)
    tiling = make_tiling(scenario, data.get("tiling"))
    seed = args.seed if args.seed is not None else experiment.get("seed")
    config, checkpoint_every = make_train_config(data.get("train", {}), seed)
    if args.episodes is not None:
        config.episodes = args.episodes
    out_dir = args.out or experiment.get("out")
    if not out_dir:
        raise ConfigError("no output directory given (use --out or [experiment] out)")
    os.makedirs(out_dir, exist_ok=True)

    cache = EvaluationCache(os.path.join(out_dir, "evaluations.jsonl")) if not args.no_cache else None
    resume = agent.load_checkpoint(args.resume) if args.resume else None
    result = agent.train(
        scenario,
        tiling,
        config,
        cache=cache,
        resume_from=resume,
        checkpoint_dir=out_dir,
        checkpoint_every=checkpoint_every,
    )

    _write_curve_csv(os.path.join(out_dir, "curve.csv"), result.curve, append=resume is not None)
    agent.save_checkpoint(os.path.join(out_dir, "checkpoint.npz"), agent.result_snapshot(result))
    best_grid = scenario.grid.filled([catalog()[a] for a in result.best_placements], tiling)
    save_design(best_grid, scenario.params, os.path.join(out_dir, "best_design.json"))
    _design_svgs(scenario, best_grid, out_dir, "best_design")
    save_learning_curve_figure(result.curve, os.path.join(out_dir, "learning_curve.png"))
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "scenario": scenario.name,
                "episodes": result.episodes_done,
                "best_reward": result.best_reward,
                "best_episode": result.best_episode,
                "best_metrics": result.best_metrics,
                "final_moving_avg": result.curve[-1]["moving_avg"] if result.curve else None,
            },
            fh,
            indent=1,
            sort_keys=True,
        )
        fh.write("\n")
    print(
        f"trained {scenario.name} for {config.episodes} episodes; "
        f"best reward {result.best_reward:.4f} (episode {result.best_episode})"
    )
    print(f"artifacts in {out_dir}")
    return 0


def _random_rollout(env: PlacementEnv, rng: np.random.Generator):
    state = env.reset()
    done = False
    reward = 0.0
    while not done:
        state, reward, done = env.step(state, int(rng.integers(12)))
    return reward, state.placements


def _greedy_rollout(env: PlacementEnv):
    """One-step lookahead: score each action by the reward of the design
    completed with rigid fill, take the argmax (ties to the lowest index)."""
    from .env import EpisodeState

    rigid_action = catalog().index(CellKind.SQUARE_DDR)
    state = env.reset()
    done = False
    reward = 0.0
    while not done:
        best_action, best_value = 0, -np.inf
        for action in range(12):
            placements = list(state.placements)
            placements[state.t] = action
            for i in range(state.t + 1, env.horizon):
                placements[i] = rigid_action
            value, _ = env.evaluate_terminal(EpisodeState(env.horizon, tuple(placements)))
            if value > best_value:
                best_action, best_value = action, value
        state, reward, done = env.step(state, best_action)
    return reward, state.placements


def cmd_baseline(args) -> int:
    scenario = make_scenario(args.scenario)
    tiling = make_tiling(scenario, None)
    os.makedirs(args.out, exist_ok=True)
    cache = EvaluationCache() if args.policy == "greedy" else None
    env = PlacementEnv(scenario, tiling, cache=cache)
    rng = np.random.default_rng(args.seed)
    rewards, best = [], (-np.inf, None)
    for _ in range(args.n):
        if args.policy == "random":
            reward, placements = _random_rollout(env, rng)
        else:
            reward, placements = _greedy_rollout(env)
        rewards.append(reward)
        if reward > best[0]:
            best = (reward, placements)
    _write_csv(
        os.path.join(args.out, "rollouts.csv"),
        ["rollout", "reward"],
        [[i, _fmt(r)] for i, r in enumerate(rewards)],
    )
    stats = {
        "policy": args.policy,
        "n": args.n,
        "mean": float(np.mean(rewards)),
        "max": float(np.max(rewards)),
        "min": float(np.min(rewards)),
        "std": float(np.std(rewards)),
    }
    with open(os.path.join(args.out, "stats.json"), "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=1, sort_keys=True)
        fh.write("\n")
    best_grid = scenario.grid.filled([catalog()[a] for a in best[1]], tiling)
    save_design(best_grid, scenario.params, os.path.join(args.out, "best_design.json"))
    save_reward_histogram(rewards, os.path.join(args.out, "rewards.png"), f"{args.policy} rollouts")
    print(f"{args.policy} x{args.n}: mean {stats['mean']:.4f}, max {stats['max']:.4f}")
    return 0


def cmd_render(args) -> int:
    grid, params = load_design_checked(args.design)
    out = args.out or (os.path.splitext(args.design)[0] + ".svg")
    if args.scenario:
        scenario = make_scenario(args.scenario)
        if not _grid_matches_design_region(scenario, grid):
            raise ConfigError("design grid does not match the scenario")
        model = assemble(grid, scenario.params, scenario.material)
        try:
            field = solve(model, scenario.build_case(model))
        except SingularSystemError:
            field = None
        svg = model_svg(model, field)
    else:
        from .lattice import Material

        model = assemble(grid, params, Material())
        svg = model_svg(model)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mechrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("characterize", help="unit-cell load tables and ordering report")
    p.add_argument("--kinds", default="all", help="'all' or comma-separated cell codes")
    p.add_argument("--config", help="experiment TOML (cells block only)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("evaluate", help="score a design file under a scenario")
    p.add_argument("--design", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train", help="run Q-learning and emit curve/checkpoints/figures")
    p.add_argument("--config", help="experiment TOML")
    p.add_argument("--scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--out")
    p.add_argument("--resume", help="checkpoint file to continue from")
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="random or greedy rollout statistics")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policy", choices=("random", "greedy"), default="random")
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("render", help="render a design file to SVG")
    p.add_argument("--design", required=True)
    p.add_argument("--scenario", help="solve under this scenario and overlay the deformed shape")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SingularSystemError, RuntimeError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
