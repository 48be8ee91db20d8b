"""Sequential cell-placement environment.

An episode walks a tiling order over the design slots of a scenario; each
step places one of the twelve cells at the next position. Transitions are
deterministic, intermediate rewards are zero, and the terminal reward is
the scenario's FE-backed score of the completed design. Terminal
evaluations are memoized in a content-addressed cache that can persist to
an append-only record log.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass

import numpy as np

from .cells import catalog
from .fea import SingularSystemError
from .lattice import TilingOrder, tiling_order
from .mechanisms import Scenario, scenario_to_dict

N_ACTIONS = 12
CHANNELS = N_ACTIONS + 1  # empty + one per cell kind


@dataclass(frozen=True)
class EpisodeState:
    """Partial configuration: placements[i] is the action taken at tiling
    position i, or -1 while empty. ``t`` counts placed cells."""

    t: int
    placements: tuple[int, ...]

    @property
    def terminal(self) -> bool:
        return self.t == len(self.placements)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class EvaluationCache:
    """Content-addressed reward cache with an append-only record log.

    Each record is one JSON line ``{"key": ..., "reward": ..., "metrics":
    ...}``. A corrupt trailing record (torn write) is truncated away on
    load; corruption earlier in the file is an error. Safe for concurrent
    insert/lookup; values are deterministic so duplicate writes are benign.
    """

    def __init__(self, path=None):
        self.path = os.fspath(path) if path is not None else None
        self._data: dict[str, tuple[float, dict]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path is not None and os.path.exists(self.path):
            self._load()

    def _load(self):
        good_end = 0
        with open(self.path, "rb") as fh:
            raw = fh.read()
        lines = raw.split(b"\n")
        for i, line in enumerate(lines):
            if not line:
                continue
            try:
                record = json.loads(line)
                self._data[record["key"]] = (record["reward"], record["metrics"])
                good_end += len(line) + 1
            except (json.JSONDecodeError, KeyError, UnicodeDecodeError):
                trailing = all(not rest for rest in lines[i + 1 :])
                if not trailing:
                    raise ValueError(f"corrupt cache record mid-file in {self.path}")
                with open(self.path, "r+b") as fh:
                    fh.truncate(good_end)
                break

    def get(self, key: str):
        with self._lock:
            value = self._data.get(key)
        if value is None:
            self.misses += 1
        else:
            self.hits += 1
        return value

    def put(self, key: str, reward: float, metrics: dict) -> None:
        with self._lock:
            if key in self._data:
                return
            self._data[key] = (reward, metrics)
            if self.path is not None:
                record = json.dumps({"key": key, "reward": reward, "metrics": metrics})
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(record + "\n")

    def __len__(self):
        return len(self._data)


def scenario_fingerprint(scenario: Scenario) -> str:
    """Stable hash of everything that affects a terminal evaluation."""
    payload = json.dumps(scenario_to_dict(scenario), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


class PlacementEnv:
    """Deterministic MDP over cell placements along one tiling order."""

    def __init__(
        self,
        scenario: Scenario,
        tiling: TilingOrder | None = None,
        cache: EvaluationCache | None = None,
    ):
        self.scenario = scenario
        self.tiling = tiling or tiling_order(
            scenario.grid,
            scenario.tiling.strategy,
            scenario.tiling.direction,
            scenario.tiling.axis,
        )
        self.cache = cache
        self.horizon = scenario.horizon
        self.kinds = catalog()
        self._fingerprint = scenario_fingerprint(scenario)
        self._last_eval = None  # (placements, reward, metrics) of the newest design
        if len(self.tiling.order) != self.horizon:
            raise ValueError("tiling order does not cover the design slots")

    # -- MDP interface ------------------------------------------------------

    def reset(self) -> EpisodeState:
        return EpisodeState(0, (-1,) * self.horizon)

    def encode(self, state: EpisodeState) -> np.ndarray:
        """One-hot block per tiling position over {empty} + 12 kinds."""
        x = np.zeros((self.horizon, CHANNELS))
        placements = np.asarray(state.placements)
        x[np.arange(self.horizon), placements + 1] = 1.0
        return x.reshape(-1)

    def step(self, state: EpisodeState, action: int):
        """Place ``action`` at tiling position t. Returns
        ``(next_state, reward, done)``; reward is zero before the horizon."""
        if state.terminal:
            raise ValueError("step on a terminal state")
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"action must be in [0, {N_ACTIONS})")
        placements = list(state.placements)
        placements[state.t] = action
        nxt = EpisodeState(state.t + 1, tuple(placements))
        if not nxt.terminal:
            return nxt, 0.0, False
        reward, _ = self.evaluate_terminal(nxt)
        return nxt, reward, True

    # -- terminal evaluation --------------------------------------------------

    def design_key(self, state: EpisodeState) -> str:
        h = hashlib.sha256(self._fingerprint.encode())
        h.update(np.asarray(state.placements, dtype=np.int8).tobytes())
        return h.hexdigest()

    def filled_grid(self, state: EpisodeState):
        kinds = [self.kinds[a] for a in state.placements]
        return self.scenario.grid.filled(kinds, self.tiling)

    def evaluate_terminal(self, state: EpisodeState):
        """FE-backed reward of a completed design, memoized by content.

        Unsolvable designs (floating loaded parts) score the scenario's
        floor reward instead of raising, so the reward function is total.
        """
        if not state.terminal:
            raise ValueError("evaluate_terminal needs a terminal state")
        memo = self._last_eval
        if memo is not None and memo[0] == state.placements:
            return memo[1], dict(memo[2])
        key = self.design_key(state)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                self._last_eval = (state.placements, hit[0], dict(hit[1]))
                return hit[0], dict(hit[1])
        grid = self.filled_grid(state)
        try:
            reward, metrics = self.scenario.evaluate(grid)
        except SingularSystemError:
            from .lattice import assemble, count_disconnected_hinges

            model = assemble(grid, self.scenario.params, self.scenario.material)
            reward = self.scenario.floor_reward
            metrics = {"disconnections": count_disconnected_hinges(model), "singular": True}
        if self.cache is not None:
            self.cache.put(key, reward, metrics)
        self._last_eval = (state.placements, reward, dict(metrics))
        return reward, dict(metrics)
