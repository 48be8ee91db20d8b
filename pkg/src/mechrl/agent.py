"""Dueling deep-Q agent: network, replay, TD targets, Adam, training loop.

The Q-network is a plain fully connected net in 64-bit floats: a trunk of
rectified-linear layers feeding two streams, one scoring the state (one
output) and one scoring per-action advantages (twelve outputs). The
streams recombine as Q = V + A - mean(A). Everything (initialization,
exploration, replay sampling) draws from a single seeded generator, so a
training run is a pure function of its configuration.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .env import N_ACTIONS, EvaluationCache, PlacementEnv, Transition
from .lattice import TilingOrder
from .mechanisms import Scenario

DEFAULT_TRUNK = (128, 256, 512, 256, 128)
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    """Hyperparameters of one training run.

    The published settings fix gamma, the learning rate, the batch size
    and the Adam optimizer; exploration, replay capacity, target-network
    cadence and net widths are this artifact's documented defaults and
    are all adjustable here.
    """

    episodes: int = 500
    gamma: float = 0.99
    lr: float = 1e-3
    batch_size: int = 64
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay: float = 0.995
    target_sync: int = 100
    buffer_capacity: int = 10_000
    seed: int = 0
    trunk: tuple[int, ...] = DEFAULT_TRUNK
    head_hidden: int = 64
    double_dqn: bool = False
    force_random_first_action: bool = False
    moving_avg_window: int = 50
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.lr <= 0 or self.batch_size < 1:
            raise ValueError("lr must be positive and batch_size >= 1")

    def epsilon_at(self, episode: int) -> float:
        return max(self.eps_end, self.eps_start * self.eps_decay**episode)


class NetworkParams:
    """Weights of the dueling Q-network.

    ``layers`` holds (W, b) pairs: the trunk, then the two advantage
    layers, then the two value layers. Initialization is uniform in
    +-1/sqrt(fan_in).
    """

    def __init__(self, trunk: list, adv: list, val: list):
        self.trunk = trunk
        self.adv = adv
        self.val = val

    @classmethod
    def init(
        cls,
        input_dim: int,
        rng: np.random.Generator,
        trunk: tuple[int, ...] = DEFAULT_TRUNK,
        head_hidden: int = 64,
        n_actions: int = N_ACTIONS,
    ) -> "NetworkParams":
        def layer(fan_in, fan_out):
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-bound, bound, size=fan_out)
            return [w, b]

        dims = [input_dim, *trunk]
        trunk_layers = [layer(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
        width = dims[-1]
        adv = [layer(width, head_hidden), layer(head_hidden, n_actions)]
        val = [layer(width, head_hidden), layer(head_hidden, 1)]
        return cls(trunk_layers, adv, val)

    @property
    def n_actions(self) -> int:
        return self.adv[-1][0].shape[1]

    @property
    def input_dim(self) -> int:
        return self.trunk[0][0].shape[0]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in [*self.trunk, *self.adv, *self.val]:
            out.extend((w, b))
        return out

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            [[w.copy(), b.copy()] for w, b in self.trunk],
            [[w.copy(), b.copy()] for w, b in self.adv],
            [[w.copy(), b.copy()] for w, b in self.val],
        )

    def load_from(self, other: "NetworkParams") -> None:
        for dst, src in zip(self.arrays(), other.arrays()):
            dst[...] = src


def _forward_cached(params: NetworkParams, x: np.ndarray):
    h = x
    trunk_pre, trunk_act = [], [x]
    for w, b in params.trunk:
        z = h @ w + b
        h = np.maximum(z, 0.0)
        trunk_pre.append(z)
        trunk_act.append(h)
    za1 = h @ params.adv[0][0] + params.adv[0][1]
    ha1 = np.maximum(za1, 0.0)
    advantages = ha1 @ params.adv[1][0] + params.adv[1][1]
    zv1 = h @ params.val[0][0] + params.val[0][1]
    hv1 = np.maximum(zv1, 0.0)
    value = hv1 @ params.val[1][0] + params.val[1][1]
    q = value + advantages - advantages.mean(axis=1, keepdims=True)
    cache = (trunk_pre, trunk_act, za1, ha1, zv1, hv1)
    return q, value, advantages, cache


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Q-values for one state vector or a batch of them."""
    single = x.ndim == 1
    q, _, _, _ = _forward_cached(params, np.atleast_2d(x))
    return q[0] if single else q


def forward_full(params: NetworkParams, x: np.ndarray):
    """(Q, V, A) with the aggregation Q = V + A - mean(A) applied."""
    single = x.ndim == 1
    q, v, a, _ = _forward_cached(params, np.atleast_2d(x))
    if single:
        return q[0], v[0], a[0]
    return q, v, a


def select_action(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the action set; greedy ties break to the lowest
    index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    n = len(q_values)
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(n))
    return int(np.argmax(q_values))


def loss_and_grads(params: NetworkParams, states: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean-squared TD error and its gradients w.r.t. every parameter."""
    q, _, _, cache = _forward_cached(params, states)
    trunk_pre, trunk_act, za1, ha1, zv1, hv1 = cache
    batch = len(states)
    idx = np.arange(batch)
    err = q[idx, actions] - targets
    loss = float(np.mean(err**2))

    dq = np.zeros_like(q)
    dq[idx, actions] = 2.0 * err / batch
    dadv = dq - dq.mean(axis=1, keepdims=True)
    dval = dq.sum(axis=1, keepdims=True)

    h_top = trunk_act[-1]
    # advantage stream
    dw_a2 = ha1.T @ dadv
    db_a2 = dadv.sum(axis=0)
    dza1 = (dadv @ params.adv[1][0].T) * (za1 > 0.0)
    dw_a1 = h_top.T @ dza1
    db_a1 = dza1.sum(axis=0)
    # value stream
    dw_v2 = hv1.T @ dval
    db_v2 = dval.sum(axis=0)
    dzv1 = (dval @ params.val[1][0].T) * (zv1 > 0.0)
    dw_v1 = h_top.T @ dzv1
    db_v1 = dzv1.sum(axis=0)

    dh = dza1 @ params.adv[0][0].T + dzv1 @ params.val[0][0].T
    trunk_grads = []
    for layer_index in range(len(params.trunk) - 1, -1, -1):
        dz = dh * (trunk_pre[layer_index] > 0.0)
        dw = trunk_act[layer_index].T @ dz
        db = dz.sum(axis=0)
        trunk_grads.append((dw, db))
        dh = dz @ params.trunk[layer_index][0].T
    trunk_grads.reverse()

    grads = []
    for dw, db in trunk_grads:
        grads.extend((dw, db))
    grads.extend((dw_a1, db_a1, dw_a2, db_a2, dw_v1, db_v1, dw_v2, db_v2))
    return loss, grads


class AdamState:
    """First/second-moment accumulators matching a parameter list."""

    def __init__(self, params: NetworkParams):
        self.m = [np.zeros_like(p) for p in params.arrays()]
        self.v = [np.zeros_like(p) for p in params.arrays()]
        self.t = 0


def adam_update(params: NetworkParams, grads, opt: AdamState, config: TrainConfig) -> None:
    opt.t += 1
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    bc1 = 1.0 - b1**opt.t
    bc2 = 1.0 - b2**opt.t
    for p, g, m, v in zip(params.arrays(), grads, opt.m, opt.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= config.lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


class ReplayBuffer:
    """Fixed-capacity ring of transitions with a uniform sampler."""

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def push(self, transition: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._cursor] = transition
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._items) < batch_size:
            raise ValueError("not enough transitions to sample")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


def td_targets(
    batch: list[Transition],
    gamma: float,
    target_params: NetworkParams,
    online_params: NetworkParams | None = None,
) -> np.ndarray:
    """One-step bootstrapped targets; terminal samples take the raw reward.

    With ``online_params`` given, the bootstrap action is chosen by the
    online network and valued by the target network (the double-DQN
    variant); otherwise the target network does both.
    """
    rewards = np.array([tr.reward for tr in batch])
    terminal = np.array([tr.terminal for tr in batch])
    targets = rewards.copy()
    if not np.all(terminal):
        next_states = np.stack([tr.next_state for tr in batch])
        q_next = forward(target_params, next_states)
        if online_params is not None:
            greedy = np.argmax(forward(online_params, next_states), axis=1)
            bootstrap = q_next[np.arange(len(batch)), greedy]
        else:
            bootstrap = q_next.max(axis=1)
        targets = np.where(terminal, rewards, rewards + gamma * bootstrap)
    return targets


def optimize_step(
    params: NetworkParams,
    target_params: NetworkParams,
    opt: AdamState,
    batch: list[Transition],
    config: TrainConfig,
) -> float:
    """One Adam step on the mean-squared TD error of ``batch``."""
    targets = td_targets(
        batch, config.gamma, target_params, params if config.double_dqn else None
    )
    states = np.stack([tr.state for tr in batch])
    actions = np.array([tr.action for tr in batch])
    loss, grads = loss_and_grads(params, states, actions, targets)
    if not np.isfinite(loss):
        raise RuntimeError(
            f"non-finite TD loss {loss} at optimize step {opt.t + 1}; "
            f"reward scale {np.abs(targets).max():.3g}, lr {config.lr}"
        )
    adam_update(params, grads, opt, config)
    return loss


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainResult:
    curve: list[dict]
    best_reward: float
    best_placements: tuple[int, ...]
    best_metrics: dict
    best_episode: int
    params: NetworkParams
    target_params: NetworkParams
    opt: AdamState
    episodes_done: int
    rng_state: dict
    config: TrainConfig


def train(
    scenario: Scenario,
    tiling: TilingOrder | None = None,
    config: TrainConfig = TrainConfig(),
    cache: EvaluationCache | None = None,
    resume_from: dict | None = None,
    checkpoint_dir=None,
    checkpoint_every: int = 0,
    on_episode=None,
) -> TrainResult:
    """Run episodic Q-learning on a scenario's placement environment.

    Fully deterministic under ``config.seed``. ``resume_from`` takes the
    payload of :func:`load_checkpoint` and continues the episode
    numbering (the replay buffer restarts empty). ``on_episode`` receives
    each finished curve row, e.g. for live logging.
    """
    env = PlacementEnv(scenario, tiling, cache=cache)
    input_dim = env.horizon * (N_ACTIONS + 1)

    if resume_from is not None:
        params = resume_from["params"]
        target = resume_from["target_params"]
        opt = resume_from["opt"]
        rng = np.random.default_rng()
        rng.bit_generator.state = resume_from["rng_state"]
        start_episode = resume_from["episode"]
        best_reward = resume_from["best_reward"]
        best_placements = tuple(resume_from["best_placements"])
        best_metrics = resume_from.get("best_metrics", {})
        best_episode = resume_from.get("best_episode", -1)
        if params.input_dim != input_dim:
            raise ValueError("checkpoint was trained on a different state encoding")
    else:
        rng = np.random.default_rng(config.seed)
        params = NetworkParams.init(input_dim, rng, config.trunk, config.head_hidden)
        target = params.copy()
        opt = AdamState(params)
        start_episode = 0
        best_reward = -np.inf
        best_placements = ()
        best_metrics = {}
        best_episode = -1

    buffer = ReplayBuffer(config.buffer_capacity)
    curve: list[dict] = []
    recent: list[float] = []

    for episode in range(start_episode, start_episode + config.episodes):
        epsilon = config.epsilon_at(episode)
        state = env.reset()
        x = env.encode(state)
        terminal_reward = 0.0
        metrics: dict = {}
        for t in range(env.horizon):
            if t == 0 and config.force_random_first_action:
                action = int(rng.integers(N_ACTIONS))
            else:
                action = select_action(forward(params, x), epsilon, rng)
            state, reward, done = env.step(state, action)
            x_next = env.encode(state)
            buffer.push(Transition(x, action, reward, x_next, done))
            x = x_next
            if done:
                terminal_reward = reward
            if len(buffer) >= config.batch_size:
                optimize_step(params, target, opt, buffer.sample(config.batch_size, rng), config)
                if opt.t % config.target_sync == 0:
                    target.load_from(params)
        _, metrics = env.evaluate_terminal(state)
        if terminal_reward > best_reward:
            best_reward = terminal_reward
            best_placements = state.placements
            best_metrics = dict(metrics)
            best_episode = episode
        recent.append(terminal_reward)
        if len(recent) > config.moving_avg_window:
            recent.pop(0)
        row = {
            "episode": episode,
            "reward": terminal_reward,
            "moving_avg": float(np.mean(recent)),
            "epsilon": epsilon,
            "disconnections": int(metrics.get("disconnections", 0)),
        }
        curve.append(row)
        if on_episode is not None:
            on_episode(row)
        if (
            checkpoint_dir is not None
            and checkpoint_every > 0
            and (episode + 1) % checkpoint_every == 0
        ):
            save_checkpoint(
                os.path.join(checkpoint_dir, f"checkpoint_ep{episode + 1:06d}.npz"),
                _snapshot(params, target, opt, rng, episode + 1, best_reward, best_placements, best_metrics, best_episode),
            )

    return TrainResult(
        curve=curve,
        best_reward=best_reward,
        best_placements=best_placements,
        best_metrics=best_metrics,
        best_episode=best_episode,
        params=params,
        target_params=target,
        opt=opt,
        episodes_done=start_episode + config.episodes,
        rng_state=rng.bit_generator.state,
        config=config,
    )


def _snapshot(params, target, opt, rng, episode, best_reward, best_placements, best_metrics, best_episode):
    return {
        "params": params,
        "target_params": target,
        "opt": opt,
        "rng_state": rng.bit_generator.state,
        "episode": episode,
        "best_reward": best_reward,
        "best_placements": tuple(best_placements),
        "best_metrics": dict(best_metrics),
        "best_episode": best_episode,
    }


def result_snapshot(result: TrainResult) -> dict:
    rng = np.random.default_rng()
    rng.bit_generator.state = result.rng_state
    return _snapshot(
        result.params,
        result.target_params,
        result.opt,
        rng,
        result.episodes_done,
        result.best_reward,
        result.best_placements,
        result.best_metrics,
        result.best_episode,
    )


# ---------------------------------------------------------------------------
# Checkpoints: a single .npz holding every weight and Adam moment plus a
# JSON header (version, episode counter, RNG state, best design so far).
# Writes are atomic (temp file + rename).


def _pack_params(prefix: str, params: NetworkParams, payload: dict):
    for i, arr in enumerate(params.arrays()):
        payload[f"{prefix}{i:03d}"] = arr


def save_checkpoint(path, snapshot: dict) -> None:
    params: NetworkParams = snapshot["params"]
    target: NetworkParams = snapshot["target_params"]
    opt: AdamState = snapshot["opt"]
    header = {
        "version": CHECKPOINT_VERSION,
        "episode": snapshot["episode"],
        "adam_t": opt.t,
        "rng_state": snapshot["rng_state"],
        "best_reward": snapshot["best_reward"],
        "best_placements": list(snapshot["best_placements"]),
        "best_metrics": snapshot["best_metrics"],
        "best_episode": snapshot["best_episode"],
        "trunk_sizes": [list(w.shape) for w, _ in params.trunk],
        "head_hidden": params.adv[0][0].shape[1],
    }
    payload: dict = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    _pack_params("online", params, payload)
    _pack_params("target", target, payload)
    for i, arr in enumerate(opt.m):
        payload[f"adam_m{i:03d}"] = arr
    for i, arr in enumerate(opt.v):
        payload[f"adam_v{i:03d}"] = arr
    directory = os.path.dirname(os.fspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npz.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _unpack_params(prefix: str, data, trunk_count: int) -> NetworkParams:
    arrays = []
    i = 0
    while f"{prefix}{i:03d}" in data:
        arrays.append(data[f"{prefix}{i:03d}"].copy())
        i += 1
    pairs = [[arrays[j], arrays[j + 1]] for j in range(0, len(arrays), 2)]
    return NetworkParams(pairs[:trunk_count], pairs[trunk_count : trunk_count + 2], pairs[trunk_count + 2 :])


def load_checkpoint(path) -> dict:
    """Inverse of :func:`save_checkpoint`; returns a resume payload."""
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        trunk_count = len(header["trunk_sizes"])
        params = _unpack_params("online", data, trunk_count)
        target = _unpack_params("target", data, trunk_count)
        opt = AdamState(params)
        opt.t = header["adam_t"]
        opt.m = [data[f"adam_m{i:03d}"].copy() for i in range(len(opt.m))]
        opt.v = [data[f"adam_v{i:03d}"].copy() for i in range(len(opt.v))]
    rng_state = header["rng_state"]
    return {
        "params": params,
        "target_params": target,
        "opt": opt,
        "rng_state": rng_state,
        "episode": header["episode"],
        "best_reward": header["best_reward"],
        "best_placements": tuple(header["best_placements"]),
        "best_metrics": header["best_metrics"],
        "best_episode": header["best_episode"],
    }
