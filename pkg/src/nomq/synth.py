"""Layer synthesis: a PPO reinforcement-learning synthesizer and a greedy fallback.

Both synthesizers build a shallow appended layer gate by gate from single- and
two-site Pauli rotations, re-optimizing all layer angles after every addition,
until the layer maps the initial state onto the target with fidelity above the
threshold or the depth cap is hit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .pqc import Circuit, Gate, _apply_with_angles, _optimize_overlap, _pauli_action, _rotation_factors
from .qcore import fidelity

DEFAULT_GATE_SET = ("RX", "RY", "RZ", "RXX", "RYY", "RZZ")
STEP_OPT_BUDGET = 100
FINAL_POLISH_BUDGET = 500


@dataclass
class SynthEnv:
    """State-to-state synthesis task: reach `target` from `initial`."""

    initial: np.ndarray
    target: np.ndarray
    gate_set: tuple[str, ...] = DEFAULT_GATE_SET
    max_depth: int = 10
    fidelity_threshold: float = 0.998
    gate_penalty: float = 0.01

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=complex)
        self.target = np.asarray(self.target, dtype=complex)
        if self.initial.shape != self.target.shape:
            raise ValueError("initial and target dimensions differ")
        if not 0 < self.fidelity_threshold < 1:
            raise ValueError("fidelity threshold must be in (0, 1)")
        if self.gate_penalty < 0:
            raise ValueError("gate penalty must be non-negative")

    @property
    def n_qubits(self) -> int:
        n = int(round(math.log2(self.initial.size)))
        if 1 << n != self.initial.size:
            raise ValueError("state dimension is not a power of two")
        return n


def action_space(n_qubits: int, gate_set=DEFAULT_GATE_SET) -> list[tuple[str, tuple[int, ...]]]:
    """Deterministic enumeration: single-site kinds per site, two-site kinds per unordered pair."""
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    actions = []
    for kind in gate_set:
        if kind in ("RX", "RY", "RZ"):
            actions.extend((kind, (q,)) for q in range(n_qubits))
        else:
            actions.extend((kind, (a, b)) for a in range(n_qubits) for b in range(a + 1, n_qubits))
    return actions


def reward(f: float, f_prev: float, env: SynthEnv, depth: int) -> float:
    """Episode reward: 10 at threshold, -5 at the depth cap, shaped progress otherwise.

    The progress ratio is clipped into [-1, 1]; inside an episode f_prev is
    always below the threshold, so the upper clip never binds there.
    """
    if not (0 <= f <= 1 and 0 <= f_prev <= 1):
        raise ValueError("fidelities must lie in [0, 1]")
    if f >= env.fidelity_threshold:
        return 10.0
    if depth >= env.max_depth:
        return -5.0
    denom = env.fidelity_threshold - f_prev
    ratio = 0.0 if denom == 0 else (f - f_prev) / denom
    return min(max(ratio, -1.0), 1.0) - env.gate_penalty


def _gauge_fixed(state: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude amplitude is real positive."""
    j = int(np.argmax(np.abs(state)))
    a = state[j]
    if abs(a) < 1e-12:
        return state
    return state * (abs(a) / a)


def _features(current: np.ndarray, target: np.ndarray) -> np.ndarray:
    cur = _gauge_fixed(current)
    tgt = _gauge_fixed(target)
    return np.concatenate([cur.real, cur.imag, tgt.real, tgt.imag])


class EpisodeRunner:
    """Gate-by-gate construction of one layer, with per-step full re-optimization."""

    def __init__(self, env: SynthEnv, opt_budget: int = STEP_OPT_BUDGET, opt_seed: int = 0):
        self.env = env
        self.actions = action_space(env.n_qubits, env.gate_set)
        self.opt_budget = opt_budget
        self.opt_seed = opt_seed
        self.reset()

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def reset(self) -> np.ndarray:
        self.gates: list[Gate] = []
        self.angles = np.zeros(0)
        self.state = self.env.initial.copy()
        self.fid = fidelity(self.env.target, self.env.initial)
        self.done = self.fid >= self.env.fidelity_threshold
        return _features(self.state, self.env.target)

    def circuit(self) -> Circuit:
        return Circuit(self.env.n_qubits, tuple(self.gates), len(self.gates))

    def step(self, action_idx: int) -> tuple[np.ndarray, float, bool, dict]:
        if self.done:
            raise RuntimeError("episode already finished")
        kind, qubits = self.actions[action_idx]
        self.gates.append(Gate(kind, qubits, len(self.gates)))
        # the appended gate starts at identity; the optimizer's first move is
        # its closed-form 1-D optimum, then a joint polish of all angles
        guess, _ = _best_angle(
            self.env.target, self.state, _rotation_factors(self.env.n_qubits, kind, qubits)
        )
        theta0 = np.concatenate([self.angles, [guess]])
        circuit = self.circuit()
        theta, infid = _optimize_overlap(
            circuit, theta0, self.env.initial, self.env.target,
            budget=self.opt_budget, seed=self.opt_seed,
            stop_below=1.0 - self.env.fidelity_threshold,
            restarts=False,
        )
        self.angles = theta
        f_prev = self.fid
        self.fid = 1.0 - infid
        self.state = _apply_with_angles(circuit, theta, self.env.initial)
        r = reward(self.fid, f_prev, self.env, len(self.gates))
        self.done = self.fid >= self.env.fidelity_threshold or len(self.gates) >= self.env.max_depth
        return _features(self.state, self.env.target), r, self.done, {"fidelity": self.fid}


@dataclass
class PPOConfig:
    gamma: float = 0.99
    n_epochs: int = 4
    clip_range: float = 0.2
    learning_rate: float = 1e-4
    hidden_sizes: tuple[int, ...] = (64, 64)
    total_steps: int = 30_000
    seed: int = 0
    batch_episodes: int = 16
    vf_coef: float = 0.5
    stop_when_solved: bool = True

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("discount gamma must be in (0, 1]")
        if self.clip_range <= 0:
            raise ValueError("clip range must be positive")


@dataclass
class PolicyNet:
    """Two-head MLP (tanh trunk): action logits and a scalar value baseline."""

    params: dict[str, np.ndarray]
    hidden_sizes: tuple[int, ...]

    @classmethod
    def create(cls, in_dim: int, hidden_sizes: tuple[int, ...], n_actions: int, rng) -> "PolicyNet":
        params = {}
        sizes = (in_dim,) + tuple(hidden_sizes)
        for i in range(len(hidden_sizes)):
            params[f"W{i}"] = rng.normal(0.0, np.sqrt(2.0 / sizes[i]), (sizes[i], sizes[i + 1]))
            params[f"b{i}"] = np.zeros(sizes[i + 1])
        params["Wpi"] = rng.normal(0.0, 0.01, (sizes[-1], n_actions))
        params["bpi"] = np.zeros(n_actions)
        params["Wv"] = rng.normal(0.0, 0.1, (sizes[-1], 1))
        params["bv"] = np.zeros(1)
        return cls(params=params, hidden_sizes=tuple(hidden_sizes))

    @property
    def n_actions(self) -> int:
        return self.params["bpi"].size

    def _trunk(self, x: np.ndarray) -> list[np.ndarray]:
        acts = [np.atleast_2d(x)]
        for i in range(len(self.hidden_sizes)):
            acts.append(np.tanh(acts[-1] @ self.params[f"W{i}"] + self.params[f"b{i}"]))
        return acts

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = self._trunk(x)[-1]
        logits = h @ self.params["Wpi"] + self.params["bpi"]
        value = (h @ self.params["Wv"] + self.params["bv"])[:, 0]
        return logits, value

    def act(self, obs: np.ndarray, rng) -> tuple[int, float, float]:
        logits, value = self.forward(obs)
        logp = _log_softmax(logits)[0]
        a = int(rng.choice(logp.size, p=np.exp(logp)))
        return a, float(logp[a]), float(value[0])

    def greedy(self, obs: np.ndarray, forbid: int | None = None) -> int:
        logits, _ = self.forward(obs)
        order = np.argsort(-logits[0])
        if forbid is not None and order[0] == forbid and order.size > 1:
            return int(order[1])
        return int(order[0])

    def save(self, path: str) -> None:
        np.savez(path, hidden_sizes=np.array(self.hidden_sizes), **self.params)

    @classmethod
    def load(cls, path: str) -> "PolicyNet":
        data = np.load(path)
        hidden = tuple(int(h) for h in data["hidden_sizes"])
        params = {k: data[k] for k in data.files if k != "hidden_sizes"}
        return cls(params=params, hidden_sizes=hidden)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float):
        self.lr = lr
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mh = self.m[k] / (1 - b1**self.t)
            vh = self.v[k] / (1 - b2**self.t)
            params[k] -= self.lr * mh / (np.sqrt(vh) + eps)


def _ppo_update(net: PolicyNet, opt: _Adam, batch: dict, cfg: PPOConfig) -> None:
    obs, actions = batch["obs"], batch["actions"]
    logp_old, returns, adv = batch["logp"], batch["returns"], batch["adv"]
    n = obs.shape[0]
    one_hot = np.zeros((n, net.n_actions))
    one_hot[np.arange(n), actions] = 1.0

    acts = net._trunk(obs)
    h = acts[-1]
    logits = h @ net.params["Wpi"] + net.params["bpi"]
    values = (h @ net.params["Wv"] + net.params["bv"])[:, 0]
    logp_all = _log_softmax(logits)
    logp = logp_all[np.arange(n), actions]
    ratio = np.exp(logp - logp_old)

    # clipped surrogate: gradient flows only where the unclipped branch is active
    clipped_off = ((adv > 0) & (ratio > 1 + cfg.clip_range)) | ((adv < 0) & (ratio < 1 - cfg.clip_range))
    coef = np.where(clipped_off, 0.0, adv * ratio) / n
    dlogits = -coef[:, None] * (one_hot - np.exp(logp_all))
    dvalues = cfg.vf_coef * 2.0 * (values - returns) / n

    grads = {}
    grads["Wpi"] = h.T @ dlogits
    grads["bpi"] = dlogits.sum(axis=0)
    grads["Wv"] = h.T @ dvalues[:, None]
    grads["bv"] = np.array([dvalues.sum()])
    dh = dlogits @ net.params["Wpi"].T + dvalues[:, None] @ net.params["Wv"].T
    for i in reversed(range(len(net.hidden_sizes))):
        dz = dh * (1.0 - acts[i + 1] ** 2)
        grads[f"W{i}"] = acts[i].T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        dh = dz @ net.params[f"W{i}"].T
    opt.update(net.params, grads)


@dataclass
class EpisodeStat:
    episode: int
    ret: float
    best_fidelity: float


@dataclass
class TrainResult:
    policy: PolicyNet
    episodes: list[EpisodeStat]
    env_steps: int
    solved: bool


def ppo_train(env: SynthEnv, cfg: PPOConfig) -> TrainResult:
    """Clipped-surrogate policy-gradient training over synthesis episodes.

    Per episode: sample an action, append the gate, re-optimize all layer
    angles, score the reward, stop at the fidelity threshold or depth cap.
    Advantages are discounted returns minus the value baseline; each batch
    gets `n_epochs` update passes.  With `stop_when_solved`, training halts
    as soon as a greedy rollout reaches the threshold.
    """
    rng = np.random.default_rng(cfg.seed)
    runner = EpisodeRunner(env)
    in_dim = 4 * env.initial.size
    net = PolicyNet.create(in_dim, cfg.hidden_sizes, runner.n_actions, rng)
    opt = _Adam(net.params, cfg.learning_rate)

    stats: list[EpisodeStat] = []
    steps = 0
    runner.reset()
    solved = runner.done  # zero-distance target
    best_decode = -1.0
    best_params = {k: v.copy() for k, v in net.params.items()}
    while steps < cfg.total_steps and not (cfg.stop_when_solved and solved):
        obs_b, act_b, logp_b, ret_b, val_b = [], [], [], [], []
        for _ in range(cfg.batch_episodes):
            obs = runner.reset()
            if runner.done:
                stats.append(EpisodeStat(len(stats), 10.0, runner.fid))
                solved = True
                break
            rewards, ep_obs, ep_act, ep_logp, ep_val = [], [], [], [], []
            best_f = runner.fid
            while not runner.done:
                a, lp, v = net.act(obs, rng)
                nxt, r, done, info = runner.step(a)
                ep_obs.append(obs)
                ep_act.append(a)
                ep_logp.append(lp)
                ep_val.append(v)
                rewards.append(r)
                best_f = max(best_f, info["fidelity"])
                obs = nxt
                steps += 1
            g = 0.0
            returns = np.zeros(len(rewards))
            for i in reversed(range(len(rewards))):
                g = rewards[i] + cfg.gamma * g
                returns[i] = g
            obs_b.extend(ep_obs)
            act_b.extend(ep_act)
            logp_b.extend(ep_logp)
            val_b.extend(ep_val)
            ret_b.extend(returns)
            stats.append(EpisodeStat(len(stats), float(returns[0]), best_f))
            if steps >= cfg.total_steps:
                break
        if obs_b:
            adv = np.asarray(ret_b) - np.asarray(val_b)
            if adv.size > 1 and adv.std() > 1e-8:
                adv = (adv - adv.mean()) / adv.std()
            batch = {
                "obs": np.asarray(obs_b),
                "actions": np.asarray(act_b, dtype=int),
                "logp": np.asarray(logp_b),
                "returns": np.asarray(ret_b),
                "adv": adv,
            }
            for _ in range(cfg.n_epochs):
                _ppo_update(net, opt, batch, cfg)
        # keep the best-decoding snapshot; PPO on small batches can drift away
        # from a policy that already decodes well
        _, _, f = synthesize_rl(net, env)
        if f > best_decode:
            best_decode = f
            best_params = {k: v.copy() for k, v in net.params.items()}
        if cfg.stop_when_solved:
            solved = solved or best_decode >= env.fidelity_threshold
    net.params = best_params
    return TrainResult(policy=net, episodes=stats, env_steps=steps, solved=solved)


def synthesize_rl(policy: PolicyNet, env: SynthEnv) -> tuple[Circuit, np.ndarray, float]:
    """Greedy rollout of a trained policy; returns (layer, angles, fidelity).

    Decoding skips an immediate repeat of the previous action (a repeated
    rotation merges into the preceding gate and adds nothing).
    """
    runner = EpisodeRunner(env)
    obs = runner.reset()
    prev = None
    while not runner.done:
        a = policy.greedy(obs, forbid=prev)
        obs, _, _, _ = runner.step(a)
        prev = a
    circuit = runner.circuit()
    theta, infid = _optimize_overlap(
        circuit, runner.angles, env.initial, env.target, budget=FINAL_POLISH_BUDGET, seed=0,
        stop_below=0.1 * (1.0 - env.fidelity_threshold),
    )
    return circuit, theta, 1.0 - infid


def _best_angle(target: np.ndarray, current: np.ndarray, factors: str) -> tuple[float, float]:
    """Exact optimum of |<target| R(theta) |current>|^2 over the rotation angle.

    The overlap is sinusoidal in theta, so the maximizer is closed-form from
    two inner products.
    """
    src, phase = _pauli_action(factors)
    a = np.vdot(target, current)
    b = np.vdot(target, phase * current[src])
    alpha = (abs(a) ** 2 + abs(b) ** 2) / 2.0
    beta = (abs(a) ** 2 - abs(b) ** 2) / 2.0
    gamma = float(np.imag(np.conjugate(a) * b))
    theta = math.atan2(gamma, beta)
    best = alpha + math.hypot(beta, gamma)
    return theta, float(best)


def _rotate(state: np.ndarray, factors: str, theta: float) -> np.ndarray:
    src, phase = _pauli_action(factors)
    return math.cos(theta / 2) * state - 1j * math.sin(theta / 2) * (phase * state[src])


def _best_pair(target, current, actions, factor_table, n_grid: int = 25):
    """Best two-gate addition: outer angle grid, inner closed-form optimum.

    Gradient-step targets can sit first-order orthogonal to every
    single-rotation orbit; the gain then lives in commutator directions,
    which need two gates.
    """
    best = (-1.0, None)
    grid = np.linspace(-math.pi, math.pi, n_grid, endpoint=False)
    for i1, (kind1, qubits1) in enumerate(actions):
        f1 = factor_table[i1]
        for th1 in grid:
            mid = _rotate(current, f1, float(th1))
            for i2, (kind2, qubits2) in enumerate(actions):
                th2, f = _best_angle(target, mid, factor_table[i2])
                if f > best[0]:
                    best = (f, (i1, float(th1), i2, th2))
    return best


def synthesize_greedy(env: SynthEnv) -> tuple[Circuit, np.ndarray, float]:
    """Deterministic layer builder: closed-form single-gate gains, pair fallback, polish.

    Scans every action with the analytic 1-D angle optimum; when no single
    gate improves, scans two-gate additions instead.  Every addition is
    followed by a joint re-polish of all layer angles; stops at the
    threshold, the depth cap, or when nothing helps.
    """
    actions = action_space(env.n_qubits, env.gate_set)
    factor_table = [_rotation_factors(env.n_qubits, k, q) for k, q in actions]
    gates: list[Gate] = []
    angles = np.zeros(0)
    fid = fidelity(env.target, env.initial)
    current = env.initial.copy()
    gain_tol = 1e-9
    while fid < env.fidelity_threshold and len(gates) < env.max_depth:
        best = None
        for i, (kind, qubits) in enumerate(actions):
            theta, f = _best_angle(env.target, current, factor_table[i])
            if best is None or f > best[0]:
                best = (f, i, theta)
        new = []
        if best[0] > fid + gain_tol:
            _, i, theta = best
            new = [(actions[i], theta)]
        elif len(gates) + 2 <= env.max_depth:
            f2, pick = _best_pair(env.target, current, actions, factor_table)
            if pick is not None and f2 > fid + gain_tol:
                i1, th1, i2, th2 = pick
                new = [(actions[i1], th1), (actions[i2], th2)]
        if not new:
            break
        for (kind, qubits), theta in new:
            gates.append(Gate(kind, qubits, len(gates)))
            angles = np.concatenate([angles, [theta]])
        circuit = Circuit(env.n_qubits, tuple(gates), len(gates))
        angles, infid = _optimize_overlap(
            circuit, angles, env.initial, env.target, budget=STEP_OPT_BUDGET, seed=0,
            stop_below=0.1 * (1.0 - env.fidelity_threshold),
        )
        fid = max(fid, 1.0 - infid)
        current = _apply_with_angles(circuit, angles, env.initial)
    circuit = Circuit(env.n_qubits, tuple(gates), len(gates))
    if gates:
        angles, infid = _optimize_overlap(
            circuit, angles, env.initial, env.target, budget=FINAL_POLISH_BUDGET, seed=0,
            stop_below=0.1 * (1.0 - env.fidelity_threshold),
        )
        fid = 1.0 - infid
        current = _apply_with_angles(circuit, angles, env.initial)
    return circuit, angles, float(fid)


def write_training_curve(stats: list[EpisodeStat], path: str) -> None:
    """Training-curve CSV: one row per episode."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "return", "best_fidelity"])
        for s in stats:
            writer.writerow([s.episode, repr(s.ret), repr(s.best_fidelity)])
