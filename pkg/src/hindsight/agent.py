"""Goal-conditioned DDPG with hindsight relabeling.

Actor and critic see the observation concatenated with the goal. The
critic additionally receives the action at its input. Exploration mixes
greedy, Gaussian-perturbed and uniformly random actions with a per-epoch
decaying epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import nn
from .envs import make_env
from .envs.base import GoalEnv, rollout
from .exceptions import ConfigurationError, NumericError, ShapeError
from .goals import GridSpec, UniformRect, build_target_grid, kl_divergence, histogram
from .metrics import evaluate_policy, evaluate_with_bias
from .relabel import (VARIANTS, EpisodeTrajectory, HerConfig, IbsState, anneal_sigma,
                      relabel_episode)
from .replay import PrioritizedReplay


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.98
    buffer_capacity: int = 1_000_000
    epsilon_init: float = 1.0
    epsilon_decay: float = 0.95
    epsilon_final: float = 0.05
    noise_scale_fraction: float = 0.05
    batch_size: int = 64
    learning_rate: float = 1e-3
    clip_norm: float = 3.0
    optimizer: str = "adam"
    hidden_sizes: tuple = (64, 64, 64)
    critic_normalization: str = "input"    # "input", "all" layers or "none"
    actor_normalization: str = "input"
    output_init_scale: float = 3e-3
    action_l2: float = 0.0
    binary_action_selection: str = "critic"    # "critic" argmax or the "actor" output sign
    target_sync_mode: str = "hard"
    target_sync_period: int = 7
    polyak_tau: float = 0.05
    epochs: int = 50
    cycles_per_epoch: int = 50
    episodes_per_cycle: int = 16
    optimization_steps_per_cycle: int = 40
    n_eval_episodes: int = 50
    clamp_targets: bool = True

    def __post_init__(self):
        for name in ("critic_normalization", "actor_normalization"):
            value = getattr(self, name)
            if isinstance(value, bool):
                object.__setattr__(self, name, "all" if value else "none")
            if getattr(self, name) not in ("input", "all", "none"):
                raise ConfigurationError(f"{name} must be 'input', 'all' or 'none'")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError("gamma must lie in [0, 1]")
        if not 0.0 < self.epsilon_final <= self.epsilon_init <= 1.0:
            raise ConfigurationError("need 0 < epsilon_final <= epsilon_init <= 1")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigurationError("epsilon_decay must lie in (0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < 1:
            raise ConfigurationError("batch_size and buffer_capacity must be positive")
        if self.target_sync_mode not in ("hard", "polyak"):
            raise ConfigurationError("target_sync_mode must be 'hard' or 'polyak'")
        if self.target_sync_period < 1:
            raise ConfigurationError("target_sync_period must be positive")
        for name in ("epochs", "cycles_per_epoch", "episodes_per_cycle",
                     "optimization_steps_per_cycle"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.n_eval_episodes < 1:
            raise ConfigurationError("n_eval_episodes must be at least 1")
        if self.action_l2 < 0:
            raise ConfigurationError("action_l2 must be non-negative")
        if self.binary_action_selection not in ("critic", "actor"):
            raise ConfigurationError("binary_action_selection must be 'critic' or 'actor'")

    def epsilon_at(self, epoch: int) -> float:
        return max(self.epsilon_final, self.epsilon_init * self.epsilon_decay ** epoch)


@dataclass(frozen=True)
class AlgoConfig:
    """Relabeling, IBS and PER settings."""

    variant: str = "filtered-her-ibs"
    k_virtual: int = 4
    grid_m: int = 20
    grid_n: int = 20
    sigma_sq_init: float = 2.0
    sigma_sq_final: float = 0.2
    sigma_decay: float = 0.9
    anneal_period_cycles: int = 50
    weight_floor: float = 0.002
    target_floor: float = 0.002
    reference_sigma: float = 0.2
    kl_direction: str = "target-proposal"
    per_alpha: float = 0.6
    per_beta_init: float = 0.4
    per_priority_floor: float = 1e-3

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(
                f"unknown variant {self.variant!r}; expected one of {sorted(VARIANTS)}")
        if self.kl_direction not in ("target-proposal", "proposal-target"):
            raise ConfigurationError("kl_direction must be 'target-proposal' or 'proposal-target'")

    @property
    def her(self) -> HerConfig:
        return HerConfig.from_variant(self.variant, self.k_virtual)


class ActorCritic:
    """Online and target actor/critic networks with their optimizer states."""

    def __init__(self, actor, critic, actor_target, critic_target, actor_opt, critic_opt,
                 input_dim, action_low, action_high, binary_actions, discrete=False,
                 binary_by_critic=False):
        self.actor = actor
        self.critic = critic
        self.actor_target = actor_target
        self.critic_target = critic_target
        self.actor_opt = actor_opt
        self.critic_opt = critic_opt
        self.input_dim = int(input_dim)
        self.action_low = np.asarray(action_low, dtype=np.float64)
        self.action_high = np.asarray(action_high, dtype=np.float64)
        self.binary_actions = np.asarray(binary_actions, dtype=bool)
        self.discrete = bool(discrete)
        self.binary_by_critic = bool(binary_by_critic) and bool(self.binary_actions.any())
        if actor.output_dim != len(self.action_low) or critic.output_dim != 1:
            raise ShapeError("actor must emit one value per action coordinate and critic one value")

    @property
    def action_dim(self) -> int:
        return len(self.action_low)

    @property
    def action_range(self) -> np.ndarray:
        return self.action_high - self.action_low

    def _scale(self, out):
        return self.action_low + 0.5 * (out + 1.0) * self.action_range

    def one_hot(self, actions) -> np.ndarray:
        """Snap each row to the bound vertex that marks its argmax coordinate."""
        actions = np.atleast_2d(actions)
        hot = np.argmax(actions, axis=1)
        out = np.broadcast_to(self.action_low, actions.shape).copy()
        out[np.arange(len(actions)), hot] = self.action_high[hot]
        return out

    def _best_vertex(self, obs_goal, target: bool) -> np.ndarray:
        """One-hot action with the highest critic value, per row."""
        x = np.atleast_2d(obs_goal)
        d = self.action_dim
        vertices = self.one_hot(np.eye(d))
        q = self.q_values(np.repeat(x, d, axis=0), np.tile(vertices, (len(x), 1)), target)
        return vertices[np.argmax(q.reshape(len(x), d), axis=1)]

    def _binary_settings(self) -> np.ndarray:
        """Every low/high assignment of the binary coordinates, one per row."""
        idx = np.flatnonzero(self.binary_actions)
        bits = (np.arange(2 ** len(idx))[:, None] >> np.arange(len(idx))) & 1
        return np.where(bits == 1, self.action_high[idx], self.action_low[idx])

    def best_binary(self, obs_goal, actions, target: bool = False) -> np.ndarray:
        """Replace binary coordinates by the setting the critic values most."""
        x = np.atleast_2d(obs_goal)
        actions = np.array(np.atleast_2d(actions), dtype=np.float64)
        settings = self._binary_settings()
        k, n = len(settings), len(x)
        cand = np.repeat(actions, k, axis=0)
        cand[:, self.binary_actions] = np.tile(settings, (n, 1))
        q = self.q_values(np.repeat(x, k, axis=0), cand, target)
        best = np.argmax(q.reshape(n, k), axis=1)
        actions[:, self.binary_actions] = settings[best]
        return actions

    def raw_greedy(self, obs_goal) -> np.ndarray:
        """Actor output mapped onto the action bounds."""
        return self._scale(nn.predict(self.actor, obs_goal))

    def greedy(self, obs_goal) -> np.ndarray:
        """Actor output with critic-chosen binary coordinates when enabled; for
        discrete agents the critic's best one-hot action."""
        if self.discrete:
            return self._best_vertex(obs_goal, target=False)
        if self.binary_by_critic:
            return self.best_binary(obs_goal, self.raw_greedy(obs_goal))
        return self.raw_greedy(obs_goal)

    def target_greedy(self, obs_goal) -> np.ndarray:
        if self.discrete:
            return self._best_vertex(obs_goal, target=True)
        a = self._scale(nn.predict(self.actor_target, obs_goal))
        if self.binary_by_critic:
            return self.best_binary(obs_goal, a, target=True)
        return a

    def q_values(self, obs_goal, actions, target: bool = False) -> np.ndarray:
        net = self.critic_target if target else self.critic
        x = np.hstack([np.atleast_2d(obs_goal), np.atleast_2d(actions)])
        return nn.predict(net, x)[:, 0]

    def networks(self) -> dict:
        return {"actor": self.actor, "critic": self.critic,
                "actor_target": self.actor_target, "critic_target": self.critic_target}

    def save(self, path, meta=None):
        meta = dict(meta or {})
        meta.update(action_low=self.action_low.tolist(), action_high=self.action_high.tolist(),
                    binary_actions=self.binary_actions.tolist(), input_dim=self.input_dim,
                    discrete=self.discrete, binary_by_critic=self.binary_by_critic)
        return nn.save_checkpoint(path, self.networks(), meta)

    @classmethod
    def load(cls, path, env: GoalEnv | None = None) -> "ActorCritic":
        nets, meta = nn.load_checkpoint(path)
        missing = {"actor", "critic", "actor_target", "critic_target"} - set(nets)
        if missing:
            raise ConfigurationError(f"checkpoint lacks networks {sorted(missing)}")
        ac = cls(nets["actor"], nets["critic"], nets["actor_target"], nets["critic_target"],
                 nn.make_optimizer(nets["actor"]), nn.make_optimizer(nets["critic"]),
                 meta["input_dim"], meta["action_low"], meta["action_high"],
                 meta["binary_actions"], meta.get("discrete", False),
                 meta.get("binary_by_critic", False))
        if env is not None:
            if ac.input_dim != env.observation_dim + env.goal_dim or ac.action_dim != env.action_dim:
                raise ConfigurationError(
                    f"checkpoint expects input {ac.input_dim} / action {ac.action_dim}, "
                    f"environment {env.name} has {env.observation_dim + env.goal_dim} / "
                    f"{env.action_dim}")
        return ac


def _norm_flags(mode: str, n_layers: int) -> list:
    if mode == "all":
        return [True] * n_layers
    return [mode == "input"] + [False] * (n_layers - 1)


def build_actor_critic(env: GoalEnv, cfg: AgentConfig, seed) -> ActorCritic:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    actor_seed, critic_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    d_in = env.observation_dim + env.goal_dim
    hidden = list(cfg.hidden_sizes)
    acts = ["relu"] * len(hidden)
    actor = nn.mlp_init([d_in] + hidden + [env.action_dim], acts + ["tanh"], actor_seed,
                        normalization=_norm_flags(cfg.actor_normalization, len(hidden) + 1),
                        output_scale=cfg.output_init_scale)
    n_critic = len(hidden) + 1
    critic = nn.mlp_init([d_in + env.action_dim] + hidden + [1], acts + ["linear"], critic_seed,
                         normalization=_norm_flags(cfg.critic_normalization, n_critic),
                         output_scale=cfg.output_init_scale)
    opt_kw = dict(learning_rate=cfg.learning_rate, clip_norm=cfg.clip_norm, method=cfg.optimizer)
    return ActorCritic(actor, critic, actor.copy(), critic.copy(),
                       nn.make_optimizer(actor, **opt_kw), nn.make_optimizer(critic, **opt_kw),
                       d_in, env.action_low, env.action_high, env.binary_actions,
                       env.discrete_actions, cfg.binary_action_selection == "critic")


GREEDY, NOISY, RANDOM = 0, 1, 2


def select_actions(ac: ActorCritic, obs_goal, epsilon: float, rng,
                   noise_scale_fraction: float = 0.05, return_branches: bool = False):
    """Epsilon-mixed exploration for a batch of rows.

    Each row independently takes the greedy action (probability
    ``1 - eps``), the greedy action plus Gaussian noise with standard
    deviation ``noise_scale_fraction * action_range`` (``0.8 eps``) or a
    uniform random action (``0.2 eps``). Results are clamped to the bounds
    and binary coordinates are snapped to their low or high value. For
    discrete agents the perturbed vector is then snapped back to a one-hot
    vertex.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigurationError("epsilon must lie in [0, 1]")
    x = np.atleast_2d(np.asarray(obs_goal, dtype=np.float64))
    if x.shape[1] != ac.input_dim:
        raise ShapeError(f"expected {ac.input_dim} input columns, got {x.shape[1]}")
    b = x.shape[0]
    actions = ac.greedy(x)
    u = rng.random(b)
    branch = np.where(u < 1.0 - epsilon, GREEDY, np.where(u < 1.0 - 0.2 * epsilon, NOISY, RANDOM))
    noise = rng.standard_normal((b, ac.action_dim)) * (noise_scale_fraction * ac.action_range)
    uniform = rng.uniform(ac.action_low, ac.action_high, size=(b, ac.action_dim))
    actions = np.where((branch == NOISY)[:, None], actions + noise, actions)
    actions = np.where((branch == RANDOM)[:, None], uniform, actions)
    actions = np.clip(actions, ac.action_low, ac.action_high)
    if ac.binary_actions.any():
        mid = 0.5 * (ac.action_low + ac.action_high)
        snapped = np.where(actions > mid, ac.action_high, ac.action_low)
        actions = np.where(ac.binary_actions, snapped, actions)
    if ac.discrete:
        actions = ac.one_hot(actions)
    return (actions, branch) if return_branches else actions


def select_action(ac: ActorCritic, obs_goal, epsilon: float, rng, **kw) -> np.ndarray:
    return select_actions(ac, np.asarray(obs_goal)[None, :], epsilon, rng, **kw)[0]


def _as_batch(batch):
    """Accept a dict of field arrays or a list of :class:`Transition`."""
    if isinstance(batch, dict):
        return batch
    keys = ("observation", "goal", "action", "reward", "next_observation")
    return {k: np.array([getattr(t, k) for t in batch], dtype=np.float64) for k in keys}


def critic_targets(batch, ac: ActorCritic, cfg: AgentConfig) -> np.ndarray:
    """``r + gamma * Q'(s' || g, pi'(s' || g))`` clamped to ``[-1 / (1 - gamma), 0]``."""
    b = _as_batch(batch)
    if len(b["reward"]) == 0:
        raise ConfigurationError("empty batch")
    nxt = np.hstack([b["next_observation"], b["goal"]])
    q_next = ac.q_values(nxt, ac.target_greedy(nxt), target=True)
    y = np.asarray(b["reward"], dtype=np.float64) + cfg.gamma * q_next
    if cfg.clamp_targets:
        low = -1.0 / (1.0 - cfg.gamma) if cfg.gamma < 1.0 else -np.inf
        y = np.clip(y, low, 0.0)
    return y


def actor_loss_and_grads(ac: ActorCritic, obs_goal, action_l2: float = 0.0,
                         update_stats: bool = False):
    """``-mean Q(s || g, pi(s || g)) + action_l2 * mean(out^2)`` and its actor gradient.

    ``out`` is the tanh output before scaling to the action bounds; the
    penalty keeps it away from saturation. ``update_stats`` moves the
    actor's running input statistics toward this batch first. When binary
    coordinates are picked by the critic they enter Q at the chosen value
    and pass no gradient back.
    """
    out, cache = nn.forward(ac.actor, obs_goal, update_stats=update_stats)
    a = ac._scale(out)
    if ac.binary_by_critic:
        a = ac.best_binary(obs_goal, a)
    q, c_cache = nn.forward(ac.critic, np.hstack([obs_goal, a]))
    n = len(obs_goal)
    loss = -float(q.mean()) + action_l2 * float(np.mean(out * out))
    _, grad_in = nn.backward(ac.critic, c_cache, np.full((n, 1), -1.0 / n))
    grad_out = grad_in[:, ac.input_dim:] * (0.5 * ac.action_range)
    if ac.binary_by_critic:
        grad_out[:, ac.binary_actions] = 0.0
    grad_out = grad_out + (2.0 * action_l2 / out.size) * out
    grads, _ = nn.backward(ac.actor, cache, grad_out)
    return loss, grads


def train_step(ac: ActorCritic, batch, cfg: AgentConfig, weights=None):
    """One critic and one actor update; returns ``(critic_loss, actor_loss, |td|)``."""
    b = _as_batch(batch)
    x = np.hstack([b["observation"], b["goal"]])
    n = len(x)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    y = critic_targets(b, ac, cfg)

    q, cache = nn.forward(ac.critic, np.hstack([x, b["action"]]), update_stats=True)
    td = y - q[:, 0]
    critic_loss = float(np.mean(w * td * td))
    if not math.isfinite(critic_loss):
        raise NumericError("critic loss is not finite")
    grads, _ = nn.backward(ac.critic, cache, (-2.0 / n) * (w * td)[:, None])
    nn.apply_gradients(ac.critic, nn.clip_gradients(grads, ac.critic_opt.clip_norm), ac.critic_opt)

    actor_loss, a_grads = actor_loss_and_grads(ac, x, cfg.action_l2, update_stats=True)
    if not math.isfinite(actor_loss):
        raise NumericError("actor loss is not finite")
    nn.apply_gradients(ac.actor, nn.clip_gradients(a_grads, ac.actor_opt.clip_norm), ac.actor_opt)
    return critic_loss, actor_loss, np.abs(td)


def sync_targets(ac: ActorCritic, cfg: AgentConfig):
    mode = cfg.target_sync_mode
    nn.sync_target(ac.actor_target, ac.actor, mode, cfg.polyak_tau)
    nn.sync_target(ac.critic_target, ac.critic, mode, cfg.polyak_tau)


@dataclass
class RunArtifacts:
    ac: ActorCritic
    buffer: PrioritizedReplay
    curves: list
    ibs: IbsState | None
    reference_target: object
    grid: GridSpec | None
    n_virtual_stored: int = 0
    n_virtual_skipped: int = 0
    config: dict = field(default_factory=dict)


def _trajectory(ep) -> EpisodeTrajectory:
    return EpisodeTrajectory(ep.observations, ep.actions, ep.achieved_goals, ep.goal)


def buffer_kl(buffer: PrioritizedReplay, grid: GridSpec, target, direction="target-proposal"):
    """KL between the reference target and the virtual goals currently in ``buffer``."""
    occupied = slice(0, buffer.size)
    goals = buffer.goal[occupied][buffer.is_virtual[occupied]]
    if len(goals) == 0:
        return math.nan
    counts = histogram(goals, grid)
    proposal = counts / counts.sum()
    if direction == "target-proposal":
        return kl_divergence(target, proposal)
    return kl_divergence(proposal, target.values)


def run_training(env: GoalEnv, variant: str, cfg: AgentConfig, seed: int,
                 algo: AlgoConfig | None = None, progress=None) -> RunArtifacts:
    """Train from scratch; every random draw derives from ``seed``.

    Each epoch: set epsilon, then ``cycles_per_epoch`` times collect
    ``episodes_per_cycle`` episodes, store their real and virtual
    transitions, and take ``optimization_steps_per_cycle`` minibatch steps.
    After the epoch the greedy policy is evaluated on a fixed seeded set of
    starts and one learning-curve row is recorded.
    """
    algo = algo or AlgoConfig(variant=variant)
    if algo.variant != variant:
        algo = AlgoConfig(**{**{f.name: getattr(algo, f.name) for f in fields(algo)},
                             "variant": variant})
    her = algo.her
    ss = np.random.SeedSequence(seed)
    s_init, s_env, s_explore, s_her, s_per, s_eval = ss.spawn(6)
    env_rng = np.random.default_rng(s_env)
    explore_rng = np.random.default_rng(s_explore)
    her_rng = np.random.default_rng(s_her)
    per_rng = np.random.default_rng(s_per)
    eval_seed = int(s_eval.generate_state(1)[0])

    ac = build_actor_critic(env, cfg, s_init)
    buffer = PrioritizedReplay(cfg.buffer_capacity, env.observation_dim, env.goal_dim,
                               env.action_dim, alpha=algo.per_alpha, beta=algo.per_beta_init,
                               priority_floor=algo.per_priority_floor)
    grid = ibs = reference = None
    if env.goal_bounds is not None and env.goal_distribution is not None:
        grid = GridSpec(algo.grid_m, algo.grid_n, env.goal_bounds)
        ibs = IbsState.create(env.goal_distribution, grid, algo.sigma_sq_init,
                              algo.sigma_sq_final, algo.sigma_decay, algo.anneal_period_cycles,
                              algo.weight_floor, algo.target_floor)
        reference = build_target_grid(env.goal_distribution, algo.reference_sigma, grid,
                                      algo.target_floor)
    elif her.variant_ibs:
        raise ConfigurationError(f"environment {env.name} has no goal grid for IBS")

    total_cycles = cfg.epochs * cfg.cycles_per_epoch
    cycles_done = 0
    n_stored = n_skipped = 0
    curves = []
    for epoch in range(cfg.epochs):
        eps = cfg.epsilon_at(epoch)
        for _ in range(cfg.cycles_per_epoch):
            starts = [env.reset(env_rng) for _ in range(cfg.episodes_per_cycle)]

            def act(x):
                return select_actions(ac, x, eps, explore_rng, cfg.noise_scale_fraction)

            for ep in rollout(env, act, starts):
                rows, skipped = relabel_episode(_trajectory(ep), env.reward, her, her_rng, ibs)
                buffer.store_batch(**rows)
                n_stored += int(rows["is_virtual"].sum())
                n_skipped += skipped
            if buffer.size >= cfg.batch_size:
                buffer.beta = algo.per_beta_init + (1.0 - algo.per_beta_init) * min(
                    1.0, cycles_done / max(1, total_cycles))
                for _ in range(cfg.optimization_steps_per_cycle):
                    batch, idx, weights = buffer.sample(cfg.batch_size, per_rng)
                    _, _, td = train_step(ac, batch, cfg, weights)
                    buffer.update_priorities(idx, td)
                    if cfg.target_sync_mode == "polyak":
                        sync_targets(ac, cfg)
            cycles_done += 1
            if cfg.target_sync_mode == "hard" and cycles_done % cfg.target_sync_period == 0:
                sync_targets(ac, cfg)
            if ibs is not None:
                anneal_sigma(ibs, cycles_done)
        report, _ = evaluate_with_bias(env, ac, cfg.n_eval_episodes, cfg.gamma, eval_seed)
        kl = buffer_kl(buffer, grid, reference, algo.kl_direction) if grid is not None else math.nan
        row = {
            "epoch": epoch,
            "success_rate": report.success_rate,
            "mean_final_distance": report.mean_final_distance,
            "q0_estimate": report.q0_estimate,
            "empirical_return": report.empirical_return,
            "epsilon": eps,
            "kl_to_target": kl,
            "sigma_sq": ibs.sigma_sq if ibs is not None else math.nan,
            "final_success_rate": report.final_success_rate,
        }
        curves.append(row)
        if progress is not None:
            progress(row)
    return RunArtifacts(ac=ac, buffer=buffer, curves=curves, ibs=ibs, reference_target=reference,
                        grid=grid, n_virtual_stored=n_stored, n_virtual_skipped=n_skipped)


class HindsightDDPG(BaseEstimator):
    """Estimator-style wrapper around :func:`run_training`.

    ``fit(env)`` trains (building the environment from ``env_name`` when
    none is passed), ``predict(X)`` returns greedy actions for rows of
    ``observation || goal`` and ``score(env)`` is the greedy success rate.
    """

    def __init__(self, env_name="hand", variant="filtered-her-ibs", gamma=0.98, epochs=50,
                 cycles_per_epoch=50, episodes_per_cycle=16, optimization_steps_per_cycle=40,
                 batch_size=64, buffer_capacity=1_000_000, k_virtual=4, n_eval_episodes=50,
                 random_state=0):
        self.env_name = env_name
        self.variant = variant
        self.gamma = gamma
        self.epochs = epochs
        self.cycles_per_epoch = cycles_per_epoch
        self.episodes_per_cycle = episodes_per_cycle
        self.optimization_steps_per_cycle = optimization_steps_per_cycle
        self.batch_size = batch_size
        self.buffer_capacity = buffer_capacity
        self.k_virtual = k_virtual
        self.n_eval_episodes = n_eval_episodes
        self.random_state = random_state

    def _agent_config(self) -> AgentConfig:
        return AgentConfig(
            gamma=self.gamma, epochs=self.epochs, cycles_per_epoch=self.cycles_per_epoch,
            episodes_per_cycle=self.episodes_per_cycle,
            optimization_steps_per_cycle=self.optimization_steps_per_cycle,
            batch_size=self.batch_size, buffer_capacity=self.buffer_capacity,
            n_eval_episodes=self.n_eval_episodes)

    def fit(self, env=None, y=None):
        self.env_ = env if env is not None else make_env(self.env_name)
        algo = AlgoConfig(variant=self.variant, k_virtual=self.k_virtual)
        run = run_training(self.env_, self.variant, self._agent_config(), self.random_state, algo)
        self.actor_critic_ = run.ac
        self.curves_ = run.curves
        self.buffer_ = run.buffer
        self.ibs_ = run.ibs
        return self

    def predict(self, X):
        check_is_fitted(self, "actor_critic_")
        X = check_array(X, dtype=np.float64)
        return self.actor_critic_.greedy(X)

    def score(self, env=None, y=None, n_episodes=None, seed=None):
        check_is_fitted(self, "actor_critic_")
        env = env if env is not None else self.env_
        n = n_episodes or self.n_eval_episodes
        seed = self.random_state if seed is None else seed
        return evaluate_policy(env, self.actor_critic_, n, seed).success_rate
