"""Actor-critic prompt editing.

The state is a :class:`~saigc.codec.Prompt`. Actions add, delete or modify a
phrase, or stop. The actor is a masked linear-softmax policy over a fixed
96-slot action enumeration; the critic is a linear state-value function.
Both are updated online at every step from the one-step advantage.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import scene
from .codec import (
    CARDINALITY,
    CLUTTER,
    MAX_PHRASES,
    N_SEMANTIC,
    NoiseConfig,
    Phrase,
    Prompt,
    apply_noise,
    decode,
    encode_clean,
)
from .metrics import quality
from .scene import SceneSpec

logger = logging.getLogger(__name__)

FEATURE_DIM = 33
_ONEHOT_OFFSET = np.cumsum((0,) + tuple(1 + c for c in CARDINALITY[:N_SEMANTIC]))[:-1]  # 0, 6, 15, 20, 24
_CLUTTER_FEATURE = 28
_LENGTH_FEATURE = 29

N_ADD = sum(CARDINALITY[:N_SEMANTIC])  # 23
_ADD_BASE = np.cumsum((0,) + CARDINALITY[:N_SEMANTIC - 1])  # 0, 5, 13, 17, 20
_MAX_MODIFY_VALUES = max(CARDINALITY[:N_SEMANTIC])  # 8
STOP_INDEX = 0
ADD_OFFSET = 1
DELETE_OFFSET = ADD_OFFSET + N_ADD  # 24
MODIFY_OFFSET = DELETE_OFFSET + MAX_PHRASES  # 32
N_ACTIONS = MODIFY_OFFSET + MAX_PHRASES * _MAX_MODIFY_VALUES  # 96


class IllegalActionError(ValueError):
    pass


class EditAction(NamedTuple):
    kind: str  # "stop" | "add" | "delete" | "modify"
    position: int = -1
    attribute: int = -1
    value: int = -1

    @classmethod
    def stop(cls):
        return cls("stop")

    @classmethod
    def add(cls, attribute: int, value: int):
        return cls("add", attribute=attribute, value=value)

    @classmethod
    def delete(cls, position: int):
        return cls("delete", position=position)

    @classmethod
    def modify(cls, position: int, value: int):
        return cls("modify", position=position, value=value)

    def __str__(self):
        if self.kind == "stop":
            return "Stop"
        if self.kind == "add":
            return f"Add({Phrase(self.attribute, self.value)})"
        if self.kind == "delete":
            return f"Delete({self.position})"
        return f"Modify({self.position}, {self.value})"


def action_row(prompt: Prompt, action: EditAction) -> int:
    """Parameter row of ``action`` in the 96-row policy matrix.

    Delete and Modify rows are keyed by the attribute of the targeted phrase,
    not by its slot, so one row means the same edit wherever the phrase sits.
    """
    if action.kind == "stop":
        return STOP_INDEX
    if action.kind == "add":
        return ADD_OFFSET + int(_ADD_BASE[action.attribute]) + action.value
    attr = prompt[action.position].attribute
    if action.kind == "delete":
        return DELETE_OFFSET + attr
    if action.kind == "modify":
        return MODIFY_OFFSET + _MAX_MODIFY_VALUES * attr + action.value
    raise ValueError(f"unknown action kind {action.kind!r}")


def featurize(prompt: Prompt) -> np.ndarray:
    x = np.zeros(FEATURE_DIM)
    for attr in range(N_SEMANTIC):
        value = prompt.get(attr)
        if value is None:
            x[_ONEHOT_OFFSET[attr]] = 1.0
        else:
            x[_ONEHOT_OFFSET[attr] + 1 + value] = 1.0
    x[_CLUTTER_FEATURE] = prompt.n_clutter / 4
    x[_LENGTH_FEATURE] = len(prompt) / MAX_PHRASES
    return x


def legal_actions(prompt: Prompt, attributes: Iterable[int] | None = None) -> list[EditAction]:
    """Legal edits in canonical order.

    ``attributes`` restricts the action set to phrases of the given attribute ids
    (Stop stays legal); ``None`` allows everything.
    """
    allowed = set(range(N_SEMANTIC + 1)) if attributes is None else set(attributes)
    actions = [EditAction.stop()]
    if len(prompt) < MAX_PHRASES:
        for attr in range(N_SEMANTIC):
            if attr in allowed and not prompt.has(attr):
                actions.extend(EditAction.add(attr, v) for v in range(CARDINALITY[attr]))
    actions.extend(EditAction.delete(i) for i, (attr, _) in enumerate(prompt) if attr in allowed)
    for i, (attr, current) in enumerate(prompt):
        if attr == CLUTTER or attr not in allowed:
            continue
        actions.extend(EditAction.modify(i, v) for v in range(CARDINALITY[attr]) if v != current)
    return actions


def is_legal(prompt: Prompt, action: EditAction) -> bool:
    if action.kind == "stop":
        return True
    if action.kind == "add":
        return (
            0 <= action.attribute < N_SEMANTIC
            and 0 <= action.value < CARDINALITY[action.attribute]
            and not prompt.has(action.attribute)
            and len(prompt) < MAX_PHRASES
        )
    if not 0 <= action.position < len(prompt):
        return False
    if action.kind == "delete":
        return True
    if action.kind == "modify":
        attr, current = prompt[action.position]
        return attr != CLUTTER and 0 <= action.value < CARDINALITY[attr] and action.value != current
    return False


def apply_action(prompt: Prompt, action: EditAction) -> Prompt:
    if not is_legal(prompt, action):
        raise IllegalActionError(f"{action} is not legal for prompt {prompt.to_text()!r}")
    phrases = list(prompt.phrases)
    if action.kind == "stop":
        return prompt
    if action.kind == "add":
        # insert before the first phrase with a larger attribute id
        pos = next((i for i, (a, _) in enumerate(phrases) if a > action.attribute), len(phrases))
        phrases.insert(pos, Phrase(action.attribute, action.value))
    elif action.kind == "delete":
        del phrases[action.position]
    else:
        attr, _ = phrases[action.position]
        phrases[action.position] = Phrase(attr, action.value)
    return Prompt(tuple(phrases))


@dataclass
class PolicyParams:
    theta: np.ndarray = field(default_factory=lambda: np.zeros((N_ACTIONS, FEATURE_DIM)))
    bias: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS))

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.theta.shape != (N_ACTIONS, FEATURE_DIM) or self.bias.shape != (N_ACTIONS,):
            raise ValueError(f"policy shape must be ({N_ACTIONS}, {FEATURE_DIM}) + ({N_ACTIONS},)")
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.bias))):
            raise ValueError("policy parameters must be finite")

    def copy(self) -> PolicyParams:
        return PolicyParams(self.theta.copy(), self.bias.copy())


@dataclass
class CriticParams:
    phi: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    bias: float = 0.0

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.bias = float(self.bias)
        if self.phi.shape != (FEATURE_DIM,):
            raise ValueError(f"critic weights must have shape ({FEATURE_DIM},)")
        if not (np.all(np.isfinite(self.phi)) and np.isfinite(self.bias)):
            raise ValueError("critic parameters must be finite")

    def copy(self) -> CriticParams:
        return CriticParams(self.phi.copy(), self.bias)


def _rows(prompt: Prompt, actions: Sequence[EditAction]) -> np.ndarray:
    return np.array([action_row(prompt, a) for a in actions])


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def action_logits(policy: PolicyParams, prompt: Prompt, actions: Sequence[EditAction]) -> np.ndarray:
    rows = _rows(prompt, actions)
    return policy.theta[rows] @ featurize(prompt) + policy.bias[rows]


def policy_probs(policy: PolicyParams, prompt: Prompt, actions: Sequence[EditAction] | None = None,
                 attributes=None) -> np.ndarray:
    """Masked softmax aligned with ``actions`` (default: ``legal_actions(prompt)``)."""
    if actions is None:
        actions = legal_actions(prompt, attributes)
    return _softmax(action_logits(policy, prompt, actions))


def log_prob(policy: PolicyParams, prompt: Prompt, action: EditAction, actions=None) -> float:
    if actions is None:
        actions = legal_actions(prompt)
    z = action_logits(policy, prompt, actions)
    m = z.max()
    return float(z[actions.index(action)] - m - np.log(np.exp(z - m).sum()))


def grad_log_prob(policy: PolicyParams, prompt: Prompt, action: EditAction, actions=None):
    """Gradient of log pi(action | prompt) w.r.t. (theta, bias).

    Rows of illegal actions stay zero. Two legal actions can share a row (two
    clutter phrases), so contributions are accumulated rather than assigned.
    """
    if actions is None:
        actions = legal_actions(prompt)
    rows = _rows(prompt, actions)
    x = featurize(prompt)
    p = _softmax(policy.theta[rows] @ x + policy.bias[rows])
    coeff = -p
    coeff[actions.index(action)] += 1.0
    g_bias = np.zeros(N_ACTIONS)
    np.add.at(g_bias, rows, coeff)
    g_theta = np.outer(g_bias, x)
    return g_theta, g_bias


def reward(prev: Prompt, next_: Prompt, original, lambda_len: float = 0.01) -> float:
    """Change in decoded quality, less a per-phrase cost for lengthening the prompt."""
    if next_ == prev:
        return 0.0
    gain = quality(decode(next_), original) - quality(decode(prev), original)
    return gain - lambda_len * max(0, len(next_) - len(prev))


def value(critic: CriticParams, prompt: Prompt) -> float:
    return float(critic.phi @ featurize(prompt) + critic.bias)


def advantage(r: float, v_next: float, v_cur: float, gamma: float, terminal: bool = False) -> float:
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    if terminal:
        v_next = 0.0
    return r + gamma * v_next - v_cur


def actor_step(policy: PolicyParams, prompt: Prompt, action: EditAction, adv: float, lr_actor: float,
               actions=None) -> PolicyParams:
    """Policy-gradient ascent step ``theta + lr * A * grad log pi``.

    Stop is the reference action: its row is held at zero and only the other
    rows move. A softmax is unchanged by a common logit shift and Stop is legal
    in every state, so this loses no expressiveness.
    """
    if adv == 0.0:
        return policy.copy()
    g_theta, g_bias = grad_log_prob(policy, prompt, action, actions)
    g_theta[STOP_INDEX] = 0.0
    g_bias[STOP_INDEX] = 0.0
    step = lr_actor * adv
    return PolicyParams(policy.theta + step * g_theta, policy.bias + step * g_bias)


def critic_loss(critic: CriticParams, prompt: Prompt, td_target: float) -> float:
    """Half squared TD error with the bootstrap target held fixed."""
    return 0.5 * (td_target - value(critic, prompt)) ** 2


def critic_grad(critic: CriticParams, prompt: Prompt, td_target: float):
    """Gradient of :func:`critic_loss` w.r.t. (phi, bias)."""
    x = featurize(prompt)
    delta = td_target - (critic.phi @ x + critic.bias)
    return -delta * x, -delta


def critic_step(critic: CriticParams, prompt: Prompt, td_target: float, lr_critic: float) -> CriticParams:
    g_phi, g_bias = critic_grad(critic, prompt, td_target)
    return CriticParams(critic.phi - lr_critic * g_phi, critic.bias - lr_critic * g_bias)


@dataclass(frozen=True)
class TrainingConfig:
    gamma: float = 0.9
    lr_actor: float = 3.0
    lr_critic: float = 0.005
    lambda_len: float = 0.01
    horizon: int = 1
    episodes: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.lr_actor <= 0 or self.lr_critic <= 0:
            raise ValueError("learning rates must be positive")
        if self.lambda_len < 0:
            raise ValueError("lambda_len must be non-negative")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")


class Step(NamedTuple):
    state: Prompt
    action: EditAction
    reward: float
    next_state: Prompt
    terminal: bool


@dataclass
class Trajectory:
    steps: list[Step]
    gamma: float

    def __len__(self):
        return len(self.steps)

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]

    @property
    def returns(self) -> list[float]:
        out = [0.0] * len(self.steps)
        acc = 0.0
        for t in range(len(self.steps) - 1, -1, -1):
            acc = self.steps[t].reward + self.gamma * acc
            out[t] = acc
        return out


def initial_state(spec: SceneSpec, noise: NoiseConfig, rng: np.random.Generator) -> Prompt:
    return apply_noise(encode_clean(scene.render(spec)), noise, rng)


def run_episode(spec: SceneSpec, policy: PolicyParams, critic: CriticParams, cfg: TrainingConfig,
                rng: np.random.Generator, noise: NoiseConfig | None = None,
                attributes: Iterable[int] | None = None, state: Prompt | None = None):
    """Roll out one noisy prompt of ``spec`` and update actor and critic after every step.

    Returns ``(trajectory, policy, critic)``; the input parameters are not modified.
    """
    noise = NoiseConfig() if noise is None else noise
    original = scene.render(spec)
    if state is None:
        state = initial_state(spec, noise, rng)
    steps = []
    for t in range(cfg.horizon):
        actions = legal_actions(state, attributes)
        probs = policy_probs(policy, state, actions)
        action = actions[int(rng.choice(len(actions), p=probs))]
        next_state = apply_action(state, action)
        r = 0.0 if action.kind == "stop" else reward(state, next_state, original, cfg.lambda_len)
        terminal = action.kind == "stop" or t == cfg.horizon - 1

        v_cur = value(critic, state)
        v_next = 0.0 if terminal else value(critic, next_state)
        adv = advantage(r, v_next, v_cur, cfg.gamma, terminal)
        policy = actor_step(policy, state, action, adv, cfg.lr_actor, actions)
        critic = critic_step(critic, state, r + cfg.gamma * v_next, cfg.lr_critic)

        steps.append(Step(state, action, r, next_state, terminal))
        state = next_state
        if terminal:
            break
    return Trajectory(steps, cfg.gamma), policy, critic


class LogRow(NamedTuple):
    episode: int
    mean_reward: float
    mean_quality: float


def train(specs: Sequence[SceneSpec], cfg: TrainingConfig, noise: NoiseConfig | None = None,
          attributes: Iterable[int] | None = None, policy: PolicyParams | None = None,
          critic: CriticParams | None = None):
    """Run ``cfg.episodes`` episodes over ``specs`` in reshuffled passes.

    Returns ``(policy, critic, log)`` where ``log`` holds one :class:`LogRow` per episode.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("training needs a non-empty train split")
    noise = NoiseConfig() if noise is None else noise
    attributes = None if attributes is None else tuple(attributes)
    policy = PolicyParams() if policy is None else policy.copy()
    critic = CriticParams() if critic is None else critic.copy()
    rng = np.random.default_rng(cfg.seed)
    log = []
    order = []
    for episode in range(cfg.episodes):
        if not order:
            order = list(rng.permutation(len(specs)))
        spec = specs[order.pop(0)]
        traj, policy, critic = run_episode(spec, policy, critic, cfg, rng, noise, attributes)
        original = scene.render(spec)
        qualities = [quality(decode(s.next_state), original) for s in traj.steps]
        log.append(LogRow(episode, float(np.mean(traj.rewards)), float(np.mean(qualities))))
        if (episode + 1) % 500 == 0:
            recent = log[-500:]
            logger.info("episode %d mean_reward=%.5f mean_quality=%.4f", episode + 1,
                        np.mean([r.mean_reward for r in recent]), np.mean([r.mean_quality for r in recent]))
    return policy, critic, log


def greedy_action(policy: PolicyParams, prompt: Prompt, attributes=None) -> EditAction:
    actions = legal_actions(prompt, attributes)
    # argmax keeps the first maximum, i.e. canonical order breaks ties
    return actions[int(np.argmax(policy_probs(policy, prompt, actions)))]


def optimize(prompt: Prompt, policy: PolicyParams, horizon: int = 1, attributes=None) -> Prompt:
    """Greedy inference: follow the most probable edit until Stop or ``horizon`` edits."""
    for _ in range(horizon):
        action = greedy_action(policy, prompt, attributes)
        if action.kind == "stop":
            break
        prompt = apply_action(prompt, action)
    return prompt


def exhaustive_search(prompt: Prompt, original, depth: int = 2, attributes=None) -> tuple[float, Prompt]:
    """Best decoded quality over every edit sequence of at most ``depth`` edits.

    Uses the ground-truth raster, so it bounds what any state-only policy can reach.
    Ties keep the first prompt found in breadth-first canonical order.
    """
    best_q, best = quality(decode(prompt), original), prompt
    frontier = [prompt]
    seen = {prompt}
    for _ in range(depth):
        nxt = []
        for p in frontier:
            for action in legal_actions(p, attributes):
                if action.kind == "stop":
                    continue
                child = apply_action(p, action)
                if child in seen:
                    continue
                seen.add(child)
                nxt.append(child)
                q = quality(decode(child), original)
                if q > best_q:
                    best_q, best = q, child
        frontier = nxt
    return best_q, best


POLICY_FILE_VERSION = 1


def save_policy(path: str | Path, policy: PolicyParams, critic: CriticParams, config: dict) -> None:
    doc = {
        "version": POLICY_FILE_VERSION,
        "feature_dim": FEATURE_DIM,
        "action_space": N_ACTIONS,
        "theta": policy.theta.tolist(),
        "theta_bias": policy.bias.tolist(),
        "phi": critic.phi.tolist(),
        "phi_bias": critic.bias,
        "config": config,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=False) + "\n", encoding="utf-8")


def load_policy(path: str | Path) -> tuple[PolicyParams, CriticParams, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != POLICY_FILE_VERSION:
        raise ValueError(f"unsupported policy file version {doc.get('version')!r}")
    if doc.get("feature_dim") != FEATURE_DIM or doc.get("action_space") != N_ACTIONS:
        raise ValueError("policy file shape does not match this build")
    policy = PolicyParams(np.array(doc["theta"]), np.array(doc["theta_bias"]))
    critic = CriticParams(np.array(doc["phi"]), doc["phi_bias"])
    return policy, critic, doc.get("config", {})


class PromptOptimizer(TransformerMixin, BaseEstimator):
    """Actor-critic prompt editor with an sklearn-style interface.

    ``fit`` trains on scene specs (or a :class:`~saigc.scene.Dataset`, using its
    train split); ``transform`` greedily edits prompts with the learned policy.

    Parameters
    ----------
    gamma, lr_actor, lr_critic, lambda_len, horizon, episodes
        See :class:`TrainingConfig`.
    noise : NoiseConfig or None
        Encoder imperfection model used to create training states.
    attributes : tuple of int or None
        Restrict edits to these attribute ids.
    random_state : int
    """

    def __init__(self, gamma=0.9, lr_actor=3.0, lr_critic=0.005, lambda_len=0.01, horizon=1,
                 episodes=2000, noise=None, attributes=None, random_state=0):
        self.gamma = gamma
        self.lr_actor = lr_actor
        self.lr_critic = lr_critic
        self.lambda_len = lambda_len
        self.horizon = horizon
        self.episodes = episodes
        self.noise = noise
        self.attributes = attributes
        self.random_state = random_state

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(self.gamma, self.lr_actor, self.lr_critic, self.lambda_len,
                              self.horizon, self.episodes, self.random_state)

    def fit(self, X, y=None):
        specs = X.train if isinstance(X, scene.Dataset) else X
        specs = [s[1] if isinstance(s, tuple) else s for s in specs]
        self.policy_, self.critic_, self.log_ = train(specs, self.training_config(), self.noise, self.attributes)
        return self

    def transform(self, X) -> list[Prompt]:
        check_is_fitted(self, "policy_")
        return [optimize(p, self.policy_, self.horizon, self.attributes) for p in X]

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "policy_")
        config = asdict(self.training_config())
        config["noise"] = asdict(self.noise if self.noise is not None else NoiseConfig())
        save_policy(path, self.policy_, self.critic_, config)

    @classmethod
    def load(cls, path: str | Path) -> PromptOptimizer:
        policy, critic, config = load_policy(path)
        config = dict(config)
        noise = config.pop("noise", None)
        seed = config.pop("seed", 0)
        est = cls(**config, noise=NoiseConfig(**noise) if noise else None, random_state=seed)
        est.policy_, est.critic_, est.log_ = policy, critic, []
        return est
