"""End-to-end evaluation: encode, (optionally) optimize, transmit under a budget, decode, score."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import scene
from .channel import BudgetConfig, assemble_payload, deserialize
from .codec import CLUTTER, HEADING, NoiseConfig, Prompt, apply_noise, decode, encode_clean
from .metrics import EvalRecord, compression_ratio, quality, rank_of, recall_at_k
from .rl import PolicyParams, exhaustive_search, optimize

MODES = ("original", "modified")


def noisy_prompt(spec: scene.SceneSpec, scene_id: int, noise: NoiseConfig, seed: int) -> Prompt:
    """Encoder output for one scene; depends only on (seed, scene_id), never on evaluation order."""
    rng = np.random.default_rng([seed, scene_id])
    return apply_noise(encode_clean(scene.render(spec)), noise, rng)


@dataclass(frozen=True)
class SceneResult:
    record: EvalRecord
    sent_prompt: Prompt
    payload: bytes


def evaluate_scene(scene_id: int, spec: scene.SceneSpec, prompt: Prompt, budget: int,
                   reference: int | str = "desk") -> SceneResult:
    original = scene.render(spec)
    payload = assemble_payload(prompt, original, BudgetConfig(budget))
    received, hints = deserialize(payload)
    decoded = decode(received, hints)
    record = EvalRecord(
        scene_id=scene_id,
        true_class=scene.class_of(spec),
        rank_of_true=rank_of(decoded, scene.class_of(spec)),
        payload_bytes=len(payload),
        compression_ratio=compression_ratio(len(payload), reference),
        quality=quality(decoded, original),
    )
    return SceneResult(record, received, payload)


def prepare_prompts(items: Sequence[tuple[int, scene.SceneSpec]], mode: str, policy: PolicyParams | None,
                    noise: NoiseConfig, seed: int, horizon: int = 1) -> list[Prompt]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    prompts = [noisy_prompt(spec, sid, noise, seed) for sid, spec in items]
    if mode == "modified":
        if policy is None:
            raise ValueError("modified mode needs a trained policy")
        prompts = [optimize(p, policy, horizon) for p in prompts]
    return prompts


def evaluate(items: Sequence[tuple[int, scene.SceneSpec]], mode: str, policy: PolicyParams | None,
             budget: int, noise: NoiseConfig | None = None, seed: int = 0, horizon: int = 1,
             reference: int | str = "desk") -> list[EvalRecord]:
    """One record per scene, sorted by scene id."""
    noise = NoiseConfig() if noise is None else noise
    prompts = prepare_prompts(items, mode, policy, noise, seed, horizon)
    records = [evaluate_scene(sid, spec, p, budget, reference).record for (sid, spec), p in zip(items, prompts)]
    return sorted(records, key=lambda r: r.scene_id)


def summarize(records: Sequence[EvalRecord], ks: Sequence[int] = (1, 5)) -> dict:
    out = {f"recall@{k}": recall_at_k(records, k) for k in ks}
    out["mean_quality"] = float(np.mean([r.quality for r in records]))
    out["mean_ratio"] = float(np.mean([r.compression_ratio for r in records]))
    return out


def sweep(items, policy, budgets: Sequence[int], mode: str = "modified", noise: NoiseConfig | None = None,
          seed: int = 0, horizon: int = 1, reference: int | str = "desk") -> list[dict]:
    """Summary row per budget; the prompts are prepared once and shared across budgets."""
    noise = NoiseConfig() if noise is None else noise
    prompts = prepare_prompts(items, mode, policy, noise, seed, horizon)
    rows = []
    for budget in budgets:
        records = [evaluate_scene(sid, spec, p, budget, reference).record
                   for (sid, spec), p in zip(items, prompts)]
        row = {"budget": budget}
        row.update(summarize(records))
        rows.append(row)
    return rows


# the two-attribute MDP: only heading and clutter are editable, and only they are noisy
SMALL_MDP_ATTRIBUTES = (HEADING, CLUTTER)
SMALL_MDP_NOISE = NoiseConfig(p_drop_other=0.0, p_value_swap=0.0)


@dataclass(frozen=True)
class OracleTrial:
    scene_id: int
    start: Prompt
    greedy: Prompt
    greedy_quality: float
    optimal: Prompt
    optimal_quality: float

    @property
    def gap(self) -> float:
        return self.optimal_quality - self.greedy_quality


def small_mdp_trials(policy: PolicyParams, items: Sequence[tuple[int, scene.SceneSpec]], seed: int = 0,
                     horizon: int = 2, depth: int = 2) -> list[OracleTrial]:
    """Greedy edits versus exhaustive search on the heading/clutter MDP, one trial per scene."""
    trials = []
    for sid, spec in items:
        original = scene.render(spec)
        start = noisy_prompt(spec, sid, SMALL_MDP_NOISE, seed)
        greedy = optimize(start, policy, horizon, SMALL_MDP_ATTRIBUTES)
        best_q, best = exhaustive_search(start, original, depth, SMALL_MDP_ATTRIBUTES)
        trials.append(OracleTrial(sid, start, greedy, quality(decode(greedy), original), best, best_q))
    return trials
