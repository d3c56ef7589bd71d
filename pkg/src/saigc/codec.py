"""Image-to-prompt encoding, the encoder imperfection model, and prompt-to-image decoding."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import scene
from .scene import HEIGHT, WIDTH, SceneSpec
from .validation import check_probability, check_raster, check_rasters

ATTRIBUTES = ("vehicle_type", "color", "direction", "heading", "distance", "clutter")
CLUTTER_NAMES = ("watermark", "glare", "shadow", "smudge")
VALUE_NAMES = (
    scene.VEHICLE_TYPES,
    scene.COLORS,
    scene.DIRECTIONS,
    scene.HEADINGS,
    scene.DISTANCES,
    CLUTTER_NAMES,
)
CARDINALITY = tuple(len(v) for v in VALUE_NAMES)  # (5, 8, 4, 3, 3, 4)

VEHICLE_TYPE, COLOR, DIRECTION, HEADING, DISTANCE, CLUTTER = range(6)
N_SEMANTIC = 5
MAX_PHRASES = 8
MAX_CLUTTER = 4

# decoder fallbacks for attributes the prompt does not mention
DEFAULTS = (0, 0, 0, 2, 1)  # sedan, white, left, parallel, mid

ARTIFACT = (255, 0, 255)
ARTIFACT_SIZE = 4


class Phrase(NamedTuple):
    attribute: int
    value: int

    def __str__(self):
        return f"{ATTRIBUTES[self.attribute]}={VALUE_NAMES[self.attribute][self.value]}"


@dataclass(frozen=True)
class Prompt:
    """Ordered phrases describing one scene; the state the edit policy acts on."""

    phrases: tuple[Phrase, ...] = ()

    def __post_init__(self):
        phrases = tuple(Phrase(int(a), int(v)) for a, v in self.phrases)
        object.__setattr__(self, "phrases", phrases)
        if len(phrases) > MAX_PHRASES:
            raise ValueError(f"prompt has {len(phrases)} phrases, max {MAX_PHRASES}")
        seen = set()
        n_clutter = 0
        for attr, value in phrases:
            if not 0 <= attr < len(ATTRIBUTES):
                raise ValueError(f"attribute id {attr} out of range")
            if not 0 <= value < CARDINALITY[attr]:
                raise ValueError(f"value {value} out of range for {ATTRIBUTES[attr]}")
            if attr == CLUTTER:
                n_clutter += 1
            elif attr in seen:
                raise ValueError(f"duplicate {ATTRIBUTES[attr]} phrase")
            seen.add(attr)
        if n_clutter > MAX_CLUTTER:
            raise ValueError(f"{n_clutter} clutter phrases, max {MAX_CLUTTER}")

    def __len__(self):
        return len(self.phrases)

    def __iter__(self):
        return iter(self.phrases)

    def __getitem__(self, index):
        return self.phrases[index]

    def __str__(self):
        return self.to_text()

    def get(self, attribute: int) -> int | None:
        """Value of a semantic attribute, or None when absent."""
        for attr, value in self.phrases:
            if attr == attribute:
                return value
        return None

    def has(self, attribute: int) -> bool:
        return any(attr == attribute for attr, _ in self.phrases)

    @property
    def n_clutter(self) -> int:
        return sum(1 for attr, _ in self.phrases if attr == CLUTTER)

    def to_text(self) -> str:
        return ";".join(str(p) for p in self.phrases)

    @classmethod
    def from_text(cls, text: str) -> Prompt:
        phrases = []
        for token in filter(None, text.strip().split(";")):
            name, sep, value = token.partition("=")
            if not sep or name not in ATTRIBUTES:
                raise ValueError(f"bad phrase token {token!r}")
            attr = ATTRIBUTES.index(name)
            if value not in VALUE_NAMES[attr]:
                raise ValueError(f"unknown {name} value {value!r}")
            phrases.append(Phrase(attr, VALUE_NAMES[attr].index(value)))
        return cls(tuple(phrases))

    @classmethod
    def from_spec(cls, spec: SceneSpec) -> Prompt:
        return cls(tuple(Phrase(a, v) for a, v in enumerate(spec.as_tuple())))


@dataclass(frozen=True)
class NoiseConfig:
    p_drop_heading: float = 0.5
    p_drop_other: float = 0.1
    p_clutter: float = 0.4
    p_value_swap: float = 0.1

    def __post_init__(self):
        for name in ("p_drop_heading", "p_drop_other", "p_clutter", "p_value_swap"):
            check_probability(getattr(self, name), name)


@dataclass(frozen=True)
class HintPatch:
    """A ground-truth pixel rectangle sent alongside the prompt."""

    x: int
    y: int
    w: int
    h: int
    pixels: bytes

    def __post_init__(self):
        if len(self.pixels) != self.w * self.h * 3:
            raise ValueError(f"hint pixels: expected {self.w * self.h * 3} bytes, got {len(self.pixels)}")

    def in_bounds(self) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x + self.w <= WIDTH and self.y + self.h <= HEIGHT

    @classmethod
    def from_raster(cls, raster, x: int, y: int, w: int, h: int) -> HintPatch:
        raster = check_raster(raster)
        return cls(x, y, w, h, raster[y:y + h, x:x + w].tobytes())


class HintBoundsError(ValueError):
    pass


def pack_cells(raster: np.ndarray) -> np.ndarray:
    """Collapse RGB triples to one uint32 per cell so cell equality is a single compare."""
    r = raster.reshape(-1, 3).astype(np.uint32)
    return (r[:, 0] << 16) | (r[:, 1] << 8) | r[:, 2]


@lru_cache(maxsize=1)
def template_bank() -> tuple[list[SceneSpec], np.ndarray]:
    """All 1440 renders as packed cells, in lexicographic spec order."""
    specs = scene.all_specs()
    bank = np.stack([pack_cells(scene.render(s)) for s in specs])
    bank.flags.writeable = False
    return specs, bank


def match_scores(raster: np.ndarray) -> np.ndarray:
    """Cell agreement of ``raster`` with every template, aligned with ``all_specs()``."""
    _, bank = template_bank()
    return (bank == pack_cells(raster)).sum(axis=1)


def encode_clean(raster) -> Prompt:
    raster = check_raster(raster)
    specs, _ = template_bank()
    # argmax returns the first maximum: the lexicographically smallest spec wins ties
    best = specs[int(np.argmax(match_scores(raster)))]
    return Prompt.from_spec(best)


def apply_noise(prompt: Prompt, cfg: NoiseConfig, rng: np.random.Generator) -> Prompt:
    """Simulate an imperfect captioner: drop phrases, swap the color, inject clutter.

    Random draws happen in a fixed order (one per phrase, then swap, then clutter)
    regardless of the probabilities, so the stream stays aligned across configs.
    """
    kept = []
    for attr, value in prompt:
        u = rng.random()
        if attr == HEADING:
            if u < cfg.p_drop_heading:
                continue
        elif attr != CLUTTER and u < cfg.p_drop_other:
            continue
        kept.append(Phrase(attr, value))

    u_swap, wrong = rng.random(), int(rng.integers(CARDINALITY[COLOR] - 1))
    if u_swap < cfg.p_value_swap:
        for i, (attr, value) in enumerate(kept):
            if attr == COLOR:
                kept[i] = Phrase(COLOR, wrong if wrong < value else wrong + 1)

    u_clutter, clutter_value = rng.random(), int(rng.integers(CARDINALITY[CLUTTER]))
    n_clutter = sum(1 for attr, _ in kept if attr == CLUTTER)
    if u_clutter < cfg.p_clutter and len(kept) < MAX_PHRASES and n_clutter < MAX_CLUTTER:
        kept.append(Phrase(CLUTTER, clutter_value))
    return Prompt(tuple(kept))


def spec_from_prompt(prompt: Prompt) -> SceneSpec:
    ids = list(DEFAULTS)
    for attr, value in prompt:
        if attr != CLUTTER:
            ids[attr] = value
    return SceneSpec(*ids)


def artifact_origin(clutter_value: int) -> tuple[int, int]:
    return 4 + 8 * clutter_value, 2


def decode(prompt: Prompt, hints: Sequence[HintPatch] = ()) -> np.ndarray:
    """Render a prompt, stamp clutter artifacts, then paste hint patches in order."""
    for hint in hints:
        if not hint.in_bounds():
            raise HintBoundsError(f"hint ({hint.x},{hint.y},{hint.w},{hint.h}) outside {WIDTH}x{HEIGHT} raster")
    raster = scene.render(spec_from_prompt(prompt)).copy()
    for attr, value in prompt:
        if attr == CLUTTER:
            x, y = artifact_origin(value)
            raster[y:y + ARTIFACT_SIZE, x:x + ARTIFACT_SIZE] = ARTIFACT
    for hint in hints:
        patch = np.frombuffer(hint.pixels, dtype=np.uint8).reshape(hint.h, hint.w, 3)
        raster[hint.y:hint.y + hint.h, hint.x:hint.x + hint.w] = patch
    return raster


class PromptEncoder(TransformerMixin, BaseEstimator):
    """Rasters in, prompts out; optionally passes each prompt through the noise model.

    Parameters
    ----------
    noise : NoiseConfig or None
        Imperfection model. ``None`` gives the exact inverse of rendering.
    random_state : int
        Seed for the noise draws.
    """

    def __init__(self, noise: NoiseConfig | None = None, random_state: int = 0):
        self.noise = noise
        self.random_state = random_state

    def fit(self, X=None, y=None):
        template_bank()
        self.n_templates_ = len(template_bank()[0])
        return self

    def transform(self, X) -> list[Prompt]:
        rasters = check_rasters(X)
        prompts = [encode_clean(r) for r in rasters]
        if self.noise is not None:
            rng = np.random.default_rng(self.random_state)
            prompts = [apply_noise(p, self.noise, rng) for p in prompts]
        return prompts


class PromptDecoder(TransformerMixin, BaseEstimator):
    """Prompts in, rasters out (no hints); the inverse side of :class:`PromptEncoder`."""

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        return np.stack([decode(p) for p in X])
