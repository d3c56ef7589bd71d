"""Synthetic blind-spot vehicle scenes and their ground-truth rasters."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

WIDTH = 36
HEIGHT = 24
N_CELLS = WIDTH * HEIGHT
RASTER_BYTES = N_CELLS * 3

VEHICLE_TYPES = ("sedan", "truck", "three_wheeler", "bus", "motorcycle")
COLORS = ("white", "black", "red", "blue", "green", "yellow", "silver", "orange")
DIRECTIONS = ("left", "right", "rear_left", "rear_right")
HEADINGS = ("toward", "away", "parallel")
DISTANCES = ("near", "mid", "far")

N_CLASSES = len(VEHICLE_TYPES) * len(COLORS)
HEADING_PRIOR = (0.6, 0.2, 0.2)

BACKGROUND = (128, 128, 128)
MARKER = (0, 255, 255)
PALETTE = (
    (255, 255, 255),
    (0, 0, 0),
    (255, 0, 0),
    (0, 0, 255),
    (0, 160, 0),
    (255, 255, 0),
    (192, 192, 192),
    (255, 140, 0),
)

# (width, height) of the glyph bounding box per distance
GLYPH_SIZE = ((12, 8), (8, 6), (5, 4))
MARKER_THICKNESS = 2


@dataclass(frozen=True, order=True)
class SceneSpec:
    vehicle_type: int
    color: int
    direction: int
    heading: int
    distance: int

    def __post_init__(self):
        for name, size in zip(_FIELDS, _CARDINALITY):
            value = getattr(self, name)
            if not (isinstance(value, (int, np.integer)) and 0 <= value < size):
                raise ValueError(f"{name}={value!r} out of range 0..{size - 1}")

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.vehicle_type, self.color, self.direction, self.heading, self.distance)


_FIELDS = ("vehicle_type", "color", "direction", "heading", "distance")
_CARDINALITY = (len(VEHICLE_TYPES), len(COLORS), len(DIRECTIONS), len(HEADINGS), len(DISTANCES))


def all_specs() -> list[SceneSpec]:
    """Every possible scene, in lexicographic order of the attribute tuple."""
    return [SceneSpec(*ids) for ids in np.ndindex(*_CARDINALITY)]


def generate_scene(rng: np.random.Generator) -> SceneSpec:
    vehicle_type = int(rng.integers(len(VEHICLE_TYPES)))
    color = int(rng.integers(len(COLORS)))
    direction = int(rng.integers(len(DIRECTIONS)))
    heading = int(rng.choice(len(HEADINGS), p=HEADING_PRIOR))
    distance = int(rng.integers(len(DISTANCES)))
    return SceneSpec(vehicle_type, color, direction, heading, distance)


def class_of(spec: SceneSpec) -> int:
    return spec.vehicle_type * len(COLORS) + spec.color


def glyph_mask(vehicle_type: int, distance: int) -> np.ndarray:
    """Boolean footprint of a vehicle type inside its (h, w) bounding box."""
    w, h = GLYPH_SIZE[distance]
    r, c = np.mgrid[0:h, 0:w]
    if vehicle_type == 0:  # sedan: full rectangle
        mask = np.ones((h, w), dtype=bool)
    elif vehicle_type == 1:  # truck: cargo box with a lower cab
        mask = ~((r < h // 2) & (c >= w - w // 3))
    elif vehicle_type == 2:  # three-wheeler: isosceles triangle, apex up
        mask = np.abs(2 * c + 1 - w) * h <= (r + 1) * w
    elif vehicle_type == 3:  # bus: rectangle with clipped corners
        corner = ((r == 0) | (r == h - 1)) & ((c == 0) | (c == w - 1))
        mask = ~corner
    elif vehicle_type == 4:  # motorcycle: right triangle, right angle bottom-left
        mask = c * h < (r + 1) * w
    else:
        raise ValueError(f"vehicle_type={vehicle_type} out of range")
    return mask


def marker_mask(spec: SceneSpec) -> np.ndarray:
    """Heading stripe cells inside the glyph bounding box (already clipped to the footprint)."""
    w, h = GLYPH_SIZE[spec.distance]
    stripe = np.zeros((h, w), dtype=bool)
    t = MARKER_THICKNESS
    if spec.heading == 0:  # toward: front edge faces the camera
        stripe[h - t:, :] = True
    elif spec.heading == 1:  # away
        stripe[:t, :] = True
    # parallel: the side facing the road centre
    elif spec.direction in (0, 2):
        stripe[:, w - t:] = True
    else:
        stripe[:, :t] = True
    return stripe & glyph_mask(spec.vehicle_type, spec.distance)


def glyph_origin(direction: int, distance: int) -> tuple[int, int]:
    """Top-left (x, y) of the glyph bounding box."""
    w, h = GLYPH_SIZE[distance]
    third = WIDTH // 3
    if direction == 0:
        return (third - w) // 2, (HEIGHT - h) // 2
    if direction == 1:
        return 2 * third + (third - w) // 2, (HEIGHT - h) // 2
    if direction == 2:
        return 0, HEIGHT - h
    return WIDTH - w, HEIGHT - h


@lru_cache(maxsize=None)
def _render_cached(spec: SceneSpec) -> np.ndarray:
    raster = np.empty((HEIGHT, WIDTH, 3), dtype=np.uint8)
    raster[...] = BACKGROUND
    w, h = GLYPH_SIZE[spec.distance]
    x0, y0 = glyph_origin(spec.direction, spec.distance)
    box = raster[y0:y0 + h, x0:x0 + w]
    box[glyph_mask(spec.vehicle_type, spec.distance)] = PALETTE[spec.color]
    box[marker_mask(spec)] = MARKER
    raster.flags.writeable = False
    return raster


def render(spec: SceneSpec) -> np.ndarray:
    """Render a scene to a read-only (24, 36, 3) uint8 raster."""
    return _render_cached(spec)


@dataclass(frozen=True)
class Dataset:
    items: tuple[tuple[int, SceneSpec], ...]
    n_train: int

    @property
    def train(self) -> list[tuple[int, SceneSpec]]:
        return list(self.items[: self.n_train])

    @property
    def test(self) -> list[tuple[int, SceneSpec]]:
        return list(self.items[self.n_train:])

    def __len__(self):
        return len(self.items)


def generate_dataset(n_train: int, n_test: int, seed: int) -> Dataset:
    if n_train <= 0 or n_test <= 0:
        raise ValueError("n_train and n_test must be positive")
    rng = np.random.default_rng(seed)
    items = tuple((i, generate_scene(rng)) for i in range(n_train + n_test))
    return Dataset(items, n_train)


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    lines = []
    for pos, (scene_id, spec) in enumerate(dataset.items):
        row = {"id": scene_id, "split": "train" if pos < dataset.n_train else "test"}
        row.update(asdict(spec))
        lines.append(json.dumps(row, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dataset(path: str | Path) -> Dataset:
    """Load a JSON Lines dataset; scene ids must be unique and dense from 0."""
    train, test = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            split = row.pop("split")
            scene_id = row.pop("id")
            try:
                spec = SceneSpec(**{name: row.pop(name) for name in _FIELDS})
            except KeyError as exc:
                raise ValueError(f"line {lineno}: missing field {exc}") from None
            if row:
                raise ValueError(f"line {lineno}: unknown fields {sorted(row)}")
            if split == "train":
                train.append((scene_id, spec))
            elif split == "test":
                test.append((scene_id, spec))
            else:
                raise ValueError(f"line {lineno}: bad split {split!r}")
    items = sorted(train) + sorted(test)
    ids = [scene_id for scene_id, _ in items]
    if sorted(ids) != list(range(len(ids))):
        raise ValueError("scene ids must be unique and dense from 0")
    return Dataset(tuple(items), len(train))
