"""Wire format and budget-aware payload assembly.

Frame layout (all multi-byte integers big-endian)::

    "SAIG" | version u8 | flags u8 | reserved u8 (0) | phrase_count u8 | (attr u8, value u8) * n
    | hint_count u8 | (x u16, y u16, w u16, h u16, pixels w*h*3) * m | crc32 u32

The CRC is the IEEE 802.3 CRC-32 over every preceding byte.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codec import (
    CARDINALITY,
    CLUTTER,
    COLOR,
    DIRECTION,
    DISTANCE,
    HEADING,
    VEHICLE_TYPE,
    HintPatch,
    Phrase,
    Prompt,
    decode,
)
from .scene import HEIGHT, WIDTH
from .validation import check_raster

MAGIC = b"SAIG"
VERSION = 1
FLAG_HINTS = 0x01
HEADER_BYTES = 8  # magic, version, flags, reserved, phrase_count
CRC_BYTES = 4
HINT_HEADER_BYTES = 8

TILE = 6
TILES_X = WIDTH // TILE  # 6
TILES_Y = HEIGHT // TILE  # 4
TILE_BYTES = HINT_HEADER_BYTES + TILE * TILE * 3  # 116

# highest priority first; clutter is always sacrificed first
PRIORITY = (VEHICLE_TYPE, DIRECTION, HEADING, COLOR, DISTANCE, CLUTTER)


class WireError(ValueError):
    """Base class for frame parse failures; ``offset`` locates the offending byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{type(self).__name__} at offset {offset}: {message}")
        self.offset = offset


class BadMagic(WireError):
    pass


class UnsupportedVersion(WireError):
    pass


class Truncated(WireError):
    pass


class CrcMismatch(WireError):
    pass


class RangeViolation(WireError):
    pass


class HintOutOfBounds(WireError):
    pass


class CapacityError(ValueError):
    pass


class BudgetTooSmall(ValueError):
    pass


def text_frame_size(n_phrases: int) -> int:
    """Size of a frame carrying ``n_phrases`` phrases and no hints."""
    return HEADER_BYTES + 2 * n_phrases + 1 + CRC_BYTES


def frame_size(n_phrases: int, hints: Sequence[HintPatch] = ()) -> int:
    return text_frame_size(n_phrases) + sum(HINT_HEADER_BYTES + 3 * h.w * h.h for h in hints)


def serialize(prompt: Prompt, hints: Sequence[HintPatch] = ()) -> bytes:
    if len(prompt) > 255 or len(hints) > 255:
        raise CapacityError("at most 255 phrases and 255 hints per frame")
    out = bytearray(MAGIC)
    out += bytes((VERSION, FLAG_HINTS if hints else 0, 0, len(prompt)))
    for attr, value in prompt:
        out += bytes((attr, value))
    out.append(len(hints))
    for h in hints:
        out += struct.pack(">HHHH", h.x, h.y, h.w, h.h)
        out += h.pixels
    out += struct.pack(">I", zlib.crc32(out))
    return bytes(out)


def deserialize(data: bytes) -> tuple[Prompt, list[HintPatch]]:
    """Parse a frame strictly.

    Structure (magic, version, lengths) is checked first, then the CRC, then the
    field values. Raises a :class:`WireError` subclass on the first problem found.
    """
    data = bytes(data)
    n = len(data)

    def need(pos: int, count: int, what: str):
        if pos + count > n:
            raise Truncated(f"need {count} byte(s) for {what}, frame has {n}", min(pos, n))

    need(0, 4, "magic")
    if data[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {data[:4]!r}", 0)
    need(4, 1, "version")
    if data[4] != VERSION:
        raise UnsupportedVersion(f"version {data[4]}", 4)
    need(5, 3, "flags, reserved and phrase_count")
    flags = data[5]
    reserved = data[6]
    n_phrases = data[7]
    pos = HEADER_BYTES
    need(pos, 2 * n_phrases, "phrases")
    phrase_pos = pos
    pos += 2 * n_phrases
    need(pos, 1, "hint_count")
    n_hints = data[pos]
    pos += 1
    hint_spans = []
    for i in range(n_hints):
        need(pos, HINT_HEADER_BYTES, f"hint {i} header")
        x, y, w, h = struct.unpack_from(">HHHH", data, pos)
        need(pos + HINT_HEADER_BYTES, 3 * w * h, f"hint {i} pixels")
        hint_spans.append((pos, x, y, w, h))
        pos += HINT_HEADER_BYTES + 3 * w * h
    need(pos, CRC_BYTES, "crc")
    if pos + CRC_BYTES != n:
        raise RangeViolation(f"{n - pos - CRC_BYTES} trailing byte(s) after crc", pos + CRC_BYTES)
    (crc,) = struct.unpack_from(">I", data, pos)
    computed = zlib.crc32(data[:pos])
    if crc != computed:
        raise CrcMismatch(f"stored 0x{crc:08x}, computed 0x{computed:08x}", pos)

    if flags & ~FLAG_HINTS:
        raise RangeViolation(f"reserved flag bits set (0x{flags:02x})", 5)
    if bool(flags & FLAG_HINTS) != (n_hints > 0):
        raise RangeViolation(f"hint flag {flags & FLAG_HINTS} disagrees with hint_count {n_hints}", 5)
    if reserved != 0:
        raise RangeViolation(f"reserved byte is 0x{reserved:02x}", 6)
    phrases = []
    for i in range(n_phrases):
        off = phrase_pos + 2 * i
        attr, value = data[off], data[off + 1]
        if attr >= len(CARDINALITY):
            raise RangeViolation(f"attribute id {attr}", off)
        if value >= CARDINALITY[attr]:
            raise RangeViolation(f"value {value} for attribute {attr}", off + 1)
        phrases.append(Phrase(attr, value))
    try:
        prompt = Prompt(tuple(phrases))
    except ValueError as exc:
        raise RangeViolation(str(exc), 7) from None
    hints = []
    for off, x, y, w, h in hint_spans:
        if x + w > WIDTH or y + h > HEIGHT:
            raise HintOutOfBounds(f"hint ({x},{y},{w},{h}) outside {WIDTH}x{HEIGHT}", off)
        start = off + HINT_HEADER_BYTES
        hints.append(HintPatch(x, y, w, h, data[start:start + 3 * w * h]))
    return prompt, hints


def tile_saliency(original, text_only_decode) -> np.ndarray:
    """Differing-cell count for each 6x6 tile, shape (4, 6)."""
    a = check_raster(original, "original")
    b = check_raster(text_only_decode, "text_only_decode")
    diff = np.any(a != b, axis=-1)
    return diff.reshape(TILES_Y, TILE, TILES_X, TILE).sum(axis=(1, 3))


def select_hints(original, text_only_decode, budget_remaining: int) -> list[HintPatch]:
    """Greedily fill the byte budget with the tiles the text reconstructs worst."""
    original = check_raster(original, "original")
    saliency = tile_saliency(original, text_only_decode).ravel()
    # stable sort on -saliency keeps row-major order among ties
    order = np.argsort(-saliency, kind="stable")
    hints = []
    remaining = budget_remaining
    for tile in order:
        if saliency[tile] == 0 or remaining < TILE_BYTES:
            break
        ty, tx = divmod(int(tile), TILES_X)
        hints.append(HintPatch.from_raster(original, tx * TILE, ty * TILE, TILE, TILE))
        remaining -= TILE_BYTES
    return hints


def truncate_prompt(prompt: Prompt, max_phrases: int) -> Prompt:
    """Keep the ``max_phrases`` most important phrases, preserving their original order."""
    if len(prompt) <= max_phrases:
        return prompt
    rank = {attr: i for i, attr in enumerate(PRIORITY)}
    # among clutter phrases the later ones go first
    keyed = sorted(range(len(prompt)), key=lambda i: (rank[prompt[i].attribute], i))
    keep = sorted(keyed[:max_phrases])
    return Prompt(tuple(prompt[i] for i in keep))


@dataclass(frozen=True)
class BudgetConfig:
    budget_bytes: int
    hint_patch_size: int = TILE

    def __post_init__(self):
        if self.budget_bytes < 0:
            raise ValueError("budget_bytes must be non-negative")
        if self.hint_patch_size != TILE:
            raise ValueError(f"hint patches are fixed at {TILE}x{TILE} cells")


def assemble_payload(prompt: Prompt, original, budget: BudgetConfig | int) -> bytes:
    """Text first, truncated by priority if needed; leftover bytes buy hint tiles."""
    budget_bytes = budget.budget_bytes if isinstance(budget, BudgetConfig) else int(budget)
    if budget_bytes < text_frame_size(0):
        raise BudgetTooSmall(f"budget {budget_bytes} below the {text_frame_size(0)}-byte minimal frame")
    max_phrases = (budget_bytes - text_frame_size(0)) // 2
    kept = truncate_prompt(prompt, max_phrases)
    remaining = budget_bytes - text_frame_size(len(kept))
    hints = select_hints(original, decode(kept), remaining)
    payload = serialize(kept, hints)
    assert len(payload) <= budget_bytes
    return payload


def describe(data: bytes) -> dict:
    """Parsed fields of a valid frame as plain JSON-ready values."""
    prompt, hints = deserialize(data)
    data = bytes(data)
    return {
        "length": len(data),
        "version": data[4],
        "flags": data[5],
        "phrases": [str(p) for p in prompt],
        "hints": [[h.x, h.y, h.w, h.h] for h in hints],
        "crc32": f"0x{struct.unpack_from('>I', data, len(data) - CRC_BYTES)[0]:08x}",
    }


def hexdump(data: bytes, width: int = 16) -> str:
    lines = []
    for off in range(0, len(data), width):
        chunk = data[off:off + width]
        lines.append(f"{off:08x}  {chunk.hex(' '):<{3 * width - 1}}")
    return "\n".join(lines)
