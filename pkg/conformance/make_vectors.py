"""Regenerate the golden payload vectors.

Frames are packed field by field here, with a table-free bitwise CRC-32, so the
vectors do not depend on the package's own serializer.
"""

import json
import struct
from pathlib import Path

HERE = Path(__file__).parent / "vectors"

ATTR = ("vehicle_type", "color", "direction", "heading", "distance", "clutter")
NAMES = (
    ("sedan", "truck", "three_wheeler", "bus", "motorcycle"),
    ("white", "black", "red", "blue", "green", "yellow", "silver", "orange"),
    ("left", "right", "rear_left", "rear_right"),
    ("toward", "away", "parallel"),
    ("near", "mid", "far"),
    ("watermark", "glare", "shadow", "smudge"),
)


def crc32_bitwise(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (0xEDB88320 if crc & 1 else 0)
    return crc ^ 0xFFFFFFFF


def frame(phrases, hints=()):
    body = b"SAIG" + bytes((1, 1 if hints else 0, 0, len(phrases)))
    for a, v in phrases:
        body += bytes((a, v))
    body += bytes((len(hints),))
    for x, y, w, h, fill in hints:
        body += struct.pack(">HHHH", x, y, w, h) + bytes(fill) * (w * h)
    crc = crc32_bitwise(body)
    return body + struct.pack(">I", crc), crc


CASES = {
    "01_empty": ([], []),
    "02_full_text": ([(0, 0), (1, 2), (2, 0), (3, 0), (4, 0)], []),
    "03_clutter": ([(0, 3), (1, 5), (2, 3), (4, 2), (5, 1), (5, 3)], []),
    "04_one_hint": ([(0, 1), (1, 7), (2, 1), (3, 1), (4, 1)], [(24, 6, 6, 6, (128, 128, 128))]),
    "05_two_hints": ([(0, 4), (2, 2)], [(0, 18, 6, 6, (0, 255, 255)), (30, 0, 6, 6, (255, 0, 255))]),
}


def main():
    HERE.mkdir(exist_ok=True)
    for name, (phrases, hints) in CASES.items():
        data, crc = frame(phrases, hints)
        (HERE / f"{name}.bin").write_bytes(data)
        desc = {
            "length": len(data),
            "version": 1,
            "flags": 1 if hints else 0,
            "phrases": [f"{ATTR[a]}={NAMES[a][v]}" for a, v in phrases],
            "hints": [[x, y, w, h] for x, y, w, h, _ in hints],
            "crc32": f"0x{crc:08x}",
        }
        (HERE / f"{name}.json").write_text(json.dumps(desc, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
