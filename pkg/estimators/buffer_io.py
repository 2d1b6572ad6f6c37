"""
estimators/buffer_io.py

JSON-lines buffer files: one ResampleBlock per line,
{"t": ..., "x": [...], "a": ..., "loss": ..., "resamples": [[[...], a], ...]}.
"""

import json
import os
from typing import Iterable, List

from .kgr import ResampleBlock


def save_buffer(blocks: Iterable[ResampleBlock], path: str) -> int:
    """Write blocks to a .jsonl file; returns the number of lines written."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for block in blocks:
            f.write(json.dumps(block.to_dict()))
            f.write("\n")
            count += 1
    return count


def load_buffer(path: str) -> List[ResampleBlock]:
    """Read a .jsonl buffer file back into blocks, preserving round order."""
    blocks = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                blocks.append(ResampleBlock.from_dict(json.loads(line)))
            except (KeyError, TypeError, IndexError, ValueError) as e:
                raise ValueError(f"{path}:{lineno}: malformed buffer entry ({e})") from e
    rounds = [b.t for b in blocks]
    if rounds != sorted(rounds):
        raise ValueError(f"{path}: buffer entries are not ordered by round")
    return blocks
