"""Shared fixtures: deterministic images, scripted scenes, manifest builders."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `oracles` importable

from ddp.harness import Query
from ddp.raster import Raster, encode_image


def random_raster(rng: np.random.Generator, width: int, height: int) -> Raster:
    return Raster(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))


def gradient_raster(width: int, height: int) -> Raster:
    """Deterministic RGB gradient, distinct along both axes and channels."""
    ys, xs = np.mgrid[0:height, 0:width]
    r = (xs * 255 // max(width - 1, 1)).astype(np.uint8)
    g = (ys * 255 // max(height - 1, 1)).astype(np.uint8)
    b = ((xs + ys) * 255 // max(width + height - 2, 1)).astype(np.uint8)
    return Raster(np.stack([r, g, b], axis=-1))


def checkerboard_raster(width: int, height: int, cell: int = 2) -> Raster:
    ys, xs = np.mgrid[0:height, 0:width]
    board = ((xs // cell) + (ys // cell)) % 2 == 0
    plane = np.where(board, 255, 0).astype(np.uint8)
    return Raster(np.stack([plane, plane, plane], axis=-1))


def occluded_dog_scene() -> Raster:
    """Synthetic 500x400 counting scene: one gray animal body split in two
    by a brown tree trunk, on grass under sky."""
    arr = np.empty((400, 500, 3), dtype=np.uint8)
    arr[:200] = (150, 200, 240)            # sky
    arr[200:] = (80, 160, 70)              # grass
    arr[180:330, 150:350] = (120, 115, 110)  # animal body
    arr[100:360, 235:265] = (95, 60, 30)     # trunk splitting the body
    return Raster(arr)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture
def dog_query(tmp_path) -> Query:
    png = encode_image(occluded_dog_scene())
    path = tmp_path / "dog.png"
    path.write_bytes(png)
    return Query(
        id="dog-1",
        image=str(path),
        question="How many dogs are in the picture?",
        choices={"A": "0", "B": "1", "C": "2", "D": "3"},
        answer="C",
        tags=["counting-fixture"],
    )


DOG_SCRIPT = [
    '{"category": "perceptual_phenomena", "subtask": "counting"}',
    '{"tool": "red_box", "params": {"x": 60, "y": 30, "w": 80, "h": 70}, '
    '"note": "mark the disputed split region"}',
    '{"tool": "crop", "params": {"x": 40, "y": 30, "w": 100, "h": 80}, '
    '"note": "zoom on the occluder"}',
    "STOP",
    "The body's front and back portions line up across the trunk and their "
    "widths match, so the occluder splits one animal into two parts; counting "
    "the visible parts as whole animals gives 2.\nFinal Answer: C",
]


def write_manifest(tmp_path, queries) -> str:
    """Write query dicts (with PNG bytes under 'png') as a manifest + images."""
    lines = []
    for q in queries:
        img_name = f"{q['id']}.png"
        (tmp_path / img_name).write_bytes(q["png"])
        entry = {k: v for k, v in q.items() if k != "png"}
        entry["image"] = img_name
        lines.append(json.dumps(entry))
    path = tmp_path / "manifest.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)
