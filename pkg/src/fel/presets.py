"""Fractal definition files and shipped presets.

A definition file is UTF-8 JSON with fields ``dimension`` (N), ``scale`` (L),
``maps`` (list of ``{"rotation": N*N row-major reals, "translation": N reals}``)
and ``name``.  Three presets ship with the package:

* ``gasket2`` -- planar Sierpinski gasket, 3 maps, L = 2.
* ``gasket3`` -- three-dimensional gasket on a regular tetrahedron, 4 maps, L = 2.
* ``snowflake`` -- Lindstrom snowflake, 7 maps, L = 3; the six outer maps fix
  the vertices of a unit-circumradius hexagon, the seventh fixes the center.

All satisfy the open set condition (take the open convex hull of the fixed
points), which is documented here rather than checked: no finite procedure
verifies it for arbitrary input.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .ifs import Similitude

PRESET_NAMES = ("gasket2", "gasket3", "snowflake")


def _gasket_maps(corners: np.ndarray) -> list[dict]:
    dim = corners.shape[1]
    eye = np.eye(dim)
    return [
        {"rotation": eye.ravel().tolist(), "translation": (c / 2.0).tolist()}
        for c in corners
    ]


def preset_definition(name: str) -> dict:
    if name == "gasket2":
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
        return {"name": name, "dimension": 2, "scale": 2.0, "maps": _gasket_maps(corners)}
    if name == "gasket3":
        corners = np.array(
            [
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.5, math.sqrt(3.0) / 2.0, 0.0],
                [0.5, math.sqrt(3.0) / 6.0, math.sqrt(6.0) / 3.0],
            ]
        )
        return {"name": name, "dimension": 3, "scale": 2.0, "maps": _gasket_maps(corners)}
    if name == "snowflake":
        eye = np.eye(2)
        maps = []
        for k in range(6):
            h = np.array([math.cos(k * math.pi / 3.0), math.sin(k * math.pi / 3.0)])
            maps.append({"rotation": eye.ravel().tolist(),
                         "translation": (2.0 * h / 3.0).tolist()})
        maps.append({"rotation": eye.ravel().tolist(), "translation": [0.0, 0.0]})
        return {"name": name, "dimension": 2, "scale": 3.0, "maps": maps}
    raise KeyError(f"unknown preset {name!r}")


def maps_from_definition(definition: dict) -> tuple[list[Similitude], str | None]:
    try:
        dim = int(definition["dimension"])
        scale = float(definition["scale"])
        raw_maps = definition["maps"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed fractal definition: {exc}") from exc
    maps = []
    for k, entry in enumerate(raw_maps):
        rot = np.array(entry["rotation"], dtype=float).reshape(dim, dim)
        tr = np.array(entry["translation"], dtype=float)
        try:
            maps.append(Similitude(scale=scale, rotation=rot, translation=tr))
        except ValueError as exc:
            raise ValueError(f"map {k + 1}: {exc}") from exc
    return maps, definition.get("name")


def definition_from_maps(maps: list[Similitude], name: str | None) -> dict:
    return {
        "name": name,
        "dimension": maps[0].dim,
        "scale": maps[0].scale,
        "maps": [
            {"rotation": s.rotation.ravel().tolist(), "translation": s.translation.tolist()}
            for s in maps
        ],
    }


def load_definition(source: str | Path) -> dict:
    """Read a definition from a preset name or a JSON file path."""
    text = None
    if isinstance(source, str) and source in PRESET_NAMES:
        try:
            text = (resources.files("fel") / "presets" / f"{source}.json").read_text("utf-8")
        except FileNotFoundError:
            return preset_definition(source)
    if text is None:
        text = Path(source).read_text("utf-8")
    return json.loads(text)


def load_maps(source: str | Path) -> tuple[list[Similitude], str | None]:
    return maps_from_definition(load_definition(source))


def write_definition(definition: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(definition, indent=2) + "\n", "utf-8")


def write_presets(directory: str | Path) -> None:
    """Materialize the shipped presets as JSON files (used at package build time)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in PRESET_NAMES:
        write_definition(preset_definition(name), directory / f"{name}.json")
