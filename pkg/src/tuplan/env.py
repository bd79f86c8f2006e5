"""Grid workspaces: random generation, connectivity and JSON persistence.

Cells are ``(x, y)`` pairs with ``0 <= x < width`` and ``0 <= y < height``.
The linear index of a cell is ``y * width + x``; every ordering in this
package (places, tie-breaks) follows that index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InsufficientFreeSpace, ParseError

Cell = tuple[int, int]


@dataclass(frozen=True)
class Region:
    symbol: int
    cells: frozenset[Cell]


@dataclass(frozen=True)
class GridEnvironment:
    width: int
    height: int
    obstacles: frozenset[Cell] = frozenset()
    regions: tuple[Region, ...] = ()
    robot_starts: tuple[Cell, ...] = ()
    seed: int | None = None
    n_symbols: int = field(default=-1)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        object.__setattr__(self, "obstacles", frozenset(map(tuple, self.obstacles)))
        object.__setattr__(self, "robot_starts", tuple(map(tuple, self.robot_starts)))
        object.__setattr__(self, "regions", tuple(self.regions))
        for c in self.obstacles:
            self._check_inside(c, "obstacle")
        for c in self.robot_starts:
            self._check_inside(c, "robot")
        seen: dict[Cell, int] = {}
        symbols = set()
        for reg in self.regions:
            if reg.symbol < 0:
                raise ValueError(f"negative region symbol {reg.symbol}")
            if not reg.cells:
                raise ValueError(f"region {reg.symbol} has no cells")
            symbols.add(reg.symbol)
            for c in reg.cells:
                self._check_inside(c, f"region {reg.symbol}")
                if c in self.obstacles:
                    raise ValueError(f"region {reg.symbol} overlaps obstacle at {c}")
                if c in seen and seen[c] != reg.symbol:
                    raise ValueError(f"regions {seen[c]} and {reg.symbol} overlap at {c}")
                seen[c] = reg.symbol
        n = max(symbols) + 1 if symbols else 0
        if self.n_symbols < 0:
            object.__setattr__(self, "n_symbols", n)
        elif self.n_symbols < n:
            raise ValueError("n_symbols smaller than the largest region symbol")

    def _check_inside(self, c, what):
        x, y = c
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"{what} cell {c} outside {self.width}x{self.height} grid")

    @property
    def n_robots(self) -> int:
        return len(self.robot_starts)

    def index(self, cell: Cell) -> int:
        return cell[1] * self.width + cell[0]

    def free_mask(self) -> np.ndarray:
        """Boolean array of shape (height, width), True on free cells."""
        mask = np.ones((self.height, self.width), dtype=bool)
        for x, y in self.obstacles:
            mask[y, x] = False
        return mask

    def free_cells(self) -> list[Cell]:
        mask = self.free_mask()
        return [(x, y) for y in range(self.height) for x in range(self.width) if mask[y, x]]

    def label_of(self) -> dict[Cell, int]:
        return {c: reg.symbol for reg in self.regions for c in reg.cells}


def largest_component(grid: np.ndarray) -> set[Cell]:
    """Largest 4-connected set of free cells in a (height, width) boolean grid.

    Ties go to the component holding the smallest cell index.
    """
    grid = np.asarray(grid, dtype=bool)
    labels, n = ndimage.label(grid)
    if n == 0:
        return set()
    sizes = np.bincount(labels.ravel())[1:]
    # labels are assigned in raster order, so the first maximal label wins ties
    best = int(np.argmax(sizes)) + 1
    ys, xs = np.nonzero(labels == best)
    return {(int(x), int(y)) for x, y in zip(xs, ys)}


def generate(width, height, n_regions, n_robots, obstacle_density=0.0, seed=None) -> GridEnvironment:
    """Random environment: obstacles by density, regions and robots in the main component."""
    if not 0.0 <= obstacle_density < 1.0:
        raise ValueError("obstacle_density must lie in [0, 1)")
    if n_regions < 0 or n_robots < 0:
        raise ValueError("counts must be non-negative")
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**32))
    rng = np.random.default_rng(seed)
    area = width * height
    n_obs = int(round(obstacle_density * area))
    flat = rng.choice(area, size=n_obs, replace=False) if n_obs else np.empty(0, dtype=int)
    obstacles = frozenset((int(i % width), int(i // width)) for i in flat)

    mask = np.ones((height, width), dtype=bool)
    for x, y in obstacles:
        mask[y, x] = False
    comp = sorted(largest_component(mask), key=lambda c: c[1] * width + c[0])
    need = n_regions + n_robots
    if len(comp) < need:
        raise InsufficientFreeSpace(
            f"largest component has {len(comp)} cells, {need} needed"
        )
    picks = rng.choice(len(comp), size=need, replace=False)
    cells = [comp[int(i)] for i in picks]
    regions = tuple(Region(i, frozenset([cells[i]])) for i in range(n_regions))
    robots = tuple(cells[n_regions:])
    return GridEnvironment(width, height, obstacles, regions, robots, seed=int(seed))


def resample_robots(env: GridEnvironment, n_robots: int, rng) -> GridEnvironment:
    """Same map and regions, fresh robot starts in the main component off the regions."""
    comp = sorted(largest_component(env.free_mask()), key=env.index)
    taken = set().union(*(r.cells for r in env.regions)) if env.regions else set()
    pool = [c for c in comp if c not in taken]
    if len(pool) < n_robots:
        raise InsufficientFreeSpace(f"{len(pool)} free cells for {n_robots} robots")
    picks = rng.choice(len(pool), size=n_robots, replace=False)
    robots = tuple(pool[int(i)] for i in picks)
    return GridEnvironment(env.width, env.height, env.obstacles, env.regions, robots, seed=env.seed)


def scaled_side(n_robots: int, cells_per_robot: float = 8.0, min_side: int = 4) -> int:
    """Square grid side so that the area grows linearly with the team size."""
    return max(min_side, int(np.ceil(np.sqrt(cells_per_robot * n_robots))))


def to_dict(env: GridEnvironment) -> dict:
    key = env.index
    return {
        "width": env.width,
        "height": env.height,
        "obstacles": [list(c) for c in sorted(env.obstacles, key=key)],
        "regions": [
            {"symbol": r.symbol, "cells": [list(c) for c in sorted(r.cells, key=key)]}
            for r in sorted(env.regions, key=lambda r: r.symbol)
        ],
        "robots": [list(c) for c in env.robot_starts],
        "seed": env.seed,
    }


def _cell(value, where) -> Cell:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise ParseError(f"expected [x, y] integer pair, got {value!r}", where)
    return (value[0], value[1])


def from_dict(data) -> GridEnvironment:
    if not isinstance(data, dict):
        raise ParseError("top level must be an object")
    for key in ("width", "height"):
        if not isinstance(data.get(key), int):
            raise ParseError("missing or non-integer value", key)
    obstacles = [_cell(c, f"obstacles[{i}]") for i, c in enumerate(data.get("obstacles", []))]
    regions = []
    for i, reg in enumerate(data.get("regions", [])):
        where = f"regions[{i}]"
        if not isinstance(reg, dict) or not isinstance(reg.get("symbol"), int):
            raise ParseError("region needs an integer 'symbol'", where)
        cells = [_cell(c, f"{where}.cells[{j}]") for j, c in enumerate(reg.get("cells", []))]
        regions.append(Region(reg["symbol"], frozenset(cells)))
    robots = [_cell(c, f"robots[{i}]") for i, c in enumerate(data.get("robots", []))]
    obstacle_set = set(obstacles)
    for i, c in enumerate(robots):
        if c in obstacle_set:
            raise ParseError(f"robot starts on obstacle {c}", f"robots[{i}]")
    seed = data.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ParseError("seed must be an integer or null", "seed")
    try:
        return GridEnvironment(
            data["width"], data["height"], frozenset(obstacles), tuple(regions), tuple(robots), seed=seed
        )
    except ValueError as exc:
        raise ParseError(str(exc), "regions") from exc


def save(env: GridEnvironment, path) -> None:
    Path(path).write_text(json.dumps(to_dict(env), indent=1) + "\n")


def load(path) -> GridEnvironment:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}") from exc
    return from_dict(data)
