"""Combinatorial skeleton of a self-similar fractal.

Builds indexed vertex sets V_m, symplex tables with addresses, neighbor
structure and symmetry generators from a family of similitudes, and checks
the simple-nested-fractal conditions at finite resolution.

Conventions used throughout the package:

* Level-m vertex ids are dense integers assigned in first-encounter order
  while images are enumerated lexicographically by address, so builds are
  reproducible bit-for-bit.
* The level-m symplex with address (i_1, ..., i_m) (1-based map indices) is
  row ``sum((i_k - 1) * M**(m-k))`` of ``cells[m]``; each row holds the ids
  of its #V_0 vertices, slot p being the image of the p-th point of V_0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._grid import MergeTable, Quantizer
from .errors import ConditionViolation, PointCapExceeded

DEFAULT_MAX_POINTS = 2_000_000

# Merge tolerance at level m is c0 / (MERGE_BAND * L**m): distinct level-m
# vertices are separated by order c0 / L**m, so a 1% band is unambiguous.
MERGE_BAND = 100.0

_ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class Similitude:
    """One contraction map psi(x) = U x / L + v with U orthogonal, L > 1."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.rotation, dtype=float)
        v = np.asarray(self.translation, dtype=float)
        if u.ndim != 2 or u.shape[0] != u.shape[1] or v.shape != (u.shape[0],):
            raise ValueError("rotation must be N x N and translation length N")
        if not self.scale > 1.0:
            raise ValueError("scaling factor must exceed 1")
        if np.abs(u.T @ u - np.eye(u.shape[0])).max() > _ORTHO_TOL:
            raise ValueError("rotation matrix is not orthogonal within 1e-12")
        object.__setattr__(self, "rotation", u)
        object.__setattr__(self, "translation", v)

    @property
    def dim(self) -> int:
        return self.rotation.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}")
        return x @ (self.rotation / self.scale).T + self.translation

    def fixed_point(self) -> np.ndarray:
        n = self.dim
        x = np.linalg.solve(np.eye(n) - self.rotation / self.scale, self.translation)
        residual = np.linalg.norm(self.apply(x) - x)
        assert residual <= 1e-10 * (1.0 + np.linalg.norm(x))
        return x


def apply_similitude(psi: Similitude, x) -> np.ndarray:
    """Evaluate psi at a single point or an array of points."""
    return psi.apply(x)


def fixed_point(psi: Similitude) -> np.ndarray:
    """The unique solution of psi(x) = x."""
    return psi.fixed_point()


def essential_fixed_points(maps: list[Similitude], tol: float | None = None) -> np.ndarray:
    """Fixed points x for which psi_i(x) = psi_j(y) for some fixed point y, i != j.

    Points are returned in first-encounter order over map index.  Raises
    ``ConditionViolation(1)`` when fewer than two points qualify.
    """
    fps = [m.fixed_point() for m in maps]
    scale = max(max(np.linalg.norm(p) for p in fps), 1.0)
    if tol is None:
        tol = 1e-9 * scale
    # Fixed points of different maps may coincide; keep unique points only.
    unique: list[np.ndarray] = []
    for p in fps:
        if not any(np.linalg.norm(p - q) <= tol for q in unique):
            unique.append(p)
    essential = []
    for x in unique:
        images = [m.apply(x) for m in maps]
        hit = False
        for i, j in itertools.permutations(range(len(maps)), 2):
            for y in unique:
                if np.linalg.norm(images[i] - maps[j].apply(y)) <= tol:
                    hit = True
                    break
            if hit:
                break
        if hit:
            essential.append(x)
    if len(essential) < 2:
        raise ConditionViolation(1, f"only {len(essential)} essential fixed points")
    return np.array(essential)


@dataclass(frozen=True)
class Reflection:
    """Reflection in the hyperplane bisecting the segment [x, y], x, y in V_0."""

    matrix: np.ndarray
    translation: np.ndarray
    pair: tuple[int, int]
    perm: np.ndarray | None  # induced permutation of V_0, None if not closed

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.matrix.T + self.translation


@dataclass
class ValidationReport:
    """Pass/fail record per simple-nested-fractal condition.

    Nesting (condition 3) is verified to finite depth only; the depth used
    is recorded because deeper overlap cannot be excluded by this check.
    """

    essential_ok: bool
    nesting_ok: bool
    nesting_depth: int
    connectivity_ok: bool
    symmetry_ok: bool
    failures: list[str] = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return self.essential_ok and self.nesting_ok and self.connectivity_ok and self.symmetry_ok

    def first_violation(self) -> int | None:
        for number, ok in ((1, self.essential_ok), (3, self.nesting_ok),
                           (4, self.connectivity_ok), (5, self.symmetry_ok)):
            if not ok:
                return number
        return None


class FractalSystem:
    """Validated similitude family with indexed vertex sets and symplex tables.

    Immutable after build; all arrays are safe for shared concurrent reads.
    """

    def __init__(self, maps, name, points, cells, promote, c0, diameter, reflections,
                 bbox, validation=None):
        self.maps: list[Similitude] = maps
        self.name = name
        self.points: list[np.ndarray] = points          # level -> (n_m, N) coords
        self.cells: list[np.ndarray] = cells            # level -> (M**m, M0) vertex ids
        self.promote: list[np.ndarray] = promote        # level m ids -> level m+1 ids
        self.c0 = c0
        self.diameter = diameter
        self.reflections: list[Reflection] = reflections
        self._bbox = bbox
        self.validation = validation
        self._locate_cache: dict[int, MergeTable] = {}
        self._neighbor_cache: dict[int, np.ndarray] = {}

    # -- basic attributes -------------------------------------------------

    @property
    def M(self) -> int:
        return len(self.maps)

    @property
    def M0(self) -> int:
        return self.points[0].shape[0]

    @property
    def dim(self) -> int:
        return self.points[0].shape[1]

    @property
    def L(self) -> float:
        return self.maps[0].scale

    @property
    def max_level(self) -> int:
        return len(self.points) - 1

    def vertex_count(self, m: int) -> int:
        return self.points[m].shape[0]

    def counting_measure_weight(self, n: int) -> float:
        """Weight 1/#V_n of each vertex under the normalized counting measure."""
        if not 0 <= n <= self.max_level:
            raise ValueError(f"level {n} not built (max level {self.max_level})")
        return 1.0 / self.vertex_count(n)

    def merge_tolerance(self, m: int) -> float:
        return self.c0 / (MERGE_BAND * self.L**m)

    def cell_address(self, m: int, index: int) -> tuple[int, ...]:
        digits = []
        for _ in range(m):
            digits.append(index % self.M + 1)
            index //= self.M
        return tuple(reversed(digits))

    def point_addresses(self, m: int, point_id: int) -> list[tuple[int, ...]]:
        """All level-m addresses of one canonical point (they are not unique)."""
        rows, slots = np.nonzero(self.cells[m] == point_id)
        return [self.cell_address(m, int(r)) + (int(s),) for r, s in zip(rows, slots)]

    # -- id plumbing -------------------------------------------------------

    def lift(self, m: int, n: int) -> np.ndarray:
        """Array mapping level-m ids to the ids of the same points at level n."""
        ids = np.arange(self.vertex_count(m))
        for k in range(m, n):
            ids = self.promote[k][ids]
        return ids

    def locate(self, pts: np.ndarray, level: int) -> np.ndarray:
        """Ids of the given coordinates in V_level (-1 where absent)."""
        table = self._locate_cache.get(level)
        if table is None:
            quant = Quantizer(self._bbox[0], self._bbox[1], self.merge_tolerance(level))
            table = MergeTable(quant)
            table.add_block(self.points[level])
            table.resolve_flagged()
            self._locate_cache[level] = table
        return table.lookup(np.asarray(pts, dtype=float))

    # -- derived structure ---------------------------------------------------

    def neighbor_graph(self, m: int) -> np.ndarray:
        """Unordered m-neighbor pairs: vertices sharing a level-m symplex."""
        cached = self._neighbor_cache.get(m)
        if cached is not None:
            return cached
        cells = self.cells[m]
        cols = list(itertools.combinations(range(self.M0), 2))
        pairs = np.concatenate([cells[:, c] for c in cols], axis=0)
        pairs = np.sort(pairs, axis=1)
        pairs = np.unique(pairs, axis=0)
        self._neighbor_cache[m] = pairs
        return pairs

    def symplex_neighborhoods(self, m: int) -> "SymplexNeighborhood":
        """For each level-m symplex S, the symplices sharing a vertex with S."""
        cells = self.cells[m]
        n_cells = cells.shape[0]
        incident: dict[int, list[int]] = {}
        for c in range(n_cells):
            for v in cells[c]:
                incident.setdefault(int(v), []).append(c)
        members = []
        for c in range(n_cells):
            near: set[int] = set()
            for v in cells[c]:
                near.update(incident[int(v)])
            members.append(np.array(sorted(near), dtype=np.int64))
        return SymplexNeighborhood(level=m, members=members)

    def points_in_symplex(self, m: int, index: int, n: int) -> np.ndarray:
        """Ids of V_n points lying in the level-m symplex with the given index."""
        if n < m:
            raise ValueError("need n >= m")
        span = self.M ** (n - m)
        rows = self.cells[n][index * span : (index + 1) * span]
        return np.unique(rows)

    # -- vertex counting beyond stored levels --------------------------------

    def count_vertices(self, up_to: int, max_points: int | None = None) -> list[int]:
        """#V_m for m = 0..up_to, continuing past built levels without storing them."""
        cap = DEFAULT_MAX_POINTS if max_points is None else max_points
        counts = [self.vertex_count(m) for m in range(min(up_to, self.max_level) + 1)]
        pts = self.points[self.max_level]
        for m in range(self.max_level + 1, up_to + 1):
            _check_cap(self.M, m, self.M0, cap)
            table, _ = _level_step(self.maps, pts, self._bbox,
                                   self.c0 / (MERGE_BAND * self.L**m))
            counts.append(table.count)
            pts = table.point_array()
        return counts


@dataclass
class SymplexNeighborhood:
    """S_* structure: for each symplex, every symplex touching it (itself included)."""

    level: int
    members: list[np.ndarray]

    def of(self, index: int) -> np.ndarray:
        return self.members[index]


def _check_cap(M: int, m: int, M0: int, cap: int) -> None:
    if M**m * M0 > cap:
        raise PointCapExceeded(
            f"level {m} needs {M**m * M0} candidate points (cap {cap}); "
            "raise the point cap to enumerate deeper"
        )


def _level_step(maps, prev_points, bbox, tau):
    """One enumeration level: images of all maps merged under tolerance tau.

    Returns (table, candidate ids) where candidate k*n_prev + p is map k
    applied to previous point p.
    """
    cand = np.concatenate([s.apply(prev_points) for s in maps], axis=0)
    table = MergeTable(Quantizer(bbox[0], bbox[1], tau))
    ids = table.add_block(cand)
    remap = table.resolve_flagged()
    if remap is not None:
        ids = remap[ids]
    return table, ids


def _invariant_bbox(maps, v0):
    """Axis box around a ball that every similitude maps into itself."""
    center = v0.mean(axis=0)
    drift = max(np.linalg.norm(s.apply(center) - center) for s in maps)
    L = maps[0].scale
    radius = drift * L / (L - 1.0) + 1e-9
    radius = max(radius, np.linalg.norm(v0 - center, axis=1).max() + 1e-9)
    return center - 1.1 * radius, center + 1.1 * radius


def _reflections_of(v0: np.ndarray, c0: float) -> list[Reflection]:
    refs = []
    dim = v0.shape[1]
    for a, b in itertools.combinations(range(len(v0)), 2):
        normal = v0[b] - v0[a]
        normal = normal / np.linalg.norm(normal)
        mid = 0.5 * (v0[a] + v0[b])
        h = np.eye(dim) - 2.0 * np.outer(normal, normal)
        t = mid - h @ mid
        image = v0 @ h.T + t
        dists = np.linalg.norm(image[:, None, :] - v0[None, :, :], axis=2)
        match = dists.argmin(axis=1)
        perm: np.ndarray | None = match
        if dists[np.arange(len(v0)), match].max() > c0 / MERGE_BAND or len(set(match)) != len(v0):
            perm = None
        refs.append(Reflection(matrix=h, translation=t, pair=(a, b), perm=perm))
    return refs


def build(maps: list[Similitude], max_level: int, *, max_points: int | None = None,
          name: str | None = None, run_validation: bool = True) -> FractalSystem:
    """Enumerate V_m and symplex tables for m <= max_level and validate.

    Validation failures raise ``ConditionViolation``; pass
    ``run_validation=False`` to inspect the report of an invalid system.
    """
    if len(maps) < 2:
        raise ValueError("need at least two similitudes")
    if max_level < 1:
        raise ValueError("max_level must be at least 1")
    dim = maps[0].dim
    L = maps[0].scale
    for s in maps[1:]:
        if s.dim != dim:
            raise ValueError("all similitudes must share the ambient dimension")
        if abs(s.scale - L) > 1e-12 * L:
            raise ValueError("all similitudes must share the scaling factor")
    for i, j in itertools.combinations(range(len(maps)), 2):
        if (np.abs(maps[i].rotation - maps[j].rotation).max() <= 1e-12
                and np.abs(maps[i].translation - maps[j].translation).max() <= 1e-12):
            raise ValueError(f"maps {i + 1} and {j + 1} are identical")
    cap = DEFAULT_MAX_POINTS if max_points is None else max_points

    v0 = essential_fixed_points(maps)
    diffs = v0[:, None, :] - v0[None, :, :]
    dists = np.linalg.norm(diffs, axis=2)
    c0 = dists[np.triu_indices(len(v0), k=1)].min()
    bbox = _invariant_bbox(maps, v0)

    points = [v0]
    cells = [np.arange(len(v0), dtype=np.int64)[None, :]]
    promote: list[np.ndarray] = []
    M, M0 = len(maps), len(v0)
    for m in range(1, max_level + 1):
        _check_cap(M, m, M0, cap)
        tau = c0 / (MERGE_BAND * L**m)
        table, ids = _level_step(maps, points[-1], bbox, tau)
        n_prev = points[-1].shape[0]
        cells_m = np.concatenate(
            [ids[k * n_prev : (k + 1) * n_prev][cells[-1]] for k in range(M)], axis=0
        )
        lifted = table.lookup(points[-1])
        if (lifted < 0).any():
            raise AssertionError("a vertex failed to persist to the next level")
        points.append(table.point_array())
        cells.append(cells_m)
        promote.append(lifted)

    top = min(3, max_level)
    p3 = points[top]
    diameter = 0.0
    for i0 in range(0, len(p3), 2048):
        block = p3[i0 : i0 + 2048]
        d = np.linalg.norm(block[:, None, :] - p3[None, :, :], axis=2)
        diameter = max(diameter, float(d.max()))

    system = FractalSystem(maps=list(maps), name=name, points=points, cells=cells,
                           promote=promote, c0=float(c0), diameter=diameter,
                           reflections=_reflections_of(v0, c0), bbox=bbox)
    if run_validation:
        report = validate(system)
        system.validation = report
        number = report.first_violation()
        if number is not None:
            raise ConditionViolation(number, "; ".join(report.failures[:3]))
    return system


def validate(system: FractalSystem, depth: int | None = None) -> ValidationReport:
    """Check conditions 1, 3, 4, 5 at finite resolution.

    Nesting is checked through the equivalent pairwise form
    psi_i(K) ∩ psi_j(K) = psi_i(V_0) ∩ psi_j(V_0), approximated by comparing
    psi_i(V_k) ∩ psi_j(V_k) against psi_i(V_0) ∩ psi_j(V_0) for k <= depth.
    """
    failures: list[str] = []
    depth = min(3, system.max_level) if depth is None else min(depth, system.max_level)
    essential_ok = system.M0 >= 2

    nesting_ok = True
    v0 = system.points[0]
    for k in range(1, depth + 1):
        tol = system.merge_tolerance(k + 1)
        vk = system.points[k]
        images = [s.apply(vk) for s in system.maps]
        images0 = [s.apply(v0) for s in system.maps]
        for i, j in itertools.combinations(range(system.M), 2):
            shared = _close_points(images[i], images[j], tol, system._bbox)
            allowed = _close_points(images0[i], images0[j], tol, system._bbox)
            if len(shared):
                stray = shared if not len(allowed) else shared[
                    np.linalg.norm(shared[:, None, :] - allowed[None, :, :], axis=2).min(axis=1)
                    > tol
                ]
                if len(stray):
                    nesting_ok = False
                    failures.append(
                        f"nesting: cells {i + 1} and {j + 1} meet off-vertex near "
                        f"{np.round(stray[0], 6).tolist()} at depth {k}"
                    )
                    break
        if not nesting_ok:
            break

    adjacency: dict[int, set[int]] = {}
    for a, b in system.neighbor_graph(1):
        adjacency.setdefault(int(a), set()).add(int(b))
        adjacency.setdefault(int(b), set()).add(int(a))
    seen = {0}
    stack = [0]
    while stack:
        for nb in adjacency.get(stack.pop(), ()):
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    connectivity_ok = len(seen) == system.vertex_count(1)
    if not connectivity_ok:
        failures.append("connectivity: the level-1 neighbor graph is disconnected")

    symmetry_ok = True
    cell_sets = {tuple(sorted(int(x) for x in row)) for row in system.cells[1]}
    for ref in system.reflections:
        if ref.perm is None:
            symmetry_ok = False
            failures.append(f"symmetry: reflection across pair {ref.pair} does not permute V_0")
            continue
        for i in range(system.M):
            image = ref.apply(system.points[1][system.cells[1][i]])
            ids = system.locate(image, 1)
            if (ids < 0).any() or tuple(sorted(int(x) for x in ids)) not in cell_sets:
                symmetry_ok = False
                failures.append(
                    f"symmetry: reflection across pair {ref.pair} does not map cell "
                    f"{i + 1} onto a cell"
                )
                break

    return ValidationReport(essential_ok=essential_ok, nesting_ok=nesting_ok,
                            nesting_depth=depth, connectivity_ok=connectivity_ok,
                            symmetry_ok=symmetry_ok, failures=failures)


def _close_points(a: np.ndarray, b: np.ndarray, tol: float, bbox) -> np.ndarray:
    """Points of `a` coinciding (within grid tolerance tol) with a point of `b`.

    Key matching on two half-cell-shifted grids: coincident copies differ by
    float noise only, so they share a key on at least one of the grids.
    """
    got = np.zeros(len(a), dtype=bool)
    for shift in (0.0, 0.5):
        q = Quantizer(bbox[0], bbox[1], tol, shift=shift)
        ka, _ = q.keys(a)
        kb, _ = q.keys(b)
        got |= np.isin(ka, kb)
    return a[got]
