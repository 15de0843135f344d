"""Level-m Dirichlet energies, harmonic extension, and samplable functions.

The level-m energy of f is rho^m times the sum over m-symplices of the base
form evaluated on the pulled-back vertex values.  Harmonic extension fills in
finer-level vertices cell by cell with the minimizing interior values, which
leaves the energy sequence constant; arbitrary functions give a nondecreasing
sequence.

Functions are specified in a small mini-language shared with the CLI:

* ``coord:k``            -- the k-th Euclidean coordinate (0-based),
* ``harmonic:v1,v2,...`` -- harmonic extension of the given vertex data
                            (#V_0 values for level-0 data, #V_1 for level-1),
* ``perturb:<spec>:<vertex-index>:<delta>`` -- a base spec with one vertex of
  the sampling level shifted by delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .harmonic import HarmonicStructure
from .ifs import FractalSystem

MONOTONE_SLACK = 1e-9
SHARED_VERTEX_TOL = 1e-10


@dataclass(frozen=True)
class VertexFunction:
    """Real values indexed by the vertex ids of some V_m."""

    level: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


def _check_level(system: FractalSystem, f: VertexFunction) -> None:
    if not 0 <= f.level <= system.max_level:
        raise ValueError(f"level {f.level} not built")
    if f.values.shape != (system.vertex_count(f.level),):
        raise ValueError(
            f"function has {f.values.shape[0]} values but V_{f.level} has "
            f"{system.vertex_count(f.level)} vertices"
        )


def energy_m(system: FractalSystem, hs: HarmonicStructure, f: VertexFunction) -> float:
    """E^(m)(f,f) = rho^m * sum over m-symplices of the pulled-back base form.

    Per-cell energies are combined with exact (fsum) accumulation so chunked
    or parallel evaluation cannot change the result.
    """
    _check_level(system, f)
    cells = system.cells[f.level]
    vals = f.values[cells]
    cell_energy = -np.einsum("cp,pq,cq->c", vals, hs.matrix.entries, vals)
    return float(hs.rho**f.level * math.fsum(cell_energy.tolist()))


def harmonic_extension(system: FractalSystem, hs: HarmonicStructure,
                       f: VertexFunction, n: int) -> VertexFunction:
    """Extend f from its level to level n with minimal-energy interior values.

    Values at shared vertices are written independently by each parent cell
    and asserted consistent (not averaged), so a non-invariant extension
    matrix surfaces as an error instead of a silent smoothing.
    """
    _check_level(system, f)
    if not f.level <= n <= system.max_level:
        raise ValueError(f"target level {n} out of range [{f.level}, {system.max_level}]")
    values = f.values
    for k in range(f.level, n):
        values = _extend_one(system, hs, values, k)
    return VertexFunction(level=n, values=values)


def _extend_one(system: FractalSystem, hs: HarmonicStructure,
                values: np.ndarray, k: int) -> np.ndarray:
    m_count = len(system.maps)
    m0 = system.M0
    n_next = system.vertex_count(k + 1)
    n_cells = system.cells[k].shape[0]
    children = system.cells[k + 1].reshape(n_cells, m_count, m0)
    # Global ids of each abstract V_1 point inside every parent cell.
    local_to_global = np.empty((n_cells, system.vertex_count(1)), dtype=np.int64)
    local_to_global[:, system.cells[1].ravel()] = children.reshape(n_cells, m_count * m0)
    interior = hs.interior_ids
    interior_vals = values[system.cells[k]] @ hs.extension_matrix.T

    targets = np.concatenate([local_to_global[:, interior].ravel(), system.promote[k]])
    writes = np.concatenate([interior_vals.ravel(), values])
    order = np.argsort(targets, kind="stable")
    t_sorted, w_sorted = targets[order], writes[order]
    starts = np.flatnonzero(np.r_[True, t_sorted[1:] != t_sorted[:-1]])
    spread = (np.maximum.reduceat(w_sorted, starts)
              - np.minimum.reduceat(w_sorted, starts))
    tol = SHARED_VERTEX_TOL * max(1.0, float(np.abs(values).max(initial=0.0)))
    if spread.max(initial=0.0) > tol:
        raise AssertionError(
            "conflicting values at a shared vertex during extension "
            f"(spread {spread.max():g}); extension matrix is not symmetry-invariant"
        )
    if len(starts) != n_next:
        raise AssertionError("extension did not cover every vertex of the next level")
    out = np.empty(n_next)
    out[t_sorted[starts]] = w_sorted[starts]
    return out


@dataclass
class EnergySequence:
    """The nondecreasing sequence m -> E^(m)(f,f) with its finite-level limit."""

    tag: str
    entries: list[tuple[int, float]]
    limit_estimate: float
    monotone_ok: bool


def energy_sequence(system: FractalSystem, hs: HarmonicStructure, f: VertexFunction,
                    m0: int = 0, tag: str = "") -> EnergySequence:
    """Evaluate E^(m) for m0 <= m <= f.level on the restrictions of f.

    The function is materialized at its top level; lower levels use the
    restriction through the vertex inclusion V_m in V_{m+1}.
    """
    _check_level(system, f)
    entries = []
    for m in range(m0, f.level + 1):
        fm = VertexFunction(m, f.values[system.lift(m, f.level)])
        entries.append((m, energy_m(system, hs, fm)))
    monotone_ok = all(
        e2 >= e1 - MONOTONE_SLACK * max(1.0, abs(e1))
        for (_, e1), (_, e2) in zip(entries, entries[1:])
    )
    return EnergySequence(tag=tag, entries=entries,
                          limit_estimate=entries[-1][1] if entries else 0.0,
                          monotone_ok=monotone_ok)


# -- samplable functions ----------------------------------------------------


@dataclass(frozen=True)
class FunctionSpec:
    """A function samplable on any V_n, parsed from the mini-language."""

    tag: str
    kind: str
    coord: int = 0
    data: np.ndarray | None = None
    base: "FunctionSpec | None" = None
    vertex_index: int = 0
    delta: float = 0.0

    def sample(self, system: FractalSystem, hs: HarmonicStructure | None,
               level: int) -> VertexFunction:
        if self.kind == "coord":
            if not 0 <= self.coord < system.dim:
                raise ValueError(f"coordinate {self.coord} out of range")
            return VertexFunction(level, system.points[level][:, self.coord].copy())
        if self.kind == "harmonic":
            if hs is None:
                raise ValueError("harmonic sampling requires a solved harmonic structure")
            data_level = 0 if len(self.data) == system.M0 else 1
            if data_level == 1 and len(self.data) != system.vertex_count(1):
                raise ValueError(
                    f"harmonic data must have {system.M0} (V_0) or "
                    f"{system.vertex_count(1)} (V_1) values"
                )
            if level < data_level:
                raise ValueError("sampling level below the data level")
            return harmonic_extension(system, hs, VertexFunction(data_level, self.data), level)
        if self.kind == "perturb":
            out = self.base.sample(system, hs, level).values.copy()
            if not 0 <= self.vertex_index < len(out):
                raise ValueError(f"vertex index {self.vertex_index} out of range at level {level}")
            out[self.vertex_index] += self.delta
            return VertexFunction(level, out)
        raise ValueError(f"unknown function kind {self.kind}")


def parse_function_spec(text: str) -> FunctionSpec:
    text = text.strip()
    head, _, rest = text.partition(":")
    if head == "coord":
        return FunctionSpec(tag=text, kind="coord", coord=int(rest))
    if head == "harmonic":
        data = np.array([float(v) for v in rest.split(",")])
        if len(data) < 2:
            raise ValueError("harmonic spec needs at least #V_0 values")
        return FunctionSpec(tag=text, kind="harmonic", data=data)
    if head == "perturb":
        base_text, idx, delta = rest.rsplit(":", 2)
        return FunctionSpec(tag=text, kind="perturb", base=parse_function_spec(base_text),
                            vertex_index=int(idx), delta=float(delta))
    raise ValueError(f"unknown function spec {text!r}")


def random_corpus(system: FractalSystem, count: int, seed: int,
                  include_coords: bool = True) -> list[FunctionSpec]:
    """Seeded corpus: harmonic extensions of uniform data on V_0 and V_1,
    plus the coordinate functions."""
    rng = np.random.default_rng(seed)
    specs: list[FunctionSpec] = []
    if include_coords:
        specs.extend(parse_function_spec(f"coord:{k}") for k in range(system.dim))
    n1 = system.vertex_count(1)
    for k in range(count):
        size = system.M0 if k % 2 == 0 else n1
        data = rng.uniform(-1.0, 1.0, size=size)
        specs.append(parse_function_spec("harmonic:" + ",".join(f"{v:.17g}" for v in data)))
    return specs
