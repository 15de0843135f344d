"""Discrete Lipschitz coefficients and the norm-equivalence experiment.

The coefficient at scale m integrates squared increments over pairs closer
than a cutoff c0 / base^m against the normalized counting measure of V_n,
with base L (the fractal's natural scale) for b_m and base 2 for a_m.

Pair enumeration never scans all pairs.  At cutoffs c0/L^m' with m' >= 2 it
runs per level-m' symplex S over a candidate neighborhood of symplices within
bounding-ball reach of S (a strict superset of the vertex-sharing S_*, which
by itself would drop pairs straddling non-touching symplices).  Each
unordered pair is counted exactly once, owned by the lexicographically
smallest symplex containing its smaller-id endpoint, so chunked or parallel
enumeration is deterministic and double-count free.  Coarser cutoffs (where
symplex blocks would overlap almost totally) use one spatially hashed pass
with exact distance filtering instead; both paths produce the pair set of an
all-pairs scan exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._grid import near_pairs
from .characteristics import dimensions
from .energy import FunctionSpec, VertexFunction, energy_sequence
from .errors import ResolutionTooCoarse
from .harmonic import HarmonicStructure
from .ifs import FractalSystem

STABILITY_LIMIT = 0.10
_DIRECT_BLOCK_LIMIT = 1 << 26


@dataclass(frozen=True)
class LipschitzParams:
    """Exponents and cutoff data: alpha = d_w/2, d = d_f, p = 2, q = inf."""

    alpha: float
    d: float
    c0: float
    base: float

    def __post_init__(self):
        if self.alpha <= 0 or self.base <= 1:
            raise ValueError("need alpha > 0 and base > 1")

    def cutoff(self, m: int) -> float:
        return self.c0 / self.base**m


def default_params(system: FractalSystem, hs: HarmonicStructure,
                   base: float | str = "L") -> LipschitzParams:
    dims = dimensions(system, hs)
    base_val = system.L if base == "L" else float(base)
    return LipschitzParams(alpha=dims.d_w / 2.0, d=dims.d_f, c0=system.c0, base=base_val)


# -- pair enumeration ---------------------------------------------------------


def _owners(system: FractalSystem, m: int, n: int) -> np.ndarray:
    """Lexicographically smallest level-m symplex containing each V_n point."""
    span = system.M ** (n - m)
    owner = np.full(system.vertex_count(n), np.iinfo(np.int64).max, dtype=np.int64)
    prefix = np.repeat(np.arange(system.M**m, dtype=np.int64), span * system.M0)
    np.minimum.at(owner, system.cells[n].ravel(), prefix)
    return owner


def _reach_neighborhoods(system: FractalSystem, m: int, radius: float) -> list[np.ndarray]:
    """Level-m symplices that can contain partners within ``radius`` of S.

    Every symplex lies in the convex hull of its vertices, so a bounding-ball
    test |c_S - c_T| < radius + R_S + R_T is a complete candidate filter.  It
    strictly contains the vertex-sharing neighborhood S_*: pairs slightly
    closer than c0/L^m can straddle symplices that touch nowhere (on the
    gasket this already happens at m = 2), so S_* alone would drop pairs.
    """
    verts = system.points[m][system.cells[m]]
    centers = verts.mean(axis=1)
    radii = np.linalg.norm(verts - centers[:, None, :], axis=2).max(axis=1)
    gap = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    ok = gap < radius + radii[:, None] + radii[None, :]
    return [np.flatnonzero(row) for row in ok]


def iter_radius_pairs(system: FractalSystem, n: int, radius: float, chunk: int = 1 << 22):
    """Yield (i, j, dist) chunks over unordered V_n pairs with dist < radius.

    Indices satisfy i < j; each pair appears exactly once; chunk boundaries
    and ordering are deterministic.
    """
    if radius > system.c0:
        raise ValueError("cutoff radius above c0 is not supported")
    pts = system.points[n]
    m_enum = int(math.floor(math.log(system.c0 / radius) / math.log(system.L) + 1e-9))
    m_enum = min(m_enum, n - 1)
    if m_enum < 2:
        # At level 1 and below the symplex blocks overlap almost totally, so
        # one spatially hashed pass beats per-symplex enumeration; the pair
        # set is identical either way.
        yield from near_pairs(pts, radius, max_chunk=chunk)
        return

    owner = _owners(system, m_enum, n)
    hood = _reach_neighborhoods(system, m_enum, radius)
    span = system.M ** (n - m_enum)
    cells_n = system.cells[n]
    descendants = [
        np.unique(cells_n[c * span : (c + 1) * span])
        for c in range(system.M**m_enum)
    ]
    r2 = radius * radius
    for s in range(system.M**m_enum):
        block = np.unique(np.concatenate([descendants[t] for t in hood[s]]))
        owned = owner[block] == s
        n_owned = int(owned.sum())
        if n_owned == 0:
            continue
        if n_owned * len(block) <= _DIRECT_BLOCK_LIMIT:
            x_ids = block[owned]
            px, py = pts[x_ids], pts[block]
            step = max(1, chunk // max(len(block), 1))
            for a0 in range(0, len(x_ids), step):
                d2 = (px[a0 : a0 + step, None, 0] - py[None, :, 0]) ** 2
                for axis in range(1, pts.shape[1]):
                    d2 += (px[a0 : a0 + step, None, axis] - py[None, :, axis]) ** 2
                ii, jj = np.nonzero(d2 < r2)
                gi, gj = x_ids[a0 + ii], block[jj]
                keep = gi < gj
                if keep.any():
                    yield gi[keep], gj[keep], np.sqrt(d2[ii[keep], jj[keep]])
        else:
            # Large coarse-scale block: grid-prune inside, keep pairs whose
            # smaller endpoint is owned by this symplex.
            for li, lj, dist in near_pairs(pts[block], radius, max_chunk=chunk):
                gi, gj = block[li], block[lj]
                lo = np.minimum(gi, gj)
                hi = np.maximum(gi, gj)
                keep = owner[lo] == s
                if keep.any():
                    yield lo[keep], hi[keep], dist[keep]


def pair_power_sums(system: FractalSystem, n: int, radii: np.ndarray,
                    values: np.ndarray) -> np.ndarray:
    """For each radius r: sum of (f(x)-f(y))^2 over unordered pairs with dist < r.

    ``values`` is (#V_n,) or (#V_n, F); the result is (len(radii), F).
    Radii must be ascending; one enumeration pass at the largest radius feeds
    every cutoff.
    """
    radii = np.asarray(radii, dtype=float)
    single = values.ndim == 1
    vals = values[:, None] if single else values
    partials: list[list[np.ndarray]] = [[] for _ in radii]
    for i, j, dist in iter_radius_pairs(system, n, float(radii[-1])):
        bins = np.searchsorted(radii, dist, side="right")
        diff2 = (vals[i] - vals[j]) ** 2
        for b in np.unique(bins):
            if b < len(radii):
                partials[b].append(diff2[bins == b].sum(axis=0))
    out = np.zeros((len(radii), vals.shape[1]))
    acc = [
        [math.fsum(float(p[f]) for p in partials[b]) for f in range(vals.shape[1])]
        for b in range(len(radii))
    ]
    running = np.zeros(vals.shape[1])
    for b in range(len(radii)):
        running = running + np.array(acc[b])
        out[b] = running
    return out


def _coefficient_from_sum(params: LipschitzParams, m: int, n_points: int,
                          pair_sum: np.ndarray) -> np.ndarray:
    integral = params.base ** (m * params.d) * (2.0 * pair_sum) / float(n_points) ** 2
    return params.base ** (m * params.alpha) * np.sqrt(integral)


def coefficient_table(system: FractalSystem, values: np.ndarray, n: int,
                      ms: list[int], params: LipschitzParams) -> np.ndarray:
    """Coefficients for several scales m at once; values as in pair_power_sums."""
    if any(m >= n for m in ms) or any(m < 0 for m in ms):
        raise ResolutionTooCoarse(f"need n > m for every m in {ms} (n = {n})")
    order = np.argsort([-m for m in ms], kind="stable")
    radii = np.array([params.cutoff(ms[k]) for k in order])
    sums = pair_power_sums(system, n, radii, values)
    width = 1 if values.ndim == 1 else values.shape[1]
    table = np.empty((len(ms), width))
    for row, k in enumerate(order):
        table[k] = _coefficient_from_sum(params, ms[k], system.vertex_count(n), sums[row])
    return table[:, 0] if values.ndim == 1 else table


def b_coefficient(system: FractalSystem, f: VertexFunction, m: int,
                  params: LipschitzParams) -> float:
    """Base-``params.base`` Lipschitz coefficient of f at scale m against mu_n."""
    if m >= f.level:
        raise ResolutionTooCoarse(f"coefficient at m = {m} needs data at level > m")
    return float(coefficient_table(system, f.values, f.level, [m], params)[0])


def a_coefficient(system: FractalSystem, f: VertexFunction, m: int,
                  params: LipschitzParams) -> float:
    """Dyadic (base-2) Lipschitz coefficient of f at scale m against mu_n."""
    dyadic = LipschitzParams(alpha=params.alpha, d=params.d, c0=params.c0, base=2.0)
    return b_coefficient(system, f, m, dyadic)


# -- norm reports -------------------------------------------------------------


@dataclass
class NormReport:
    """Both norms of one function with the coefficient and energy sequences."""

    tag: str
    level: int
    b_values: list[tuple[int, float]]
    a_values: list[tuple[int, float]]
    sup_b: float
    sup_a: float
    l2_norm: float
    lip_norm: float
    energy_entries: list[tuple[int, float]]
    dirichlet_energy: float
    dirichlet_norm: float
    ratio: float | None
    monotone_ok: bool


def norm_report(system: FractalSystem, hs: HarmonicStructure, spec: FunctionSpec,
                m_max: int, n: int, params: LipschitzParams | None = None) -> NormReport:
    """Assemble the Lipschitz and Dirichlet norms of one function at level n."""
    return batch_norm_reports(system, hs, [spec], m_max, n, params)[0]


def _check_report_levels(system: FractalSystem, m_max: int, n: int) -> None:
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    if n <= m_max:
        raise ResolutionTooCoarse(
            f"norm report needs n > m_max (got m_max = {m_max}, n = {n})"
        )
    if n > system.max_level:
        raise ValueError(f"level {n} not built")


def batch_norm_reports(system: FractalSystem, hs: HarmonicStructure,
                       specs: list[FunctionSpec], m_max: int, n: int,
                       params: LipschitzParams | None = None) -> list[NormReport]:
    """Norm reports for a whole corpus with one pair-enumeration pass.

    The coefficient integrals share the pair stream across functions, so the
    per-function results are identical to separate norm_report calls.
    """
    _check_report_levels(system, m_max, n)
    params = params or default_params(system, hs, base="L")
    values = np.column_stack([s.sample(system, hs, n).values for s in specs])
    ms = list(range(1, m_max + 1))
    b_table = coefficient_table(system, values, n, ms, params)
    dyadic = LipschitzParams(alpha=params.alpha, d=params.d, c0=params.c0, base=2.0)
    if abs(params.base - 2.0) < 1e-12:
        a_table = b_table
    else:
        a_table = coefficient_table(system, values, n, ms, dyadic)
    weight = 1.0 / system.vertex_count(n)
    reports = []
    for col, spec in enumerate(specs):
        f_vals = values[:, col]
        l2 = math.sqrt(math.fsum((f_vals * f_vals * weight).tolist()))
        seq = energy_sequence(system, hs, VertexFunction(n, f_vals), m0=0, tag=spec.tag)
        energy = seq.entries[m_max][1]
        b_col, a_col = b_table[:, col], a_table[:, col]
        sup_b, sup_a = float(np.max(b_col)), float(np.max(a_col))
        lip = l2 + sup_b
        dirichlet = math.sqrt(max(energy, 0.0) + l2 * l2)
        ratio = lip / dirichlet if dirichlet > 0 else None
        reports.append(NormReport(
            tag=spec.tag, level=n,
            b_values=[(m, float(v)) for m, v in zip(ms, b_col)],
            a_values=[(m, float(v)) for m, v in zip(ms, a_col)],
            sup_b=sup_b, sup_a=sup_a, l2_norm=l2, lip_norm=lip,
            energy_entries=seq.entries[: m_max + 1],
            dirichlet_energy=energy, dirichlet_norm=dirichlet,
            ratio=ratio, monotone_ok=seq.monotone_ok,
        ))
    return reports


@dataclass
class ExperimentSummary:
    """Norm-ratio statistics of a corpus plus per-function refinement stability."""

    reports: list[NormReport]
    coarse_reports: list[NormReport]
    min_ratio: float
    max_ratio: float
    c_empirical: float
    stability: list[tuple[str, float, bool]]  # tag, relative change, within limit
    excluded: list[str]


def equivalence_experiment(system: FractalSystem, hs: HarmonicStructure,
                           specs: list[FunctionSpec], m_max: int, n: int,
                           params: LipschitzParams | None = None) -> ExperimentSummary:
    """Norm reports for a corpus at levels n and n-1 with ratio statistics.

    Functions with undefined ratio (zero Dirichlet norm) are excluded from
    the statistics and listed.  The empirical equivalence constant is
    measured, never asserted: the underlying theorem is qualitative.
    """
    if not specs:
        raise ValueError("corpus is empty")
    reports = batch_norm_reports(system, hs, specs, m_max, n, params)
    coarse = batch_norm_reports(system, hs, specs, m_max, n - 1, params)
    ratios = [r.ratio for r in reports if r.ratio is not None]
    excluded = [r.tag for r in reports if r.ratio is None]
    if not ratios:
        return ExperimentSummary(reports, coarse, math.nan, math.nan, math.nan, [], excluded)
    min_ratio, max_ratio = min(ratios), max(ratios)
    stability = []
    for fine, rough in zip(reports, coarse):
        if fine.ratio is None or rough.ratio is None:
            continue
        change = abs(fine.ratio - rough.ratio) / abs(fine.ratio)
        stability.append((fine.tag, change, change < STABILITY_LIMIT))
    return ExperimentSummary(
        reports=reports, coarse_reports=coarse,
        min_ratio=min_ratio, max_ratio=max_ratio,
        c_empirical=max(max_ratio, 1.0 / min_ratio),
        stability=stability, excluded=excluded,
    )


def hoelder_estimate(system: FractalSystem, f: VertexFunction, gamma: float) -> float:
    """Empirical Hoelder constant max |f(x)-f(y)| / |x-y|^gamma over near pairs.

    Pairs are subsampled per symplex: all same-cell vertex pairs at every
    level up to f's, which spans separations from diam/L down to the finest
    resolved scale.  A stability diagnostic, not a certified norm.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    best = 0.0
    for m in range(1, f.level + 1):
        pairs = system.neighbor_graph(m)
        lift = system.lift(m, f.level)
        pts = system.points[m]
        dist = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
        diff = np.abs(f.values[lift[pairs[:, 0]]] - f.values[lift[pairs[:, 1]]])
        good = dist > 0
        if good.any():
            best = max(best, float((diff[good] / dist[good] ** gamma).max()))
    return best
