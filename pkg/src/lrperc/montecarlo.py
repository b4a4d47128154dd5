"""Replica estimators for boundary-reaching probability, susceptibility,
decay rates and pseudo-critical points.

Replica ``i`` uses the mark field ``MarkField(seed0 + i)``; cluster growth
runs in a compiled kernel that evaluates exactly the same Philox marks as
:class:`~lrperc.marks.MarkField`, so every replica is reproducible from its
seed and agrees with :func:`lrperc.oracle.bfs_cluster`.  Because marks are
shared across kernels, replica outcomes are pathwise monotone in the kernel
(common random numbers); bisections exploit this.
"""
from __future__ import annotations

import functools
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numba as nb
import numpy as np
from scipy import stats

from .errors import BracketingError, FitError, ValidationError
from .lattice import (
    Kernel,
    Region,
    ScaledKernel,
    default_region,
    delta_of,
    edge_index,
    origin,
    region_displacements,
    sub,
    tail_open_probabilities,
)
from .marks import (
    ENCODING_VERSION,
    GENERATOR_VERSION,
    Channel,
    _signed,
    channel_word,
    pack_vertex,
    philox_block,
)

log = logging.getLogger(__name__)

_WORKERS = 1

_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


# --- compiled cluster growth ------------------------------------------------


@nb.njit(cache=True, inline="always")
def _uniform(c0, c1, c2, k0, k1):
    w = philox_block(c0, c1, c2, ENCODING_VERSION, k0, k1)[0]
    return (float(w >> _S11) + 0.5) * _INV53


@nb.njit(cache=True, nogil=True)
def _grow(ptr, nbr, c0, c1, thr, words, tail_p, cw_u, cw_t, k0, k1, stop_at_T, seen, queue):
    """Breadth-first growth from vertex 0; returns (reached_T, size)."""
    seen[:] = False
    seen[0] = True
    queue[0] = 0
    head, tail = 0, 1
    reached = False
    while head < tail:
        v = queue[head]
        head += 1
        if not reached and tail_p[v] > 0.0:
            if _uniform(words[v], words[v], cw_t, k0, k1) <= tail_p[v]:
                reached = True
                if stop_at_T:
                    return True, tail
        for j in range(ptr[v], ptr[v + 1]):
            w = nbr[j]
            if seen[w] or thr[j] <= 0.0:
                continue
            if _uniform(c0[j], c1[j], cw_u, k0, k1) <= thr[j]:
                seen[w] = True
                queue[tail] = w
                tail += 1
    return reached, tail


@nb.njit(cache=True, nogil=True)
def _replicas(ptr, nbr, c0, c1, thr, words, tail_p, cw_u, cw_t, seeds, stream, stop_at_T):
    nv = words.shape[0]
    m = seeds.shape[0]
    reached = np.zeros(m, dtype=np.bool_)
    sizes = np.zeros(m, dtype=np.int64)
    seen = np.zeros(nv, dtype=np.bool_)
    queue = np.zeros(nv, dtype=np.int64)
    for i in range(m):
        r, s = _grow(ptr, nbr, c0, c1, thr, words, tail_p, cw_u, cw_t, seeds[i], stream,
                     stop_at_T, seen, queue)
        reached[i] = r
        sizes[i] = s
    return reached, sizes


@dataclass(frozen=True)
class Adjacency:
    """Compressed out-adjacency of a region with packed mark counters.

    The origin is vertex 0.  Entry ``j`` of vertex ``v`` stores the
    neighbour, the canonical counter words of the edge and the index of its
    displacement in ``displacements``.
    """

    vertices: tuple
    words: np.ndarray
    ptr: np.ndarray
    nbr: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    disp_index: np.ndarray
    displacements: tuple
    directed: bool
    d: int

    def thresholds(self, kernel: Kernel) -> np.ndarray:
        vals = np.array([kernel._value(z) for z in self.displacements], dtype=float)
        return vals[self.disp_index] if len(self.disp_index) else np.zeros(0)


@functools.lru_cache(maxsize=32)
def adjacency(kernel: Kernel, region: Region) -> Adjacency:
    idx = edge_index(kernel, region)
    o = origin(kernel.d)
    verts = [o] + [v for v in region.vertices if v != o]
    pos = {v: i for i, v in enumerate(verts)}
    disps: dict = {}
    ptr = [0]
    nbr, c0, c1, di = [], [], [], []
    for v in verts:
        for e in idx.outgoing[v]:
            x, y = e
            w = y if x == v else x
            nbr.append(pos[w])
            c0.append(pack_vertex(x))
            c1.append(pack_vertex(y))
            z = sub(y, x)
            di.append(disps.setdefault(z, len(disps)))
        ptr.append(len(nbr))
    return Adjacency(
        vertices=tuple(verts),
        words=np.array([pack_vertex(v) for v in verts], dtype=np.int64),
        ptr=np.array(ptr, dtype=np.int64), nbr=np.array(nbr, dtype=np.int64),
        c0=np.array(c0, dtype=np.int64), c1=np.array(c1, dtype=np.int64),
        disp_index=np.array(di, dtype=np.int64), displacements=tuple(disps),
        directed=kernel.directed, d=kernel.d,
    )


def set_workers(k: int) -> None:
    """Number of threads that split replica ranges (the compiled loop releases the GIL).

    Outcomes do not depend on ``k``: replica ``i`` always uses seed ``seeds[i]``.
    """
    global _WORKERS
    if int(k) < 1:
        raise ValidationError("workers must be >= 1", module="montecarlo", operation="set_workers")
    _WORKERS = int(k)


def simulate(J: Kernel, n: int, seeds, *, region: Region | None = None,
             stop_at_T: bool = True, structure: Kernel | None = None, stream: int = 0):
    """Per-replica ``(reached_T, cluster size)`` arrays for ``G_J``.

    ``structure`` may name a kernel whose support contains that of ``J``;
    its adjacency (cached) is reused, which is how scans over a kernel
    family avoid rebuilding the region graph.  With ``stop_at_T`` growth
    stops once a boundary vertex is found, so sizes are then truncated.
    """
    region = region or default_region(J, n)
    adj = adjacency(structure or J, region)
    thr = adj.thresholds(J)
    tail = tail_open_probabilities(J, region)
    tail_p = np.array([tail[v] for v in adj.vertices], dtype=float)
    seeds = np.asarray([_signed(int(s)) for s in seeds], dtype=np.int64)
    cw_u = channel_word(Channel.U, J.d, J.directed)
    cw_t = channel_word(Channel.TAIL, J.d, J.directed)
    args = (adj.ptr, adj.nbr, adj.c0, adj.c1, thr, adj.words, tail_p, cw_u, cw_t)
    if _WORKERS == 1 or len(seeds) < 2 * _WORKERS:
        return _replicas(*args, seeds, _signed(stream), stop_at_T)
    chunks = np.array_split(seeds, _WORKERS)
    with ThreadPoolExecutor(_WORKERS) as pool:
        parts = list(pool.map(lambda c: _replicas(*args, c, _signed(stream), stop_at_T), chunks))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# --- reports ------------------------------------------------------------------


def kernel_spec(J: Kernel) -> str:
    return repr(J)


def config_digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class EstimateReport:
    estimate: float
    stderr: float
    replicas: int
    seed0: int
    n: int
    kernel: str
    quantity: str
    generator: str = GENERATOR_VERSION

    @property
    def digest(self) -> str:
        return config_digest({"kernel": self.kernel, "n": self.n, "seed0": self.seed0,
                              "replicas": self.replicas, "quantity": self.quantity,
                              "generator": self.generator})

    def as_dict(self) -> dict:
        return {"quantity": self.quantity, "estimate": self.estimate, "stderr": self.stderr,
                "replicas": self.replicas, "seed_range": [self.seed0, self.seed0 + self.replicas],
                "n": self.n, "kernel": self.kernel, "generator": self.generator,
                "digest": self.digest}


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def _check_replicas(replicas, op):
    if int(replicas) < 1:
        raise ValidationError("replicas must be >= 1", module="montecarlo", operation=op)


def estimate_theta(J: Kernel, n: int, replicas: int, seed0: int = 0, *,
                   region: Region | None = None, structure: Kernel | None = None) -> EstimateReport:
    """Fraction of replicas whose origin cluster contains a boundary vertex."""
    _check_replicas(replicas, "estimate_theta")
    reached, _ = simulate(J, n, range(seed0, seed0 + replicas), region=region,
                          structure=structure)
    est, se = _mean_se(reached)
    return EstimateReport(est, se, replicas, seed0, n, kernel_spec(J), "theta")


def estimate_susceptibility(J: Kernel, n: int, replicas: int, seed0: int = 0, *,
                            region: Region | None = None) -> EstimateReport:
    """Mean size of the origin cluster inside the region."""
    _check_replicas(replicas, "estimate_susceptibility")
    _, sizes = simulate(J, n, range(seed0, seed0 + replicas), region=region, stop_at_T=False)
    est, se = _mean_se(sizes)
    return EstimateReport(est, se, replicas, seed0, n, kernel_spec(J), "susceptibility")


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    points: tuple  # ((n, theta, stderr), ...) used in the fit
    dropped: tuple  # n values with theta = 0

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared,
                "slope_stderr": self.slope_stderr,
                "points": [list(p) for p in self.points], "dropped": list(self.dropped)}


def estimate_decay(J: Kernel, n_list, replicas: int, seed0: int = 0) -> DecayFit:
    """Least-squares fit of ``log theta_n`` against ``n``."""
    _check_replicas(replicas, "estimate_decay")
    pts, dropped = [], []
    for n in n_list:
        r = estimate_theta(J, int(n), replicas, seed0)
        if r.estimate <= 0.0:
            log.warning("theta estimate is zero at n=%d; point dropped", n)
            dropped.append(int(n))
        else:
            pts.append((int(n), r.estimate, r.stderr))
    if len(pts) < 3:
        raise FitError(f"only {len(pts)} usable points (need 3)", module="montecarlo",
                       operation="estimate_decay")
    ns = np.array([p[0] for p in pts], dtype=float)
    ys = np.log([p[1] for p in pts])
    fit = stats.linregress(ns, ys)
    return DecayFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2),
                    float(fit.stderr), tuple(pts), tuple(dropped))


# --- bisection ------------------------------------------------------------------


@dataclass(frozen=True)
class Bisection:
    estimate: float
    bracket: tuple
    evaluations: tuple  # ((parameter, theta, stderr), ...) in evaluation order
    target: float
    replicas: int
    n: int

    @property
    def half_width(self) -> float:
        return 0.5 * (self.bracket[1] - self.bracket[0])

    def as_dict(self) -> dict:
        return {"estimate": self.estimate, "bracket": list(self.bracket),
                "evaluations": [list(e) for e in self.evaluations], "target": self.target,
                "replicas": self.replicas, "n": self.n}


def bisect_parameter(family: Callable[[float], Kernel], n: int, replicas: int, *, lo: float,
                     hi: float, target: float = 0.5, tol: float = 1e-3, seed0: int = 0,
                     structure: Kernel | None = None, region: Region | None = None,
                     operation: str = "bisect") -> Bisection:
    """Bisect ``t`` in ``[lo, hi]`` for the crossing ``theta_n(family(t)) = target``.

    All evaluations reuse replicas ``seed0 .. seed0 + replicas - 1``.
    """
    _check_replicas(replicas, operation)
    evals = []

    def theta(t):
        r = estimate_theta(family(t), n, replicas, seed0, region=region, structure=structure)
        evals.append((t, r.estimate, r.stderr))
        return r.estimate

    if hi - lo <= tol:
        return Bisection(0.5 * (lo + hi), (lo, hi), (), target, replicas, n)
    if theta(hi) < target or theta(lo) >= target:
        raise BracketingError(f"theta does not cross {target} on [{lo}, {hi}]",
                              module="montecarlo", operation=operation)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if theta(mid) >= target:
            hi = mid
        else:
            lo = mid
    return Bisection(0.5 * (lo + hi), (lo, hi), tuple(evals), target, replicas, n)


def phi_kernel(phi: Kernel | dict, beta: float, d: int | None = None):
    """``J = 1 - exp(-beta * phi)`` for a finite ``phi`` table."""
    from .lattice import TableKernel

    if isinstance(phi, dict):
        table = phi
    else:
        table = {z: phi._value(z) for z in phi.support()}
    d = d or len(next(iter(table)))
    return TableKernel.from_mapping(d, {z: -math.expm1(-beta * v) for z, v in table.items()})


def bisect_beta_c(family: Callable[[float], Kernel], n: int, replicas: int, *,
                  theta_target: float = 0.5, tol: float = 1e-3, beta_max: float = 10.0,
                  seed0: int = 0, structure: Kernel | None = None) -> Bisection:
    """Pseudo-critical ``beta`` of a kernel family ``beta -> J^{beta phi}``."""
    structure = structure or family(beta_max)
    return bisect_parameter(family, n, replicas, lo=0.0, hi=beta_max, target=theta_target,
                            tol=tol, seed0=seed0, structure=structure, operation="bisect_beta_c")


def _scale_ceiling(K: Kernel, n: int) -> float:
    """Scale at which every region edge of ``K`` is open."""
    vals = [K._value(z) for z in region_displacements(K, default_region(K, n))]
    vals = [v for v in vals if v > 0]
    if not vals:
        raise BracketingError("kernel has no edges", module="montecarlo", operation="scale")
    return 1.0 / min(vals)


@dataclass(frozen=True)
class ScaleCrossing:
    bisection: Bisection
    slope: float
    stderr: float

    def as_dict(self) -> dict:
        return {"s_hat": self.bisection.estimate, "stderr": self.stderr, "slope": self.slope,
                "bisection": self.bisection.as_dict()}


def scale_crossing(K: Kernel, n: int, replicas: int, *, target: float = 0.5, tol: float = 1e-3,
                   seed0: int = 0, slope_step: float = 0.02) -> ScaleCrossing:
    """Pseudo-critical multiplier ``s`` of ``min(1, s K)`` with its standard error.

    The error combines half the final bracket with the binomial error of
    ``theta`` converted through the local slope ``d theta / d s`` (central
    difference over ``+-slope_step * s``, same replicas).
    """
    hi = _scale_ceiling(K, n)
    b = bisect_parameter(lambda s: ScaledKernel(K, s), n, replicas, lo=0.0, hi=hi, target=target,
                         tol=tol, seed0=seed0, structure=K, operation="monotonicity_experiment")
    s = b.estimate
    h = slope_step * s
    up = estimate_theta(ScaledKernel(K, s + h), n, replicas, seed0, structure=K).estimate
    down = estimate_theta(ScaledKernel(K, max(s - h, 0.0)), n, replicas, seed0,
                          structure=K).estimate
    slope = (up - down) / (s + h - max(s - h, 0.0))
    se_theta = math.sqrt(target * (1 - target) / replicas)
    noise = se_theta / slope if slope > 0 else math.inf
    return ScaleCrossing(b, slope, math.hypot(noise, b.half_width))


@dataclass(frozen=True)
class SeparationRow:
    n: int
    s_J: ScaleCrossing
    s_Jp: ScaleCrossing

    @property
    def gap(self) -> float:
        return self.s_Jp.bisection.estimate - self.s_J.bisection.estimate

    @property
    def stderr(self) -> float:
        return math.hypot(self.s_J.stderr, self.s_Jp.stderr)

    @property
    def z(self) -> float:
        return self.gap / self.stderr if self.stderr > 0 else math.inf

    def as_dict(self) -> dict:
        return {"n": self.n, "gap": self.gap, "stderr": self.stderr, "z": self.z,
                "J": self.s_J.as_dict(), "Jp": self.s_Jp.as_dict()}


@dataclass(frozen=True)
class SeparationReport:
    rows: tuple
    replicas: int
    seed0: int

    def as_dict(self) -> dict:
        return {"replicas": self.replicas, "seed0": self.seed0,
                "rows": [r.as_dict() for r in self.rows]}


def monotonicity_experiment(J: Kernel, Jp: Kernel, n_list, replicas: int, seed0: int = 0, *,
                            target: float = 0.5, tol: float = 1e-3) -> SeparationReport:
    """Pseudo-critical multipliers of ``J`` and ``J'`` and their gap, per ``n``."""
    delta_of(J, Jp)  # validates J' < J with a finite nonempty difference
    rows = []
    for n in n_list:
        a = scale_crossing(J, int(n), replicas, target=target, tol=tol, seed0=seed0)
        b = scale_crossing(Jp, int(n), replicas, target=target, tol=tol, seed0=seed0)
        rows.append(SeparationRow(int(n), a, b))
    return SeparationReport(tuple(rows), replicas, seed0)
