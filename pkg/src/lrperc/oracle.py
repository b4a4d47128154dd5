"""Brute-force references for the exploration and the coupling.

:func:`bfs_cluster` grows the cluster of the origin directly from a mark
field.  :func:`enumerate_exact` computes exact distributions on tiny
instances: every quantity of interest only compares marks with finitely many
thresholds, so each mark channel is replaced by the intervals those
thresholds cut out of ``(0, 1)``.  Atoms are products of intervals (their
probability is the product of interval lengths), edges whose atoms lead to
the same comparison outcomes are merged, and the functional is evaluated once
per surviving atom with a synthetic mark source that returns interval
midpoints.  Exploration-based functionals additionally enumerate all
priority orders of the edges and the per-vertex boundary indicators.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

from .errors import SizeError, ValidationError
from .exploration import Termination, run
from .lattice import (
    DifferenceSet,
    Kernel,
    Region,
    default_region,
    delta_of,
    edge_index,
    origin,
    sub,
    tail_open_probabilities,
)
from .marks import Channel

MAX_ATOMS = 10**7


@dataclass(frozen=True)
class BFSCluster:
    vertices: frozenset
    edges: tuple  # open edges leaving cluster vertices (all inside the cluster)
    reaches_T: bool

    def sorted_vertices(self) -> list:
        return sorted(self.vertices)


def bfs_cluster(J: Kernel, n: int, field, region: Region | None = None) -> BFSCluster:
    """Breadth-first cluster of the origin in ``G_J`` inside the region.

    Reads ``U`` marks of region-internal edges only; ``reaches_T`` reports
    whether some cluster vertex carries the boundary indicator.
    """
    region = region or default_region(J, n)
    idx = edge_index(J, region)
    tail_p = tail_open_probabilities(J, region)
    o = origin(J.d)
    seen = {o}
    queue = deque([o])
    open_edges = []
    while queue:
        v = queue.popleft()
        for e in idx.outgoing[v]:
            x, y = e
            w = y if x == v else x
            if field.u(e) <= J._value(sub(y, x)):
                open_edges.append(e)
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    reaches = any(tail_p[v] > 0 and field.tail(v) <= tail_p[v] for v in seen)
    return BFSCluster(frozenset(seen), tuple(sorted(set(open_edges))), reaches)


# --- synthetic marks -------------------------------------------------------------


class AtomMarks:
    """Mark source backed by explicit values; unknown queries are errors.

    Reading a channel that was not enumerated would silently make the
    enumeration wrong, so it raises instead.
    """

    def __init__(self, directed: bool, tails: dict | None = None):
        self.directed = directed
        self.values: dict = {}
        self.tails = tails or {}

    def _key(self, edge):
        x, y = edge
        if not self.directed and y < x:
            x, y = y, x
        return x, y

    def mark(self, edge, channel):
        try:
            return self.values[self._key(edge), channel]
        except KeyError:
            raise KeyError(f"channel {Channel(channel).name} of {edge} was not enumerated") from None

    def u(self, e):
        return self.mark(e, Channel.U)

    def w(self, e):
        return self.mark(e, Channel.W)

    def x(self, e):
        return self.mark(e, Channel.X)

    def priority(self, e):
        return self.mark(e, Channel.PRIORITY)

    def v(self, e, endpoint):
        x, y = self._key(e)
        if endpoint == x:
            return self.mark(e, Channel.VX)
        if endpoint == y:
            return self.mark(e, Channel.VY)
        raise ValueError(f"{endpoint} is not an endpoint of {e}")

    def tail(self, v):
        return self.tails.get(v, 0.5)


def _intervals(thresholds) -> list:
    """``[(length, midpoint)]`` of the cells cut out of (0, 1) by the thresholds."""
    cuts = sorted({t for t in thresholds if 0.0 < t < 1.0})
    pts = [0.0] + cuts + [1.0]
    return [(b - a, 0.5 * (a + b)) for a, b in zip(pts, pts[1:]) if b > a]


FUNCTIONALS = ("cluster", "cluster_p", "reach", "halo", "cluster_star", "cluster_prime",
               "cluster_h", "coupled_halo", "containment_violated")
_EXPLORATION = {"cluster_h", "coupled_halo", "containment_violated"}


@dataclass(frozen=True)
class ExactDistribution:
    functional: str
    support: tuple  # ((value, probability), ...) sorted by value
    atoms: int

    def prob(self, value) -> float:
        return dict(self.support).get(value, 0.0)

    def mean(self) -> float:
        return math.fsum(v * p for v, p in self.support)

    def total(self) -> float:
        return math.fsum(p for _, p in self.support)

    def cdf(self, k) -> float:
        return math.fsum(p for v, p in self.support if v <= k)

    def as_dict(self) -> dict:
        return {"functional": self.functional, "atoms": self.atoms,
                "support": [[v, p] for v, p in self.support]}


class _Instance:
    """Thresholds and open-edge rules of one enumeration instance."""

    def __init__(self, J, Jp, n, p, q, mode, region):
        self.J, self.Jp, self.n, self.p, self.q, self.mode = J, Jp, n, p, q, mode
        self.region = region or default_region(J, n)
        self.directed = J.directed
        self.idx = edge_index(J, self.region)
        self.edges = list(self.idx.edges)
        self.delta = delta_of(J, Jp) if Jp is not None else DifferenceSet.empty(J.directed)
        self.keep = 1.0 - q if q is not None else None
        self.tail_p = tail_open_probabilities(J, self.region)

    def j(self, e):
        x, y = e
        return self.J._value(sub(y, x))

    def jp(self, e):
        x, y = e
        return self.Jp._value(sub(y, x))

    def in_delta(self, e):
        return self.delta.has_edge(*e)

    def x_threshold(self, e):
        scaled, target = self.j(e) * self.keep ** 3, self.jp(e)
        return 1.0 if scaled <= target else target / scaled

    # open-edge predicates on a marks source
    def open_j(self, m, e):
        return m.u(e) <= self.j(e)

    def open_p(self, m, e):
        return m.u(e) <= self.p * self.j(e)

    def open_star(self, m, e):
        k = self.keep
        x, y = e
        return (m.u(e) <= self.j(e) and m.v(e, x) <= k and m.w(e) <= k and m.v(e, y) <= k)

    def open_prime(self, m, e):
        if self.mode == "exact_marginal" and not self.in_delta(e):
            return self.open_j(m, e)
        return self.open_star(m, e) and m.x(e) <= self.x_threshold(e)

    # per-edge channels and merge keys
    def channels(self, functional, e) -> dict:
        ch: dict = {}

        def add(c, *ts):
            ch.setdefault(c, set()).update(ts)

        explore = functional in _EXPLORATION
        if functional in ("cluster", "reach") or explore:
            add(Channel.U, self.j(e))
        if functional in ("cluster_p", "halo"):
            add(Channel.U, self.p * self.j(e))
        if functional == "halo":
            add(Channel.U, self.j(e))
        if explore and self.in_delta(e):
            for c in (Channel.VX, Channel.VY, Channel.W):
                add(c, self.keep)
        star = functional == "cluster_star"
        prime = functional in ("cluster_prime", "containment_violated")
        if prime and self.mode == "exact_marginal" and not self.in_delta(e):
            add(Channel.U, self.j(e))
        elif star or prime:
            add(Channel.U, self.j(e))
            for c in (Channel.VX, Channel.VY, Channel.W):
                add(c, self.keep)
            if prime:
                add(Channel.X, self.x_threshold(e))
        return ch

    def merge_key(self, functional, m, e):
        explore = functional in _EXPLORATION
        key = []
        if functional in ("cluster", "reach") or explore or functional == "halo":
            key.append(self.open_j(m, e))
        if functional in ("cluster_p", "halo"):
            key.append(self.open_p(m, e))
        if explore and self.in_delta(e):
            x, y = e
            k = self.keep
            key += [m.v(e, x) <= k, m.v(e, y) <= k, m.w(e) <= k if self.open_j(m, e) else None]
        if functional == "cluster_star":
            key.append(self.open_star(m, e))
        if functional in ("cluster_prime", "containment_violated"):
            key.append(self.open_prime(m, e))
        return tuple(key)


def _edge_atoms(inst: _Instance, functional: str, e) -> list:
    """Merged ``[(probability, {channel: value})]`` for one edge."""
    ch = inst.channels(functional, e)
    names = sorted(ch)
    cells = [_intervals(ch[c]) for c in names]
    merged: dict = {}
    probe = AtomMarks(inst.directed)
    for combo in itertools.product(*cells):
        prob = math.prod(length for length, _ in combo)
        vals = {c: mid for c, (_, mid) in zip(names, combo)}
        probe.values = {(e, c): v for c, v in vals.items()}
        key = inst.merge_key(functional, probe, e)
        if key in merged:
            merged[key][0].append(prob)
        else:
            merged[key] = ([prob], vals)
    return [(math.fsum(ps), vals) for ps, vals in merged.values()]


def _search(inst: _Instance, m, is_open) -> frozenset:
    o = origin(inst.J.d)
    seen = {o}
    stack = [o]
    while stack:
        v = stack.pop()
        for e in inst.idx.outgoing[v]:
            w = e[1] if e[0] == v else e[0]
            if w not in seen and is_open(m, e):
                seen.add(w)
                stack.append(w)
    return frozenset(seen)


def _halo(inst: _Instance, m, core) -> frozenset:
    out = set(core)
    for v in core:
        for e in inst.idx.outgoing[v]:
            if inst.open_j(m, e):
                out.update(e)
    return frozenset(out)


def _evaluate(inst: _Instance, functional: str, m) -> int:
    if functional == "cluster":
        return len(_search(inst, m, inst.open_j))
    if functional == "cluster_p":
        return len(_search(inst, m, inst.open_p))
    if functional == "reach":
        c = _search(inst, m, inst.open_j)
        return int(any(inst.tail_p[v] > 0 and m.tail(v) <= inst.tail_p[v] for v in c))
    if functional == "halo":
        return len(_halo(inst, m, _search(inst, m, inst.open_p)))
    if functional == "cluster_star":
        return len(_search(inst, m, inst.open_star))
    if functional == "cluster_prime":
        return len(_search(inst, m, inst.open_prime))
    res = run(inst.J, inst.delta, inst.q, inst.n, m, region=inst.region)
    ch = res.cluster_h()
    if functional == "cluster_h":
        return len(ch)
    halo = _halo(inst, m, ch)
    if functional == "coupled_halo":
        return len(halo)
    if res.termination is Termination.REACHED_T:
        return 0
    return int(not _search(inst, m, inst.open_prime) <= halo)


def _instance(J, Jp, n, functional, p, q, mode, region) -> _Instance:
    if functional not in FUNCTIONALS:
        raise ValidationError(f"unknown functional {functional!r}", module="oracle",
                              operation="enumerate_exact")
    if functional in ("cluster_p", "halo") and p is None:
        raise ValidationError(f"{functional} needs p", module="oracle", operation="enumerate_exact")
    if functional in _EXPLORATION or functional in ("cluster_star", "cluster_prime"):
        if Jp is None:
            raise ValidationError(f"{functional} needs J'", module="oracle",
                                  operation="enumerate_exact")
        if q is None:
            from .coupling import compute_q
            q = compute_q(J, Jp).q
    return _Instance(J, Jp, n, p, q, mode, region)


def atom_count(J: Kernel, n: int, functional: str, *, Jp: Kernel | None = None,
               p: float | None = None, q: float | None = None, mode: str = "exact_marginal",
               region: Region | None = None) -> int:
    """Number of atoms :func:`enumerate_exact` would visit."""
    inst = _instance(J, Jp, n, functional, p, q, mode, region)
    return _count(inst, functional, [_edge_atoms(inst, functional, e) for e in inst.edges])


def _tail_cells(inst: _Instance, functional: str) -> list:
    """Per-vertex ``[(probability, tail value)]`` for the boundary indicators."""
    if functional not in _EXPLORATION and functional != "reach":
        return []
    out = []
    for v in inst.region.vertices:
        t = inst.tail_p[v]
        if 0.0 < t < 1.0:
            out.append((v, [(length, mid) for length, mid in _intervals([t])]))
    return out


def _count(inst, functional, per_edge) -> int:
    total = math.prod(len(a) for a in per_edge)
    total *= 2 ** len(_tail_cells(inst, functional))
    if functional in _EXPLORATION:
        total *= math.factorial(len(inst.edges))
    return total


def enumerate_exact(J: Kernel, n: int, functional: str, *, Jp: Kernel | None = None,
                    p: float | None = None, q: float | None = None,
                    mode: str = "exact_marginal", region: Region | None = None,
                    max_atoms: int = MAX_ATOMS) -> ExactDistribution:
    """Exact distribution of an integer functional by full enumeration.

    ``p`` is needed for ``cluster_p``/``halo``; ``Jp`` and ``q`` for the
    coupled functionals (``q`` defaults to the coupling formula).
    """
    inst = _instance(J, Jp, n, functional, p, q, mode, region)
    per_edge = [_edge_atoms(inst, functional, e) for e in inst.edges]
    total = _count(inst, functional, per_edge)
    if total > max_atoms:
        raise SizeError(f"{total} atoms exceed the limit of {max_atoms}", module="oracle",
                        operation="enumerate_exact")
    tails = _tail_cells(inst, functional)
    if functional in _EXPLORATION:
        m_e = len(inst.edges)
        orders = list(itertools.permutations(range(m_e)))
        order_prob = 1.0 / len(orders)
    else:
        orders, order_prob = [None], 1.0
    sums: dict = {}
    marks = AtomMarks(inst.directed)
    for edge_combo in itertools.product(*per_edge):
        p_edges = math.prod(pr for pr, _ in edge_combo)
        if p_edges == 0.0:
            continue
        values = {}
        for e, (_, vals) in zip(inst.edges, edge_combo):
            for c, v in vals.items():
                values[e, c] = v
        for tail_combo in itertools.product(*(cells for _, cells in tails)):
            p_tail = math.prod(pr for pr, _ in tail_combo)
            marks.tails = {v: mid for (v, _), (_, mid) in zip(tails, tail_combo)}
            for order in orders:
                if order is not None:
                    for rank, i in enumerate(order):
                        values[inst.edges[i], Channel.PRIORITY] = (rank + 0.5) / len(order)
                marks.values = values
                value = _evaluate(inst, functional, marks)
                sums.setdefault(value, []).append(p_edges * p_tail * order_prob)
    support = tuple(sorted((v, math.fsum(ps)) for v, ps in sums.items()))
    return ExactDistribution(functional, support, total)


@dataclass(frozen=True)
class DominationCheck:
    dominated: bool
    crossing: int | None
    grid: tuple
    cdf_prime: tuple
    cdf_halo: tuple
    p: float
    q: float

    def as_dict(self) -> dict:
        return {"dominated": self.dominated, "crossing": self.crossing, "grid": list(self.grid),
                "cdf_prime": list(self.cdf_prime), "cdf_halo": list(self.cdf_halo),
                "p": self.p, "q": self.q}


def exact_domination_check(J: Kernel, Jp: Kernel, n: int, *, p: float | None = None,
                           region: Region | None = None, tol: float = 1e-12) -> DominationCheck:
    """Does ``|C'_o|`` lie stochastically below the halo size, exactly?

    ``C'_o`` is the cluster of the origin in ``G_{J'}``; the halo is
    ``C_o`` plus its ``G_J``-neighbours with ``C_o`` the cluster of the
    origin in an independent ``G_{pJ}`` (``p`` from the coupling unless
    overridden).  Returns the first ``k`` with
    ``P(|C'_o| <= k) < P(halo <= k)`` when domination fails.
    """
    from .coupling import compute_q

    params = compute_q(J, Jp, p=p)
    prime = enumerate_exact(J, n, "cluster_prime", Jp=Jp, q=params.q, mode="exact_marginal",
                            region=region)
    halo = enumerate_exact(J, n, "halo", p=params.p, region=region)
    top = max(max(v for v, _ in prime.support), max(v for v, _ in halo.support))
    grid = tuple(range(1, top + 1))
    fp = tuple(prime.cdf(k) for k in grid)
    fh = tuple(halo.cdf(k) for k in grid)
    crossing = next((k for k, a, b in zip(grid, fp, fh) if a < b - tol), None)
    return DominationCheck(crossing is None, crossing, grid, fp, fh, params.p, params.q)
