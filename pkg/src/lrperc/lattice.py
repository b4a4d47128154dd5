"""Z^d geometry and translation-invariant connectivity kernels.

Vertices are plain integer tuples, the origin being the all-zeros tuple.
Undirected edges are canonicalised as ``(min(x, y), max(x, y))`` in
lexicographic order; directed edges keep ``(tail, head)``.

Three kernel families are provided (:class:`TableKernel`,
:class:`PolynomialPhiKernel`, :class:`ScaledKernel`) together with
:class:`OverrideKernel`, which replaces kernel values on a finite set of
displacements and is the usual way to build a perturbed kernel ``J'``.

Sums over infinitely many displacements are evaluated over an explicit
window ``{z : |z|_inf <= R}`` plus a rigorous one-sided tail correction
obtained from :meth:`Kernel.tail_sum_bound`, which bounds
``sum_{|z|_inf > R} J(z)``.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyDeltaError,
    InfiniteDifferenceError,
    KernelError,
    OrderViolationError,
    ZeroProductError,
)

Vertex = tuple  # tuple[int, ...]
Edge = tuple  # tuple[Vertex, Vertex]

# Window sizes beyond this many lattice points are not enumerated; the tail
# correction then absorbs the remainder (still a rigorous bound, just looser).
MAX_WINDOW_POINTS = 4_000_000


def origin(d: int) -> Vertex:
    return (0,) * d


def add(x: Vertex, z: Sequence[int]) -> Vertex:
    return tuple(a + b for a, b in zip(x, z))


def sub(y: Vertex, x: Vertex) -> Vertex:
    return tuple(a - b for a, b in zip(y, x))


def neg(z: Sequence[int]) -> Vertex:
    return tuple(-a for a in z)


def l1(z: Sequence[int]) -> int:
    return sum(abs(a) for a in z)


def linf(z: Sequence[int]) -> int:
    return max((abs(a) for a in z), default=0)


def is_positive(z: Sequence[int]) -> bool:
    """Lexicographic sign: True if the first nonzero coordinate is positive."""
    for a in z:
        if a:
            return a > 0
    return False


def edge_key(x: Vertex, y: Vertex, directed: bool = False) -> Edge:
    """Canonical key of the potential edge between ``x`` and ``y``."""
    if x == y:
        raise ValueError("an edge needs two distinct endpoints")
    if directed or x < y:
        return (x, y)
    return (y, x)


def unit_vectors(d: int) -> list[Vertex]:
    return [tuple(1 if i == j else 0 for j in range(d)) for i in range(d)]


# ---------------------------------------------------------------------------
# regions


class Region:
    """A finite vertex set playing the role of the ball ``B(o, n)``."""

    d: int
    n: int

    @property
    def vertices(self) -> tuple[Vertex, ...]:
        return _region_vertices(self)

    @property
    def members(self) -> frozenset:
        return _region_members(self)

    @property
    def index(self) -> dict[Vertex, int]:
        return _region_index(self)

    def __contains__(self, v) -> bool:
        return tuple(v) in _region_members(self)

    def __len__(self) -> int:
        return len(self.vertices)

    def contains(self, v: Vertex) -> bool:
        raise NotImplementedError

    def _generate(self) -> Iterator[Vertex]:
        raise NotImplementedError

    @property
    def diameter(self) -> int:
        """Upper bound on ``|x - y|_inf`` for ``x, y`` in the region."""
        raise NotImplementedError


# Regions are immutable values, so their vertex lists are shared across
# instances that compare equal (a fresh Ball per run costs nothing).
@functools.lru_cache(maxsize=128)
def _region_vertices(region) -> tuple:
    return tuple(sorted(region._generate()))


@functools.lru_cache(maxsize=128)
def _region_members(region) -> frozenset:
    return frozenset(_region_vertices(region))


@functools.lru_cache(maxsize=128)
def _region_index(region) -> dict:
    return {v: i for i, v in enumerate(_region_vertices(region))}


@dataclass(frozen=True, eq=True)
class Ball(Region):
    """The l1 ball ``{x in Z^d : |x|_1 <= n}`` (nearest-neighbour metric)."""

    d: int
    n: int

    def __post_init__(self):
        if self.d < 1 or self.n < 0:
            raise ValueError(f"invalid ball d={self.d}, n={self.n}")

    def contains(self, v):
        return l1(v) <= self.n

    def _generate(self):
        n = self.n
        for v in itertools.product(range(-n, n + 1), repeat=self.d):
            if l1(v) <= n:
                yield v

    @property
    def diameter(self):
        return 2 * self.n


@dataclass(frozen=True, eq=True)
class SpaceTimeBox(Region):
    """``{(x, t) : |x|_1 <= n, 0 <= t <= n}`` in ``Z^space_d x Z``.

    Used as the finite volume for oriented (space-time) kernels.
    """

    space_d: int
    n: int

    def __post_init__(self):
        if self.space_d < 1 or self.n < 0:
            raise ValueError(f"invalid box space_d={self.space_d}, n={self.n}")

    @property
    def d(self):
        return self.space_d + 1

    def contains(self, v):
        return 0 <= v[-1] <= self.n and l1(v[:-1]) <= self.n

    def _generate(self):
        n = self.n
        for x in itertools.product(range(-n, n + 1), repeat=self.space_d):
            if l1(x) <= n:
                for t in range(n + 1):
                    yield x + (t,)

    @property
    def diameter(self):
        return 2 * self.n


def ball(d: int, n: int) -> tuple[Vertex, ...]:
    """Vertices at l1 distance at most ``n`` from the origin, sorted."""
    return Ball(d, n).vertices


def default_region(kernel, n: int) -> Region:
    """Space-time box for oriented kernels, the l1 ball otherwise."""
    if kernel.is_oriented():
        return SpaceTimeBox(kernel.d - 1, n)
    return Ball(kernel.d, n)


# ---------------------------------------------------------------------------
# kernels


class Kernel:
    """Translation-invariant connectivity function ``z -> J(o, o + z)``."""

    d: int
    directed: bool

    def value(self, z: Sequence[int]) -> float:
        z = tuple(z)
        if len(z) != self.d:
            raise KernelError(f"displacement {z} is not in Z^{self.d}",
                              module="lattice", operation="kernel_value")
        if not any(z):
            raise KernelError("J(0) is undefined (no self-loops)",
                              module="lattice", operation="kernel_value")
        return self._value(z)

    def _value(self, z: Vertex) -> float:
        raise NotImplementedError

    def values(self, zs: np.ndarray) -> np.ndarray:
        """Vectorised evaluation on an ``(m, d)`` array of nonzero displacements."""
        return np.array([self._value(tuple(int(a) for a in z)) for z in zs], dtype=float)

    def support(self) -> tuple[Vertex, ...] | None:
        """Displacements with positive value, or ``None`` if infinitely many."""
        raise NotImplementedError

    def tail_sum_bound(self, R: float) -> float:
        """Upper bound on ``sum_{|z|_inf > R} J(z)``."""
        raise NotImplementedError

    @property
    def is_finite(self) -> bool:
        return self.support() is not None

    @property
    def support_radius(self) -> int | None:
        s = self.support()
        if s is None:
            return None
        return max((linf(z) for z in s), default=0)

    def sup(self) -> float:
        s = self.support()
        if s is not None:
            return max((self._value(z) for z in s), default=0.0)
        return _window_max(self)

    def in_class_lt1(self) -> bool:
        """Membership in the class of kernels that never take the value 1."""
        return self.sup() < 1.0

    def is_oriented(self) -> bool:
        s = self.support()
        return self.directed and s is not None and len(s) > 0 and all(z[-1] == 1 for z in s)

    def check_symmetry(self, radius: int = 3) -> bool:
        """Negation symmetry on the window ``|z|_inf <= radius``."""
        for z in _window_points(self.d, radius):
            if self._value(z) != self._value(neg(z)):
                return False
        return True


def _canonical_table(d: int, mapping: Mapping | Iterable, directed: bool) -> tuple:
    items = mapping.items() if isinstance(mapping, Mapping) else mapping
    table: dict[Vertex, float] = {}
    for z, p in items:
        z = tuple(int(a) for a in z)
        p = float(p)
        if len(z) != d:
            raise KernelError(f"displacement {z} is not in Z^{d}", module="lattice")
        if not any(z):
            raise KernelError("J(0) is undefined (no self-loops)", module="lattice")
        if not 0.0 <= p <= 1.0:
            raise KernelError(f"J{z} = {p} is not a probability", module="lattice")
        for w in ((z,) if directed else (z, neg(z))):
            if w in table and table[w] != p:
                raise KernelError(f"conflicting values for displacement {w}"
                                  + ("" if directed else " (undirected kernels are symmetric)"),
                                  module="lattice")
            table[w] = p
    return tuple(sorted(table.items()))


@dataclass(frozen=True)
class TableKernel(Kernel):
    """Finitely supported kernel given by an explicit displacement table.

    For undirected kernels the table is closed under negation on
    construction; giving ``z`` and ``-z`` different values is an error.
    """

    d: int
    entries: tuple
    directed: bool = False
    _lookup: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        entries = _canonical_table(self.d, self.entries, self.directed)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_lookup", dict(entries))

    @classmethod
    def from_mapping(cls, d, mapping, directed=False):
        return cls(d, tuple(dict(mapping).items()), directed)

    def _value(self, z):
        return self._lookup.get(z, 0.0)

    def support(self):
        return tuple(z for z, p in self.entries if p > 0)

    def tail_sum_bound(self, R):
        return math.fsum(p for z, p in self.entries if linf(z) > R)


def nearest_neighbour(d: int, p: float, directed: bool = False) -> TableKernel:
    """``J = p`` on the ``2d`` nearest-neighbour displacements, 0 elsewhere."""
    entries = []
    for e in unit_vectors(d):
        entries += [(e, p), (neg(e), p)]
    return TableKernel(d, tuple(entries), directed)


@dataclass(frozen=True)
class PolynomialPhiKernel(Kernel):
    """``J(z) = 1 - exp(-beta * |z|_2 ** -alpha)`` with ``alpha > d``."""

    d: int
    beta: float
    alpha: float
    directed: bool = False

    def __post_init__(self):
        if self.beta < 0:
            raise KernelError("beta must be nonnegative", module="lattice")
        if not self.alpha > self.d:
            raise KernelError(f"alpha={self.alpha} must exceed d={self.d} for summability",
                              module="lattice")

    def _value(self, z):
        if self.beta == 0:
            return 0.0
        r2 = sum(a * a for a in z)
        return -math.expm1(-self.beta * r2 ** (-self.alpha / 2))

    def values(self, zs):
        zs = np.asarray(zs, dtype=float)
        if self.beta == 0:
            return np.zeros(len(zs))
        r2 = np.einsum("ij,ij->i", zs, zs)
        return -np.expm1(-self.beta * r2 ** (-self.alpha / 2))

    def support(self):
        return () if self.beta == 0 else None

    def tail_sum_bound(self, R):
        # J <= beta |z|_2^-alpha <= beta k^-alpha on the shell |z|_inf = k, whose
        # size is at most 2d (2k+1)^(d-1) <= 2d 3^(d-1) k^(d-1).
        if self.beta == 0:
            return 0.0
        d, a = self.d, self.alpha
        c = self.beta * 2 * d * 3 ** (d - 1)
        k0 = math.floor(R)
        if k0 < 1:
            return c * (1.0 + 1.0 / (a - d))
        return c * k0 ** (d - a) / (a - d)


@dataclass(frozen=True)
class ScaledKernel(Kernel):
    """``min(1, factor * inner)``; for ``factor <= 1`` this is the usual ``pJ``."""

    inner: Kernel
    factor: float

    def __post_init__(self):
        if self.factor < 0:
            raise KernelError("scale factor must be nonnegative", module="lattice")

    @property
    def d(self):
        return self.inner.d

    @property
    def directed(self):
        return self.inner.directed

    def _value(self, z):
        return min(1.0, self.factor * self.inner._value(z))

    def values(self, zs):
        return np.minimum(1.0, self.factor * self.inner.values(zs))

    def support(self):
        if self.factor == 0:
            return ()
        return self.inner.support()

    def tail_sum_bound(self, R):
        return self.factor * self.inner.tail_sum_bound(R)


@dataclass(frozen=True)
class OverrideKernel(Kernel):
    """``inner`` with its values replaced on a finite set of displacements."""

    inner: Kernel
    overrides: tuple
    _lookup: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        ov = _canonical_table(self.inner.d, self.overrides, self.inner.directed)
        object.__setattr__(self, "overrides", ov)
        object.__setattr__(self, "_lookup", dict(ov))

    @property
    def d(self):
        return self.inner.d

    @property
    def directed(self):
        return self.inner.directed

    def _value(self, z):
        p = self._lookup.get(z)
        return self.inner._value(z) if p is None else p

    def values(self, zs):
        out = np.asarray(self.inner.values(zs), dtype=float).copy()
        if self._lookup:
            for i, z in enumerate(zs):
                p = self._lookup.get(tuple(int(a) for a in z))
                if p is not None:
                    out[i] = p
        return out

    def support(self):
        s = self.inner.support()
        if s is None:
            return None
        keep = {z for z in s if z not in self._lookup}
        keep |= {z for z, p in self.overrides if p > 0}
        return tuple(sorted(keep))

    def tail_sum_bound(self, R):
        extra = math.fsum(max(0.0, p - self.inner._value(z))
                          for z, p in self.overrides if linf(z) > R)
        return self.inner.tail_sum_bound(R) + extra


def override(kernel: Kernel, values: Mapping) -> OverrideKernel:
    return OverrideKernel(kernel, tuple(dict(values).items()))


def kernel_value(kernel: Kernel, displacement: Sequence[int]) -> float:
    return kernel.value(displacement)


# ---------------------------------------------------------------------------
# windows and tail sums


def _window_points(d: int, R: int) -> Iterator[Vertex]:
    for z in itertools.product(range(-R, R + 1), repeat=d):
        if any(z):
            yield z


def _window_array(d: int, R: int) -> np.ndarray:
    axes = np.arange(-R, R + 1)
    grid = np.stack(np.meshgrid(*([axes] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return grid[np.any(grid != 0, axis=1)]


def _max_window_radius(d: int) -> int:
    return max(1, int((MAX_WINDOW_POINTS ** (1.0 / d) - 1) // 2))


def choose_window(kernel: Kernel, target: float, minimum: int = 1) -> int:
    """Smallest power-of-two radius whose tail bound is below ``target``.

    Capped so that the window has at most ``MAX_WINDOW_POINTS`` points.
    """
    cap = _max_window_radius(kernel.d)
    R = max(1, minimum)
    while R < cap and kernel.tail_sum_bound(R) > target:
        R *= 2
    return max(minimum, min(R, cap))


def _window_max(kernel: Kernel) -> float:
    R = choose_window(kernel, 1e-3)
    vals = kernel.values(_window_array(kernel.d, R))
    return max(float(vals.max(initial=0.0)), min(1.0, kernel.tail_sum_bound(R)))


@dataclass(frozen=True)
class LogSum:
    """``sum log(1 - J(z))`` over a displacement set, as a rigorous interval.

    ``lower <= true sum <= upper``; ``upper`` is the exact window sum.
    """

    lower: float
    upper: float
    radius: int
    tail_bound: float

    @property
    def width(self):
        return self.upper - self.lower


def _tail_log_correction(kernel: Kernel, R: int) -> float:
    # sum_{tail} -log(1-J) <= sum_{tail} J / (1 - a) with a = sup over the tail
    # (each tail term is at most the whole tail sum).
    tail = kernel.tail_sum_bound(R)
    if tail == 0:
        return 0.0
    a = min(tail, 1.0)
    if a >= 1.0:
        return math.inf
    return tail / (1.0 - a)


def survival_log_sum(kernel: Kernel, excluded: Iterable = (), *, target: float = 1e-12,
                     minimum_radius: int = 1, restrict=None) -> LogSum:
    """Bounds on ``sum_{z not in excluded} log(1 - J(z))`` over all ``z != 0``.

    ``restrict`` optionally filters displacements (a predicate on ``z``); it is
    only allowed for finitely supported kernels.

    Raises :class:`ZeroProductError` if some included ``J(z)`` equals 1.
    """
    excluded = set(excluded)
    s = kernel.support()
    if s is not None:
        terms = []
        for z in s:
            if z in excluded or (restrict is not None and not restrict(z)):
                continue
            p = kernel._value(z)
            if p >= 1.0:
                raise ZeroProductError(f"J{z} = 1 makes the product vanish",
                                       module="lattice", operation="log_survival_product")
            terms.append(math.log1p(-p))
        total = math.fsum(terms)
        return LogSum(total, total, kernel.support_radius or 0, 0.0)
    if restrict is not None:
        raise ValueError("restrict is only supported for finitely supported kernels")
    R = choose_window(kernel, target, minimum_radius)
    zs = _window_array(kernel.d, R)
    vals = kernel.values(zs)
    inside = [z for z in excluded if linf(z) <= R]
    hits = zs[vals >= 1.0]
    if any(tuple(int(a) for a in z) not in excluded for z in hits):
        raise ZeroProductError("some J(z) = 1 makes the product vanish",
                               module="lattice", operation="log_survival_product")
    vals = np.where(vals >= 1.0, 0.0, vals)
    removed = [math.log1p(-kernel._value(z)) for z in inside if kernel._value(z) < 1.0]
    upper = math.fsum(np.log1p(-vals).tolist() + [-t for t in removed])
    corr = _tail_log_correction(kernel, R)
    return LogSum(upper - corr, upper, R, kernel.tail_sum_bound(R))


# ---------------------------------------------------------------------------
# difference sets


@dataclass(frozen=True)
class DifferenceSet:
    """Finite displacement set on which two kernels differ.

    A potential edge ``xy`` belongs to the (translation-invariant) edge set
    iff ``y - x`` is one of the displacements; for undirected kernels the set
    is closed under negation so the orientation of the pair is irrelevant.
    """

    displacements: frozenset
    directed: bool = False

    def __post_init__(self):
        disp = frozenset(tuple(int(a) for a in z) for z in self.displacements)
        if not self.directed:
            disp = disp | {neg(z) for z in disp}
        object.__setattr__(self, "displacements", disp)

    def __len__(self):
        return len(self.displacements)

    def __iter__(self):
        return iter(sorted(self.displacements))

    def __contains__(self, z):
        return tuple(z) in self.displacements

    def has_edge(self, x: Vertex, y: Vertex) -> bool:
        return sub(y, x) in self.displacements

    @classmethod
    def empty(cls, directed=False):
        return cls(frozenset(), directed)


def _difference_candidates(J: Kernel, Jp: Kernel) -> set:
    if J == Jp:
        return set()
    sJ, sJp = J.support(), Jp.support()
    if sJ is not None and sJp is not None:
        return set(sJ) | set(sJp)
    if isinstance(Jp, OverrideKernel):
        return _difference_candidates(J, Jp.inner) | {z for z, _ in Jp.overrides}
    if isinstance(J, OverrideKernel):
        return _difference_candidates(J.inner, Jp) | {z for z, _ in J.overrides}
    if isinstance(J, ScaledKernel) and isinstance(Jp, ScaledKernel) and J.factor == Jp.factor:
        return _difference_candidates(J.inner, Jp.inner)
    raise InfiniteDifferenceError(
        "cannot certify that the kernels differ on finitely many displacements",
        module="lattice", operation="delta_of")


def delta_of(J: Kernel, Jp: Kernel) -> DifferenceSet:
    """Displacements where ``Jp`` differs from ``J``, validating ``Jp < J``."""
    if J.d != Jp.d or J.directed != Jp.directed:
        raise KernelError("kernels must share dimension and orientation",
                          module="lattice", operation="delta_of")
    diff = set()
    for z in _difference_candidates(J, Jp):
        a, b = J._value(z), Jp._value(z)
        if b > a:
            raise OrderViolationError(f"J'{z} = {b} exceeds J{z} = {a}",
                                      module="lattice", operation="delta_of")
        if a != b:
            diff.add(z)
    if not diff:
        raise EmptyDeltaError("J' equals J; there is no perturbation",
                              module="lattice", operation="delta_of")
    return DifferenceSet(frozenset(diff), J.directed)


# ---------------------------------------------------------------------------
# potential edges


@dataclass(frozen=True)
class EdgeIndex:
    """Potential edges inside a region plus incidence lists.

    ``outgoing[v]`` lists the edges along which an exploration may leave
    ``v``: all incident edges when undirected, out-edges when directed.
    ``touching[v]`` lists every edge incident to ``v``.
    """

    edges: tuple
    touching: dict
    outgoing: dict
    directed: bool
    out_degree: dict = field(default_factory=dict)

    @staticmethod
    def build(edges, region, directed):
        touching = {v: [] for v in region.vertices}
        outgoing = {v: [] for v in region.vertices}
        for e in edges:
            x, y = e
            touching[x].append(e)
            touching[y].append(e)
            outgoing[x].append(e)
            if not directed:
                outgoing[y].append(e)
        out_degree = {v: len(es) for v, es in outgoing.items()}
        return EdgeIndex(tuple(edges), touching, outgoing, directed, out_degree)


def region_displacements(kernel: Kernel, region: Region) -> list:
    """Displacements with positive kernel value that fit inside the region."""
    s = kernel.support()
    if s is not None:
        return [z for z in s if linf(z) <= region.diameter]
    zs = _window_array(kernel.d, region.diameter)
    vals = kernel.values(zs)
    return [tuple(int(a) for a in z) for z, v in zip(zs, vals) if v > 0]


@functools.lru_cache(maxsize=64)
def edge_index(kernel: Kernel, region: Region) -> EdgeIndex:
    directed = kernel.directed
    disp = region_displacements(kernel, region)
    if not directed:
        disp = [z for z in disp if is_positive(z)]
    edges = []
    for x in region.vertices:
        for z in disp:
            y = add(x, z)
            if region.contains(y):
                edges.append((x, y))
    edges.sort()
    return EdgeIndex.build(edges, region, directed)


def potential_edges(kernel: Kernel, n: int, region: Region | None = None) -> list:
    """All potential edges with both endpoints in the region, sorted."""
    region = region or Ball(kernel.d, n)
    return list(edge_index(kernel, region).edges)


# ---------------------------------------------------------------------------
# boundary and survival probabilities


def _exterior_log_sums(kernel: Kernel, region: Region, target: float):
    """Per-vertex interval bounds on ``sum log(1 - J(w - v))`` over ``w`` outside the region."""
    s = kernel.support()
    out = {}
    if s is not None:
        for v in region.vertices:
            terms = []
            certain = False
            for z in s:
                if region.contains(add(v, z)):
                    continue
                p = kernel._value(z)
                if p >= 1.0:
                    certain = True
                    break
                terms.append(math.log1p(-p))
            total = -math.inf if certain else math.fsum(terms)
            out[v] = (total, total)
        return out
    whole = survival_log_sum(kernel, target=target, minimum_radius=region.diameter)
    for v in region.vertices:
        inside = [sub(w, v) for w in region.vertices if w != v]
        vals = kernel.values(np.array(inside, dtype=float).reshape(-1, kernel.d))
        if np.any(vals >= 1.0):
            raise ZeroProductError("interior kernel value 1 is not supported here")
        interior = math.fsum(np.log1p(-vals).tolist())
        out[v] = (whole.lower - interior, whole.upper - interior)
    return out


@functools.lru_cache(maxsize=64)
def tail_open_intervals(kernel: Kernel, region: Region, target: float = 1e-12) -> dict:
    """Rigorous ``(lo, hi)`` bounds on P(v has an open edge leaving the region)."""
    out = {}
    for v, (lo, hi) in _exterior_log_sums(kernel, region, target).items():
        out[v] = (-math.expm1(hi), -math.expm1(lo))
    return out


@functools.lru_cache(maxsize=64)
def tail_open_probabilities(kernel: Kernel, region: Region) -> dict:
    """Midpoint of :func:`tail_open_intervals` for every vertex of the region."""
    return {v: 0.5 * (lo + hi) for v, (lo, hi) in tail_open_intervals(kernel, region).items()}


def tail_open_probability(kernel: Kernel, v: Vertex, n: int, region: Region | None = None) -> float:
    """Probability that ``v`` has at least one open edge to the region's complement."""
    region = region or Ball(kernel.d, n)
    v = tuple(v)
    if not region.contains(v):
        raise ValueError(f"{v} is not in the region")
    return tail_open_probabilities(kernel, region)[v]


def log_survival_product(kernel: Kernel, excluded: DifferenceSet | Iterable = (),
                         *, target: float = 1e-9) -> float:
    """Lower bound on ``prod_{z not in excluded} (1 - J(z))``.

    ``target`` is the relative accuracy requested for infinite kernels: the
    window is widened until the tail correction is below it (or the window
    cap is hit).
    """
    ex = excluded.displacements if isinstance(excluded, DifferenceSet) else set(excluded)
    return math.exp(survival_log_sum(kernel, ex, target=target).lower)


def survival_product_bounds(kernel: Kernel, excluded=(), *, target: float = 1e-9):
    ex = excluded.displacements if isinstance(excluded, DifferenceSet) else set(excluded)
    ls = survival_log_sum(kernel, ex, target=target)
    return math.exp(ls.lower), math.exp(ls.upper), ls
