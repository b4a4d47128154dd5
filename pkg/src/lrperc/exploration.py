"""Stage-by-stage cluster exploration with F- and S-checks.

The exploration reveals the cluster of the origin inside a finite region
while thinning it into a subgraph ``H``: edges of the perturbation set are
kept only with probability ``1 - q`` (step 5), and a discovery edge whose far
endpoint has no open unexplored edges outside the perturbation set (F-check)
and loses all of its perturbation edges to the auxiliary thinning (S-check)
is *tagged*; its endpoint becomes a leaf.

State lives in :class:`ExplorationState`; :func:`step` runs one stage and
:func:`run` iterates to termination.  With ``assert_level`` at
``"lemma-checks"`` or above the independence properties the construction
relies on are checked at runtime and an :class:`InternalConsistencyError`
is raised on violation.

Marks are read through a duck-typed source with ``u``, ``v``, ``w``,
``priority`` and ``tail`` methods; :class:`~lrperc.marks.MarkField` is the
production source and :mod:`lrperc.oracle` supplies synthetic ones.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import InternalConsistencyError
from .lattice import DifferenceSet, default_region, Kernel, Region, edge_index, origin, tail_open_probabilities


class Status(str, Enum):
    UNSEEN = "unseen"
    CLOSED_G = "closed-in-G"
    OPEN_G = "open-in-G"
    OPEN_H = "open-in-H"
    CLOSED_H = "closed-in-H-by-(5)"
    TAGGED = "tagged"


class Termination(str, Enum):
    REACHED_T = "reached_T"
    EXHAUSTED = "exhausted"


class AssertLevel(str, Enum):
    OFF = "off"
    LEMMA = "lemma-checks"
    FULL = "full-trace"


@dataclass
class ExplorationState:
    kernel: Kernel
    delta: DifferenceSet
    q: float
    region: Region
    field: Any
    directed: bool
    A: set
    B: set
    E: set
    L: set
    T: "TailIndicator"
    outgoing: dict
    touching: dict
    l_degree: dict
    statuses: dict = field(default_factory=dict)
    t: int = 0
    termination: Termination | None = None
    stop_at_T: bool = True
    level: AssertLevel = AssertLevel.OFF
    trace: list | None = None
    _heap: list = field(default_factory=list, repr=False)
    _priority: dict = field(default_factory=dict, repr=False)
    _pending: set = field(default_factory=set, repr=False)
    # bookkeeping for the runtime invariant checks
    _revealed_u: set = field(default_factory=set, repr=False)
    _revealed_v: set = field(default_factory=set, repr=False)
    _f_source: dict = field(default_factory=dict, repr=False)
    _f_failed: set = field(default_factory=set, repr=False)
    _labels: list = field(default_factory=list, repr=False)
    _far: Any = field(default=None, repr=False)
    leaves: dict = field(default_factory=dict)

    @property
    def checking(self):
        return self.level is not AssertLevel.OFF

    def fail(self, message, operation="step"):
        raise InternalConsistencyError(f"stage {self.t}: {message}", trace=self.trace,
                                       operation=operation)


@dataclass
class ExplorationResult:
    termination: Termination
    A: frozenset
    B: frozenset
    statuses: dict
    tail: "TailIndicator"
    stages: int
    region: Region
    directed: bool
    leaves: dict = field(default_factory=dict)
    trace: list | None = None

    @property
    def T(self) -> frozenset:
        return self.tail.materialize()

    @property
    def discovered(self) -> frozenset:
        return self.A | self.B

    def edges_with(self, *statuses) -> list:
        return sorted(e for e, s in self.statuses.items() if s in statuses)

    @property
    def tagged_edges(self) -> list:
        return self.edges_with(Status.TAGGED)

    @property
    def h_edges(self) -> list:
        """All open-in-H edges, tagged ones included."""
        return self.edges_with(Status.OPEN_H, Status.TAGGED)

    def cluster_h(self) -> frozenset:
        """Vertices reached from the origin along untagged open-in-H edges."""
        adj: dict = {}
        for x, y in self.edges_with(Status.OPEN_H):
            adj.setdefault(x, []).append(y)
            if not self.directed:
                adj.setdefault(y, []).append(x)
        o = origin(self.region.d)
        seen = {o}
        stack = [o]
        while stack:
            v = stack.pop()
            for w in adj.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return frozenset(seen)

    def trace_lines(self) -> str:
        """The trace as line-delimited JSON records."""
        if self.trace is None:
            return ""
        return "".join(json.dumps(r, default=list) + "\n" for r in self.trace)


class TailIndicator:
    """Membership in ``T``, read lazily from the per-vertex tail marks.

    The marks form a fixed field, so evaluating membership on demand observes
    exactly the same set as sampling every vertex up front.
    """

    def __init__(self, probabilities: dict, field):
        self.probabilities = probabilities
        self.field = field
        self._known: dict = {}

    def __contains__(self, v) -> bool:
        hit = self._known.get(v)
        if hit is None:
            p = self.probabilities.get(v, 0.0)
            hit = self._known[v] = p > 0.0 and self.field.tail(v) <= p
        return hit

    def materialize(self) -> frozenset:
        return frozenset(v for v in self.probabilities if v in self)


# --- L bookkeeping ---------------------------------------------------------


def _remove_from_L(st: ExplorationState, e) -> None:
    if e not in st.L:
        return
    st.L.remove(e)
    x, y = e
    ends = (x,) if st.directed else (x, y)
    for v in ends:
        st.l_degree[v] -= 1
        if st.l_degree[v] == 0 and v in st.A:
            st._pending.add(v)


def _activate(st: ExplorationState, v) -> None:
    if st.checking and v in st.B:
        st.fail(f"{v} would be both active and boundary")
    st.A.add(v)
    for e in st.outgoing[v]:
        if e in st.L:
            pr = st._priority.get(e)
            if pr is None:
                pr = st._priority[e] = st.field.priority(e)
            # ties in the priority mark fall back to the edge key
            heapq.heappush(st._heap, (pr, e))
    if st.l_degree[v] == 0:
        st._pending.add(v)
    _check_reached(st, v)


def _to_boundary(st: ExplorationState, v) -> None:
    st.B.add(v)
    _check_reached(st, v)


def _check_reached(st: ExplorationState, v) -> None:
    if st.stop_at_T and st.termination is None and v in st.T:
        st.termination = Termination.REACHED_T


def _reveal_u(st: ExplorationState, e, during: str) -> float:
    if st.checking:
        if e in st._revealed_u:
            st.fail(f"U mark of {e} revealed twice ({during})", operation=during)
        st._revealed_u.add(e)
    return st.field.u(e)


# --- operations ------------------------------------------------------------


def initialize(J: Kernel, delta: DifferenceSet | None, q: float, n: int, field, *,
               region: Region | None = None, assert_level=AssertLevel.OFF,
               stop_at_T: bool = True) -> ExplorationState:
    """Set up ``A = {o}``, ``B = E = {}`` and ``L`` = all potential edges, ordered."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q={q} is not a probability")
    region = region or default_region(J, n)
    delta = delta if delta is not None else DifferenceSet.empty(J.directed)
    idx = edge_index(J, region)
    T = TailIndicator(tail_open_probabilities(J, region), field)
    l_degree = dict(idx.out_degree)
    level = AssertLevel(assert_level)
    st = ExplorationState(
        kernel=J, delta=delta, q=q, region=region, field=field, directed=J.directed,
        A=set(), B=set(), E=set(), L=set(idx.edges), T=T,
        outgoing=idx.outgoing, touching=idx.touching, l_degree=l_degree,
        stop_at_T=stop_at_T, level=level,
        trace=[] if level is AssertLevel.FULL else None,
    )
    _activate(st, origin(J.d))
    return st


def f_check(st: ExplorationState, e, x, y) -> bool:
    """F-check at the far endpoint ``y`` of ``e``; True iff it passes.

    Reveals ``U`` on every unexplored non-perturbation edge from ``y`` to a
    non-active vertex, drops the closed ones from ``L`` and records the open
    ones in ``E``.
    """
    failed = False
    for f in st.outgoing[y]:
        if f not in st.L:
            continue
        z = f[1] if f[0] == y else f[0]
        if z in st.A or st.delta.has_edge(y, z):
            continue
        if _reveal_u(st, f, "f_check") <= st.kernel._value(_disp(y, z)):
            st.E.add(f)
            st.statuses[f] = Status.OPEN_G
            st._f_source[f] = y
            failed = True
        else:
            st.statuses[f] = Status.CLOSED_G
            _remove_from_L(st, f)
    if failed:
        st._f_failed.add(y)
    return not failed


def s_check(st: ExplorationState, e, x, y) -> bool:
    """S-check at ``y``; True iff ``e`` gets tagged.

    Reads the auxiliary ``V`` mark attached to ``y`` on every perturbation
    edge from ``y`` to a non-active vertex of the region.
    """
    threshold = 1.0 - st.q
    members = st.region.members
    survivors, dropped = 0, []
    for dz in st.delta:
        z = tuple(a + b for a, b in zip(y, dz))
        if z in st.A or z not in members:
            continue
        f = (y, z) if (st.directed or y < z) else (z, y)
        if st.checking:
            if (f, y) in st._revealed_v:
                st.fail(f"V mark of {f} at {y} revealed twice", operation="s_check")
            st._revealed_v.add((f, y))
        if st.field.v(f, y) <= threshold:
            survivors += 1
        else:
            dropped.append(f)
    if survivors == 0:
        for f in list(st.touching[y]):
            _remove_from_L(st, f)
        _to_boundary(st, y)
        return True
    for f in dropped:
        _remove_from_L(st, f)
    _activate(st, y)
    return False


def _disp(x, y):
    return tuple(b - a for a, b in zip(x, y))


def _pick(st: ExplorationState):
    while st._heap:
        _, e = heapq.heappop(st._heap)
        if e in st.L:
            return e
    return None


def step(st: ExplorationState) -> ExplorationState:
    """Run one exploration stage (preprocessing plus the step cascade)."""
    if st.termination is not None:
        raise ValueError("exploration already terminated")
    # (P.a)
    for v in st._pending:
        if v in st.A and st.l_degree[v] == 0:
            st.A.remove(v)
            st.B.add(v)
    st._pending.clear()
    if not st.A:
        st.termination = Termination.EXHAUSTED
        return st
    # (P.b), (P.c)
    e = _pick(st)
    if e is None:
        # every active vertex has run out of edges: forced exhaustion
        st.B |= st.A
        st.A.clear()
        st.termination = Termination.EXHAUSTED
        return st
    st.t += 1
    _remove_from_L(st, e)
    labels = st._labels = ["P"]
    st._far = None
    outcome = _explore_edge(st, e, labels)
    if st.trace is not None:
        rec = {"stage": st.t, "steps": labels, "edge": [list(v) for v in e], "outcome": outcome}
        if st._far is not None:
            rec["far"] = list(st._far)
        st.trace.append(rec)
    if st.checking and st.A & st.B:
        st.fail(f"A and B intersect at {sorted(st.A & st.B)}")
    return st


def _explore_edge(st: ExplorationState, e, labels) -> str:
    a, b = e
    if st.directed:
        x, y = a, b
        irrelevant = y in st.A or y in st.B
    else:
        if a in st.A and b in st.A:
            irrelevant = True
            x, y = a, b
        else:
            irrelevant = False
            x, y = (a, b) if a in st.A else (b, a)
            if st.checking and y in st.B:
                st.fail(f"edge {e} leads into the boundary set")
    if irrelevant:
        labels.append("1.a")
        return "irrelevant"
    labels.append("1.b")
    st._far = y
    in_delta = st.delta.has_edge(x, y)
    # (2)
    if e in st.E:
        labels.append("2")
        if st.checking:
            if in_delta:
                st.fail(f"E-hit edge {e} lies in the perturbation set")
            src = st._f_source.get(e)
            if src != x or x not in st._f_failed:
                st.fail(f"E-hit edge {e}: F-check participant {src} is not the active endpoint {x}")
        st.E.discard(e)
        return _after_open_g(st, e, x, y, labels)
    # (3)
    labels.append("3")
    if _reveal_u(st, e, "step") > st.kernel._value(_disp(x, y)):
        labels.append("3.a")
        st.statuses[e] = Status.CLOSED_G
        return "closed-in-G"
    st.statuses[e] = Status.OPEN_G
    if in_delta:
        labels.append("3.b.ii")
        # (5)
        labels.append("5")
        if st.field.w(e) <= 1.0 - st.q:
            labels.append("5.a")
            st.statuses[e] = Status.OPEN_H
            _activate(st, y)
            return "open-in-H"
        labels.append("5.b")
        st.statuses[e] = Status.CLOSED_H
        return "closed-in-H-by-(5)"
    labels.append("3.b.i")
    return _after_open_g(st, e, x, y, labels)


def _after_open_g(st, e, x, y, labels):
    labels.append("F")
    passed = f_check(st, e, x, y)
    st.statuses[e] = Status.OPEN_H
    if not passed:
        labels.append("4.a")
        _activate(st, y)
        return "open-in-H"
    labels.append("4.b")
    labels.append("S")
    if s_check(st, e, x, y):
        labels.append("S.b")
        st.statuses[e] = Status.TAGGED
        st.leaves[e] = y
        return "tagged"
    labels.append("S.c")
    return "open-in-H"


def finish(st: ExplorationState) -> ExplorationResult:
    res = ExplorationResult(
        termination=st.termination, A=frozenset(st.A), B=frozenset(st.B),
        statuses=dict(st.statuses), tail=st.T, stages=st.t, region=st.region,
        directed=st.directed, leaves=dict(st.leaves), trace=st.trace,
    )
    if st.checking:
        _post_checks(st, res)
    return res


def _post_checks(st: ExplorationState, res: ExplorationResult) -> None:
    # tagged endpoints are leaves of H and no H-edge reaches them later
    h_degree: dict = {}
    for x, y in res.h_edges:
        h_degree[y] = h_degree.get(y, 0) + 1
        if not st.directed:
            h_degree[x] = h_degree.get(x, 0) + 1
    for e, y in res.leaves.items():
        if y not in res.B:
            st.fail(f"tagged endpoint {y} is not in B", operation="run")
        if h_degree.get(y, 0) != 1:
            st.fail(f"tagged endpoint {y} has H-degree {h_degree.get(y, 0)}", operation="run")
    if st.trace is not None:
        tagged_at = {}
        for rec in st.trace:
            ends = [tuple(v) for v in rec["edge"]]
            for v in ends:
                if v in tagged_at:
                    st.fail(f"edge {ends} explored at stage {rec['stage']} touches the leaf {v} "
                            f"tagged at stage {tagged_at[v]}", operation="run")
            if rec["outcome"] == "tagged":
                tagged_at[tuple(rec["far"])] = rec["stage"]
    if res.termination is Termination.REACHED_T and not any(v in res.tail for v in res.discovered):
        st.fail("reached_T without a discovered vertex in T", operation="run")


def run(J: Kernel, delta: DifferenceSet | None, q: float, n: int, field, *,
        region: Region | None = None, assert_level=AssertLevel.OFF,
        stop_at_T: bool = True, max_stages: int | None = None) -> ExplorationResult:
    """Explore until exhaustion or until a vertex of ``T`` is discovered."""
    st = initialize(J, delta, q, n, field, region=region, assert_level=assert_level,
                    stop_at_T=stop_at_T)
    limit = max_stages if max_stages is not None else len(st.L) + len(st.region) + 1
    while st.termination is None:
        if st.t > limit:
            st.fail(f"no termination after {limit} stages", operation="run")
        step(st)
    return finish(st)
