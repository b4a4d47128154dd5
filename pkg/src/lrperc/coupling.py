"""Coupling of a perturbed kernel with a thinned copy of the original.

Given ``J' < J`` differing on a finite displacement set ``Delta``,
:func:`compute_q` picks the thinning parameter

    q = min(m, m ** #Delta * P),   m = min_{z in Delta} (1 - (J'(z)/J(z)) ** (1/3)),

where ``P`` is a certified lower bound on ``prod_{z not in Delta} (1 - J(z))``;
the comparison kernel is ``pJ`` with ``p = 1 - q``.

:func:`realize_coupled` draws one joint sample from a single mark field:

* ``G_J``: edge open iff ``U <= J``;
* ``G*`` (four-condition graph): ``U <= J`` and ``V^x, W, V^y <= 1 - q``;
* ``G'``: ``G*`` thinned by the ``X`` channel with the ratio
  ``min(1, J'/(J (1-q)^3))`` (``"pointwise"`` mode, so ``G' <= G* <= G_J``
  edge by edge), or the same rule on ``Delta`` and plain ``U <= J`` off it
  (``"exact_marginal"`` mode, where every edge is open with probability
  exactly ``J'``);
* the exploration with ``(J, Delta, q)`` and its untagged cluster ``C^H``;
* the halo: ``G_J``-open edges in the region with an endpoint in ``C^H``.

If the exploration exhausts without reaching ``T``, every vertex of the
``G'`` cluster lies in ``C^H`` or is a ``G_J``-neighbour of it;
:func:`check_containment` verifies this per sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptyDeltaError, InternalConsistencyError, ValidationError
from .exploration import AssertLevel, ExplorationResult, Termination, run
from .lattice import (
    DifferenceSet,
    Kernel,
    Region,
    default_region,
    delta_of,
    edge_index,
    origin,
    sub,
    survival_log_sum,
)
from .marks import MarkField

MODES = ("pointwise", "exact_marginal")


@dataclass(frozen=True)
class CouplingParams:
    p: float
    q: float
    delta: DifferenceSet
    m: float
    product_lower: float
    window_radius: int
    tail_bound: float
    p_overridden: bool = False

    def as_dict(self) -> dict:
        return {
            "p": self.p, "q": self.q, "m": self.m,
            "delta": [list(z) for z in self.delta],
            "delta_size": len(self.delta),
            "product_lower": self.product_lower,
            "window_radius": self.window_radius, "tail_bound": self.tail_bound,
            "p_overridden": self.p_overridden,
        }


def compute_q(J: Kernel, Jp: Kernel, delta: DifferenceSet | None = None, *,
              p: float | None = None) -> CouplingParams:
    """Thinning parameter ``q`` and comparison parameter ``p = 1 - q``.

    ``p`` may be overridden (sensitivity studies, deliberately broken
    inputs); ``q`` is always the value of the formula.
    """
    if delta is None:
        delta = delta_of(J, Jp)
    if not len(delta):
        raise EmptyDeltaError("the perturbation set is empty", module="coupling",
                              operation="compute_q")
    if Jp.sup() >= 1.0:
        raise ValidationError("J' takes the value 1", module="coupling", operation="compute_q")
    ratios = []
    for z in delta:
        a, b = J._value(z), Jp._value(z)
        ratios.append(b / a)
    m = float(min(1.0 - np.cbrt(r) for r in ratios))
    ls = survival_log_sum(J, delta.displacements, target=1e-9)
    product = math.exp(ls.lower)
    q = min(m, m ** len(delta) * product)
    # the three thinning marks must leave room for J' on every perturbed edge
    keep = (1.0 - q) ** 3
    for z in delta:
        a, b = J._value(z), Jp._value(z)
        # (1-q)^3 carries an absolute rounding error of order 1e-16
        if a * keep < b - 1e-12 * a:
            raise InternalConsistencyError(
                f"J{z} (1-q)^3 = {a * keep} < J'{z} = {b}", module="coupling",
                operation="compute_q")
    if p is None:
        p_val, overridden = 1.0 - q, False
    else:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"p={p} is not a probability", module="coupling",
                                  operation="compute_q")
        p_val, overridden = float(p), True
    return CouplingParams(p=p_val, q=q, delta=delta, m=m, product_lower=product,
                          window_radius=ls.radius, tail_bound=ls.tail_bound,
                          p_overridden=overridden)


# --- edge rules --------------------------------------------------------------


class EdgeRules:
    """Per-edge open/closed rules of the coupled graphs for one mark source."""

    def __init__(self, J: Kernel, Jp: Kernel, params: CouplingParams, marks, mode: str):
        if mode not in MODES:
            raise ValidationError(f"unknown coupling mode {mode!r}", module="coupling",
                                  operation="realize_coupled")
        self.J, self.Jp, self.params, self.marks, self.mode = J, Jp, params, marks, mode
        self.keep = 1.0 - params.q
        self.cube = self.keep ** 3
        self._ratio: dict = {}

    def ratio(self, z) -> float:
        r = self._ratio.get(z)
        if r is None:
            a, b = self.J._value(z), self.Jp._value(z)
            r = self._ratio[z] = 1.0 if a * self.cube <= b else b / (a * self.cube)
        return r

    def open_j(self, e) -> bool:
        x, y = e
        return self.marks.u(e) <= self.J._value(sub(y, x))

    def open_star(self, e) -> bool:
        if not self.open_j(e):
            return False
        x, y = e
        f, k = self.marks, self.keep
        return f.v(e, x) <= k and f.w(e) <= k and f.v(e, y) <= k

    def open_prime(self, e) -> bool:
        x, y = e
        z = sub(y, x)
        if self.mode == "exact_marginal" and not self.params.delta.has_edge(x, y):
            return self.open_j(e)
        return self.open_star(e) and self.marks.x(e) <= self.ratio(z)


def _search(idx, start, is_open, directed: bool):
    """Vertices reachable from ``start`` along edges satisfying ``is_open``."""
    seen = {start}
    stack = [start]
    status: dict = {}
    while stack:
        v = stack.pop()
        for e in idx.outgoing[v]:
            w = e[1] if e[0] == v else e[0]
            if w in seen:
                continue
            ok = status.get(e)
            if ok is None:
                ok = status[e] = is_open(e)
            if ok:
                seen.add(w)
                stack.append(w)
    return frozenset(seen)


@dataclass
class CoupledSample:
    exploration: ExplorationResult
    params: CouplingParams
    mode: str
    cluster_h: frozenset
    cluster_star: frozenset
    cluster_prime: frozenset
    halo_edges: tuple
    region: Region
    directed: bool
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def halo_vertices(self) -> frozenset:
        out = set(self.cluster_h)
        for x, y in self.halo_edges:
            out.add(x)
            out.add(y)
        return frozenset(out)

    @property
    def termination(self) -> Termination:
        return self.exploration.termination

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "termination": self.termination.value,
            "stages": self.exploration.stages,
            "cluster_h": sorted(map(list, self.cluster_h)),
            "cluster_star": sorted(map(list, self.cluster_star)),
            "cluster_prime": sorted(map(list, self.cluster_prime)),
            "halo_vertices": sorted(map(list, self.halo_vertices)),
            "tagged_edges": [[list(x), list(y)] for x, y in self.exploration.tagged_edges],
            "containment": check_containment(self).value,
        }


def realize_coupled(J: Kernel, Jp: Kernel, n: int, seed=None, *,
                    params: CouplingParams | None = None, mode: str = "pointwise",
                    region: Region | None = None, assert_level=AssertLevel.OFF,
                    marks=None) -> CoupledSample:
    """One joint realisation of the exploration and the coupled clusters.

    ``marks`` replaces the default ``MarkField(seed)`` (used by the exact
    enumeration oracle).
    """
    if params is None:
        params = compute_q(J, Jp)
    if marks is None:
        marks = MarkField(seed, directed=J.directed)
    region = region or default_region(J, n)
    rules = EdgeRules(J, Jp, params, marks, mode)
    res = run(J, params.delta, params.q, n, marks, region=region, assert_level=assert_level)
    idx = edge_index(J, region)
    o = origin(J.d)
    ch = res.cluster_h()
    star = _search(idx, o, rules.open_star, J.directed)
    prime = _search(idx, o, rules.open_prime, J.directed)
    halo = []
    seen_edges = set()
    for v in ch:
        for e in idx.outgoing[v]:
            if e not in seen_edges:
                seen_edges.add(e)
                if rules.open_j(e):
                    halo.append(e)
    sample = CoupledSample(
        exploration=res, params=params, mode=mode, cluster_h=ch, cluster_star=star,
        cluster_prime=prime, halo_edges=tuple(sorted(halo)), region=region,
        directed=J.directed, seed=None if seed is None else int(getattr(marks, "seed", seed)),
    )
    if AssertLevel(assert_level) is not AssertLevel.OFF and mode == "pointwise" and not prime <= star:
        raise InternalConsistencyError("G' cluster is not inside the four-condition cluster",
                                       module="coupling", operation="realize_coupled")
    return sample


class Containment(str, Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    NOT_APPLICABLE = "not-applicable"


def check_containment(sample: CoupledSample) -> Containment:
    """Is the ``G'`` cluster inside ``C^H`` plus its ``G_J``-neighbours?

    Only meaningful when the exploration exhausted without reaching ``T``.
    """
    if sample.termination is Termination.REACHED_T:
        return Containment.NOT_APPLICABLE
    if sample.cluster_prime <= sample.halo_vertices:
        return Containment.HOLDS
    return Containment.VIOLATED


def containment_sweep(J: Kernel, Jp: Kernel, n: int, seeds, *, mode: str = "pointwise",
                      params: CouplingParams | None = None, region: Region | None = None,
                      assert_level=AssertLevel.OFF) -> dict:
    """Count containment outcomes over ``seeds``; violations keep their seeds."""
    params = params or compute_q(J, Jp)
    counts = {c.value: 0 for c in Containment}
    violations = []
    for s in seeds:
        sample = realize_coupled(J, Jp, n, s, params=params, mode=mode, region=region,
                                 assert_level=assert_level)
        c = check_containment(sample)
        counts[c.value] += 1
        if c is Containment.VIOLATED:
            violations.append(int(s))
    return {"counts": counts, "violating_seeds": violations}


# --- distributional comparison ----------------------------------------------


def halo_size_independent(J: Kernel, p: float, region: Region, marks) -> int:
    """``|V(B_{G_J}(C_o, 1))|`` with ``C_o`` the cluster of ``o`` in ``G_{pJ}``.

    ``G_{pJ}`` and ``G_J`` share the ``U`` marks (canonical coupling).
    """
    idx = edge_index(J, region)
    o = origin(J.d)

    def open_p(e):
        x, y = e
        return marks.u(e) <= p * J._value(sub(y, x))

    c = _search(idx, o, open_p, J.directed)
    halo = set(c)
    for v in c:
        for e in idx.outgoing[v]:
            x, y = e
            if marks.u(e) <= J._value(sub(y, x)):
                halo.add(x)
                halo.add(y)
    return len(halo)


def empirical_cdf(sizes, support_max: int) -> np.ndarray:
    """``F(k) = P(size <= k)`` for ``k = 0 .. support_max``."""
    counts = np.bincount(np.asarray(sizes, dtype=np.int64), minlength=support_max + 1)
    return np.cumsum(counts[: support_max + 1]) / max(len(sizes), 1)


@dataclass
class DominationReport:
    replicas: int
    seed0: int
    params: CouplingParams
    mode: str
    grid: list
    cdf_prime: list
    cdf_halo: list
    max_violation: float
    violation_at: int | None
    band: float
    z_score: float
    sigmas: float = 3.0

    @property
    def consistent(self) -> bool:
        """No CDF crossing beyond the confidence band."""
        return self.max_violation <= self.band

    def as_dict(self) -> dict:
        return {
            "replicas": self.replicas, "seed0": self.seed0, "mode": self.mode,
            "params": self.params.as_dict(), "grid": self.grid,
            "cdf_prime": self.cdf_prime, "cdf_halo": self.cdf_halo,
            "max_violation": self.max_violation, "violation_at": self.violation_at,
            "band": self.band, "z_score": self.z_score, "sigmas": self.sigmas,
            "consistent": self.consistent,
        }


def domination_sizes(J: Kernel, Jp: Kernel, n: int, seeds, *, params: CouplingParams,
                     mode: str = "exact_marginal", region: Region | None = None):
    """Per-seed ``|C'_o|`` from coupled samples and halo sizes from fresh ``G_{pJ}`` samples."""
    region = region or default_region(J, n)
    prime, halo = [], []
    for s in seeds:
        sample = realize_coupled(J, Jp, n, s, params=params, mode=mode, region=region)
        prime.append(len(sample.cluster_prime))
        fresh = MarkField(s, stream=1, directed=J.directed)
        halo.append(halo_size_independent(J, params.p, region, fresh))
    return prime, halo


def domination_report(J: Kernel, Jp: Kernel, n: int, replicas: int, seed0: int = 0, *,
                      params: CouplingParams | None = None, mode: str = "exact_marginal",
                      region: Region | None = None, sigmas: float = 3.0,
                      sizes=None) -> DominationReport:
    """Empirical one-sided comparison of ``|C'_o|`` against the halo size.

    Domination means ``P(|C'_o| <= k) >= P(|halo| <= k)`` for every ``k``.
    The violation statistic is ``max_k (F_halo(k) - F_prime(k))^+`` and the
    band is ``sigmas`` binomial standard errors of the difference at the
    maximising ``k``.
    """
    if replicas < 1:
        raise ValidationError("replicas must be >= 1", module="coupling",
                              operation="domination_report")
    params = params or compute_q(J, Jp)
    region = region or default_region(J, n)
    if sizes is None:
        sizes = domination_sizes(J, Jp, n, range(seed0, seed0 + replicas), params=params,
                                 mode=mode, region=region)
    prime, halo = sizes
    top = len(region)
    fp = empirical_cdf(prime, top)
    fh = empirical_cdf(halo, top)
    diff = fh - fp
    k = int(np.argmax(diff))
    viol = float(max(diff[k], 0.0))
    se = math.sqrt((fp[k] * (1 - fp[k]) + fh[k] * (1 - fh[k])) / replicas)
    grid = list(range(1, top + 1))
    return DominationReport(
        replicas=replicas, seed0=seed0, params=params, mode=mode, grid=grid,
        cdf_prime=fp[1:].tolist(), cdf_halo=fh[1:].tolist(), max_violation=viol,
        violation_at=k if viol > 0 else None, band=sigmas * se,
        z_score=viol / se if se > 0 else (math.inf if viol > 0 else 0.0), sigmas=sigmas,
    )
