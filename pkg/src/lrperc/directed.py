"""Directed and oriented (space-time) percolation.

A directed kernel assigns ``J(z)`` to the ordered pair ``(x, x + z)``
without any symmetry; marks are keyed by ``(tail, head)`` and clusters are
forward-reachability sets.  An *oriented* kernel lives on
``Z^space_d x Z`` and is supported on displacements whose last (time)
coordinate is ``+1``; its finite volume is the box
``{|x|_1 <= n, 0 <= t <= n}`` instead of the l1 ball.

The exploration and the coupling need no changes beyond this: edge indices
list out-edges, the S-check reads the ``V`` mark keyed by the head, and the
boundary indicator uses out-edges only.
"""
from __future__ import annotations

from typing import Mapping

from .coupling import CoupledSample, Containment, CouplingParams, check_containment, realize_coupled
from .errors import KernelError
from .exploration import AssertLevel, ExplorationResult, run
from .lattice import DifferenceSet, Kernel, Region, TableKernel, default_region, override
from .marks import MarkField


def directed_kernel(d: int, entries: Mapping) -> TableKernel:
    return TableKernel.from_mapping(d, dict(entries), directed=True)


def oriented_kernel(space_d: int, entries: Mapping) -> TableKernel:
    """Oriented kernel from ``{space displacement: probability}``.

    Each space displacement ``x`` becomes the space-time displacement
    ``(x, 1)``.
    """
    table = {}
    for x, p in dict(entries).items():
        x = tuple(x)
        if len(x) != space_d:
            raise KernelError(f"space displacement {x} is not in Z^{space_d}",
                              module="directed", operation="oriented_kernel")
        table[x + (1,)] = p
    return TableKernel.from_mapping(space_d + 1, table, directed=True)


def oriented_square_lattice(p_left: float, p_right: float | None = None) -> TableKernel:
    """Two forward out-edges per site: ``(x, t) -> (x -+ 1, t + 1)``."""
    return oriented_kernel(1, {(-1,): p_left, (1,): p_left if p_right is None else p_right})


def _require_directed(J: Kernel, op: str):
    if not J.directed:
        raise KernelError("kernel is not directed", module="directed", operation=op)


def directed_explore(J: Kernel, delta: DifferenceSet | None, q: float, n: int, field, *,
                     region: Region | None = None, assert_level=AssertLevel.OFF,
                     stop_at_T: bool = True) -> ExplorationResult:
    """Exploration along out-edges; the region is a space-time box for oriented kernels."""
    _require_directed(J, "directed_explore")
    return run(J, delta, q, n, field, region=region or default_region(J, n),
               assert_level=assert_level, stop_at_T=stop_at_T)


def directed_coupling(J: Kernel, Jp: Kernel, n: int, seed, *, params: CouplingParams | None = None,
                      mode: str = "pointwise", assert_level=AssertLevel.OFF
                      ) -> tuple[CoupledSample, Containment]:
    """Coupled sample with forward-reachability clusters and its containment verdict."""
    _require_directed(J, "directed_coupling")
    sample = realize_coupled(J, Jp, n, seed, params=params, mode=mode,
                             assert_level=assert_level)
    return sample, check_containment(sample)


def forward_field(seed, stream: int = 0) -> MarkField:
    return MarkField(seed, stream=stream, directed=True)


def perturb_orbit(J: Kernel, displacements, value: float) -> Kernel:
    """``J`` with the given displacements set to ``value``."""
    return override(J, {tuple(z): value for z in displacements})
