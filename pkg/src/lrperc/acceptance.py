"""The acceptance suite, shared by ``lrperc accept`` and the test-suite.

Each ``criterion_*`` function runs one check at a configurable scale
(``scale=1.0`` is the contracted size; smaller values shrink replica and
seed counts for smoke runs) and returns a :class:`CriterionResult`.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coupling import compute_q, containment_sweep, domination_report
from .directed import oriented_square_lattice, perturb_orbit
from .errors import InternalConsistencyError
from .exploration import AssertLevel, run
from .lattice import TableKernel, delta_of, nearest_neighbour, override
from .marks import MarkField
from .montecarlo import (
    bisect_beta_c,
    estimate_decay,
    estimate_susceptibility,
    monotonicity_experiment,
    phi_kernel,
)
from .oracle import bfs_cluster, enumerate_exact, exact_domination_check


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        scalars = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items()
                            if isinstance(v, (bool, int, float, str)))
        tail = f" [{scalars}]" if scalars else ""
        return f"[{flag}] criterion {self.number}: {self.name} ({self.seconds:.1f}s){tail}"

    def as_dict(self) -> dict:
        return {"criterion": self.number, "name": self.name, "passed": self.passed,
                "details": self.details}


def _fmt(v) -> str:
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def _scaled(count: int, scale: float) -> int:
    return max(1, int(round(count * scale)))


def _timed(number: int, name: str, body: Callable[[], tuple[bool, dict]]) -> CriterionResult:
    t0 = time.perf_counter()
    passed, details = body()
    return CriterionResult(number, name, bool(passed), details, time.perf_counter() - t0)


# 1 ---------------------------------------------------------------------------


def criterion_1(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Exploration without perturbation finds exactly the BFS cluster."""
    J = nearest_neighbour(2, 0.45)
    seeds = _scaled(10_000, scale)

    def body():
        mismatches, reached_mismatch = [], []
        for s in range(seed0, seed0 + seeds):
            f = MarkField(s)
            full = run(J, None, 0.0, 6, f, stop_at_T=False)
            bfs = bfs_cluster(J, 6, f)
            if full.discovered != bfs.vertices:
                mismatches.append(s)
            # with early stopping the run must stop inside the cluster, at T iff BFS sees T
            early = run(J, None, 0.0, 6, f)
            if not early.discovered <= bfs.vertices or (
                    (early.termination.value == "reached_T") != bfs.reaches_T):
                reached_mismatch.append(s)
        ok = not mismatches and not reached_mismatch
        return ok, {"seeds": seeds, "mismatched_seeds": mismatches[:20],
                    "early_stop_mismatches": reached_mismatch[:20]}

    return _timed(1, "exploration equals BFS cluster (Z^2, 0.45 nn, n=6)", body)


# 2 ---------------------------------------------------------------------------


def random_instance(rng: np.random.Generator):
    """A random (J, J', q, n) tuple with a table kernel on Z^1 or Z^2."""
    d = int(rng.integers(1, 3))
    radius = int(rng.integers(1, 3))
    cands = [z for z in np.ndindex(*([2 * radius + 1] * d))]
    cands = [tuple(int(a) - radius for a in z) for z in cands]
    positive = sorted({z for z in cands if any(z) and z > tuple(-a for a in z)})
    k = int(rng.integers(1, len(positive) + 1))
    chosen = [positive[i] for i in rng.choice(len(positive), size=k, replace=False)]
    table = {}
    for z in chosen:
        table[z] = 1.0 if rng.random() < 0.05 else float(rng.uniform(0.05, 0.95))
    J = TableKernel.from_mapping(d, table)
    nd = int(rng.integers(0, len(chosen) + 1))
    pert = {}
    for z in chosen[:nd]:
        pert[z] = 0.0 if rng.random() < 0.3 else float(table[z] * rng.uniform(0.0, 1.0))
    Jp = override(J, pert) if pert else J
    q = float(rng.choice([0.0, 1.0, rng.uniform()])) if rng.random() < 0.2 else float(rng.uniform())
    n = int(rng.integers(0, 7))
    return J, Jp, q, n


def criterion_2(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Full-trace invariant checks on random kernels, perturbations and thinning levels."""
    tuples = _scaled(10_000, scale)

    def body():
        rng = np.random.default_rng(seed0)
        failures = []
        stages = 0
        for i in range(tuples):
            J, Jp, q, n = random_instance(rng)
            delta = delta_of(J, Jp) if Jp is not J else None
            try:
                res = run(J, delta, q, n, MarkField(seed0 + i), assert_level=AssertLevel.FULL,
                          stop_at_T=i % 2 == 0)
                stages += res.stages
            except InternalConsistencyError as exc:
                failures.append({"index": i, "error": str(exc)})
        return not failures, {"tuples": tuples, "total_stages": stages,
                              "failures": failures[:10]}

    return _timed(2, "exploration invariants on random instances", body)


# 3 ---------------------------------------------------------------------------


def criterion_3(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """No containment violation, undirected and oriented."""
    seeds = _scaled(100_000, scale)

    def body():
        J = nearest_neighbour(2, 0.45)
        Jp = override(J, {(1, 0): 0.3})
        params = compute_q(J, Jp)
        rows = {}
        ok = True
        for n in (4, 6, 8):
            r = containment_sweep(J, Jp, n, range(seed0, seed0 + seeds), params=params)
            rows[f"undirected_n{n}"] = r
            ok &= r["counts"]["violated"] == 0 and r["counts"]["holds"] > 0
        D = oriented_square_lattice(0.7)
        Dp = perturb_orbit(D, [(1, 1)], 0.55)
        r = containment_sweep(D, Dp, 8, range(seed0, seed0 + seeds))
        rows["oriented_n8"] = r
        ok &= r["counts"]["violated"] == 0 and r["counts"]["holds"] > 0
        violations = sum(r["counts"]["violated"] for r in rows.values())
        applicable = sum(r["counts"]["holds"] + r["counts"]["violated"] for r in rows.values())
        return ok, {"seeds_per_run": seeds, "applicable": applicable, "violations": violations,
                    "q_undirected": params.q, "runs": rows}

    return _timed(3, "containment never violated", body)


# 4 ---------------------------------------------------------------------------


def criterion_4(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """The two hand-computed thinning parameters."""

    def body():
        a = compute_q(nearest_neighbour(1, 0.5), nearest_neighbour(1, 1 / 16))
        J = nearest_neighbour(2, 0.3)
        b = compute_q(J, override(J, {(1, 0): 0.3 * 0.729}))
        ok = abs(a.q - 0.25) <= 1e-12 and abs(a.p - 0.75) <= 1e-12 and abs(b.q - 0.0049) <= 1e-12
        return ok, {"q1": a.q, "p1": a.p, "q2": b.q, "p2": b.p}

    return _timed(4, "compute_q reproduces 1/4 and 0.0049", body)


# 5 ---------------------------------------------------------------------------


def _closed_form_cdf(prob: float):
    """CDF of 1 + Bernoulli(prob) + Bernoulli(prob) at 1, 2, 3."""
    r = 1 - prob
    return (r * r, 1 - prob * prob, 1.0)


def criterion_5(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Exact domination on Z^1, n=1 plus Monte Carlo agreement."""
    replicas = _scaled(100_000, scale)

    def body():
        J, Jp = nearest_neighbour(1, 0.5), nearest_neighbour(1, 1 / 16)
        check = exact_domination_check(J, Jp, 1)
        cf_prime, cf_halo = _closed_form_cdf(1 / 16), _closed_form_cdf(0.5)
        exact_err = max(max(abs(a - b) for a, b in zip(check.cdf_prime, cf_prime)),
                        max(abs(a - b) for a, b in zip(check.cdf_halo, cf_halo)))
        rep = domination_report(J, Jp, 1, replicas, seed0)
        z_max = 0.0
        for emp, ex in ((rep.cdf_prime, check.cdf_prime), (rep.cdf_halo, check.cdf_halo)):
            for k, (a, b) in enumerate(zip(emp, ex)):
                se = math.sqrt(max(b * (1 - b), 1e-300) / replicas)
                if b in (0.0, 1.0):
                    z = 0.0 if a == b else math.inf
                else:
                    z = abs(a - b) / se
                z_max = max(z_max, z)
        sus = estimate_susceptibility(J, 1, replicas, seed0)
        exact_mean = enumerate_exact(J, 1, "cluster").mean()
        z_sus = abs(sus.estimate - exact_mean) / sus.stderr
        ok = check.dominated and exact_err <= 1e-12 and z_max <= 4 and z_sus <= 4
        return ok, {"dominated": check.dominated, "exact_cdf_prime": list(check.cdf_prime),
                    "exact_cdf_halo": list(check.cdf_halo), "closed_form_error": exact_err,
                    "replicas": replicas, "empirical_cdf_prime": rep.cdf_prime[:3],
                    "empirical_cdf_halo": rep.cdf_halo[:3], "max_cdf_z": z_max,
                    "susceptibility": sus.estimate, "susceptibility_z": z_sus}

    return _timed(5, "exact domination and Monte Carlo agreement (Z^1, n=1)", body)


# 6 ---------------------------------------------------------------------------


def mixture_kernels(nn: float = 0.25, diagonal: float = 0.1):
    """Nearest-neighbour plus diagonal orbit on Z^2, and the same with the diagonals zeroed."""
    J = TableKernel.from_mapping(2, {(1, 0): nn, (0, 1): nn, (1, 1): diagonal, (1, -1): diagonal})
    return J, override(J, {(1, 1): 0.0, (1, -1): 0.0})


def criterion_6(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    replicas = _scaled(10_000, scale)

    def body():
        J, Jp = mixture_kernels()
        rep = monotonicity_experiment(J, Jp, [32], replicas, seed0)
        row = rep.rows[0]
        return row.z >= 3, {"gap": row.gap, "stderr": row.stderr, "z": row.z,
                            "s_J": row.s_J.bisection.estimate,
                            "s_Jp": row.s_Jp.bisection.estimate, "replicas": replicas}

    return _timed(6, "strict separation of pseudo-critical multipliers (n=32)", body)


# 7 ---------------------------------------------------------------------------


def criterion_7(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    replicas = _scaled(100_000, scale)

    def body():
        fit2 = estimate_decay(nearest_neighbour(2, 0.35), (4, 8, 12, 16), replicas, seed0)
        fit1 = estimate_decay(nearest_neighbour(1, 0.5), (2, 4, 6, 8, 10), replicas, seed0)
        ok = fit2.slope < 0 and fit2.r_squared > 0.95 and abs(fit1.slope - math.log(0.5)) <= 0.05
        return ok, {"z2_slope": fit2.slope, "z2_r_squared": fit2.r_squared,
                    "z1_slope": fit1.slope, "log_half": math.log(0.5),
                    "z2": fit2.as_dict(), "z1": fit1.as_dict()}

    return _timed(7, "subcritical exponential decay", body)


# 8 ---------------------------------------------------------------------------

NN_PHI = {(1, 0): 1.0, (-1, 0): 1.0, (0, 1): 1.0, (0, -1): 1.0}


def criterion_8(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    replicas = _scaled(10_000, scale)

    def body():
        b = bisect_beta_c(lambda beta: phi_kernel(NN_PHI, beta), 32, replicas, beta_max=5.0,
                          tol=1e-4, seed0=seed0)
        p_hat = -math.expm1(-b.estimate)
        return abs(p_hat - 0.5) <= 0.02, {"beta_hat": b.estimate, "p_hat": p_hat,
                                          "bracket": list(b.bracket), "replicas": replicas}

    return _timed(8, "pseudo-critical edge probability near 1/2 (Z^2, n=32)", body)


# 9 ---------------------------------------------------------------------------

DETERMINISM_CONFIG = {
    "command": "theta",
    "kernel": {"family": "table", "d": 2, "params": {"nearest_neighbour": 0.5}},
    "n": 8, "replicas": 2000, "seed": 11,
}


def criterion_9(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    from .cli import run_config

    def body():
        docs = []
        for config in (DETERMINISM_CONFIG, {**DETERMINISM_CONFIG, "command": "couple",
                                            "kernel_prime": {"family": "table", "d": 2,
                                                             "params": {"nearest_neighbour": 0.5},
                                                             "overrides": [{"displacement": [1, 0],
                                                                            "value": 0.2}]},
                                            "replicas": 200}):
            a, _ = run_config(dict(config), timing=False)
            b, _ = run_config(dict(config), timing=False)
            docs.append((json.dumps(a, sort_keys=True), json.dumps(b, sort_keys=True),
                         a["config_digest"]))
        ok = all(x == y for x, y, _ in docs)
        return ok, {"digests": [d for _, _, d in docs], "identical": ok}

    return _timed(9, "identical config digests give identical documents", body)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 10)}


def run_suite(numbers=None, scale: float = 1.0, seed0: int = 0, echo=None) -> list:
    out = []
    for i in numbers or sorted(CRITERIA):
        res = CRITERIA[i](scale=scale, seed0=seed0)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
