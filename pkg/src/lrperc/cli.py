"""``lrperc`` command-line entry point.

Every run is described by one YAML or JSON config document, validated
against :data:`CONFIG_SCHEMA` before anything is computed, and produces one
JSON output document::

    {"schema_version": 1, "command": ..., "config": ..., "config_digest": ...,
     "generator": "philox4x64-10/enc1", "results": ..., "wall_time_s": ...}

Exit status: 0 success, 2 invalid config or kernel, 3 instance too large,
4 bracketing / fit failure, 5 internal-consistency failure, 1 other errors.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import jsonschema
import yaml

from . import __version__
from .errors import PercolationError, ValidationError
from .lattice import (
    DifferenceSet,
    Kernel,
    PolynomialPhiKernel,
    ScaledKernel,
    TableKernel,
    override,
)
from .marks import GENERATOR_VERSION, MarkField, parse_seed
from .montecarlo import set_workers

SCHEMA_VERSION = 1
COMMANDS = ("explore", "bfs", "couple", "enumerate", "theta", "susceptibility", "decay",
            "bisect", "monotonicity", "accept")
ASSERT_LEVELS = ("off", "lemma-checks", "full-trace")

_ENTRY = {
    "type": "object",
    "properties": {
        "displacement": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "value": {"type": "number", "minimum": 0, "maximum": 1},
    },
    "required": ["displacement", "value"],
    "additionalProperties": False,
}

KERNEL_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["table", "polynomial-phi", "product-scaled"]},
        "d": {"type": "integer", "minimum": 1, "maximum": 4},
        "orientation": {"enum": ["undirected", "directed", "oriented"]},
        "params": {"type": "object"},
        "overrides": {"type": "array", "items": _ENTRY},
    },
    "required": ["family", "params"],
    "additionalProperties": False,
}

_TABLE_PARAMS = {
    "type": "object",
    "properties": {
        "entries": {"type": "array", "items": _ENTRY},
        "nearest_neighbour": {"type": "number", "minimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}
_PHI_PARAMS = {
    "type": "object",
    "properties": {"beta": {"type": "number", "minimum": 0},
                   "alpha": {"type": "number", "exclusiveMinimum": 0}},
    "required": ["beta", "alpha"],
    "additionalProperties": False,
}
_SCALED_PARAMS = {
    "type": "object",
    "properties": {"inner": {"type": "object"}, "factor": {"type": "number", "minimum": 0}},
    "required": ["inner", "factor"],
    "additionalProperties": False,
}

_SEED = {"anyOf": [{"type": "integer"}, {"type": "string", "pattern": "^(0[xX][0-9a-fA-F]+|[0-9]+)$"}]}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "kernel": KERNEL_SCHEMA,
        "kernel_prime": KERNEL_SCHEMA,
        "phi": {
            "type": "object",
            "properties": {"d": {"type": "integer", "minimum": 1, "maximum": 4},
                           "entries": {"type": "array", "items": {
                               "type": "object",
                               "properties": {"displacement": {"type": "array",
                                                               "items": {"type": "integer"}},
                                              "value": {"type": "number", "minimum": 0}},
                               "required": ["displacement", "value"],
                               "additionalProperties": False}},
                           "nearest_neighbour": {"type": "number", "minimum": 0}},
            "required": ["d"],
            "additionalProperties": False,
        },
        "n": {"type": "integer", "minimum": 0},
        "n_list": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "replicas": {"type": "integer", "minimum": 1},
        "seed": _SEED,
        "q": {"type": "number", "minimum": 0, "maximum": 1},
        "p": {"type": "number", "minimum": 0, "maximum": 1},
        "mode": {"enum": ["pointwise", "exact_marginal"]},
        "assert": {"enum": list(ASSERT_LEVELS)},
        "stop_at_T": {"type": "boolean"},
        "functional": {"type": "string"},
        "check": {"enum": ["distribution", "domination"]},
        "domination": {"type": "boolean"},
        "target": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "beta_max": {"type": "number", "exclusiveMinimum": 0},
        "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 9}},
        "scale": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "csv": {"type": "string"},
    },
    "required": ["command"],
    "additionalProperties": False,
}

_REQUIRED = {
    "explore": ("kernel", "n"),
    "bfs": ("kernel", "n"),
    "couple": ("kernel", "kernel_prime", "n"),
    "enumerate": ("kernel", "n"),
    "theta": ("kernel", "n", "replicas"),
    "susceptibility": ("kernel", "n", "replicas"),
    "decay": ("kernel", "n_list", "replicas"),
    "bisect": ("phi", "n", "replicas"),
    "monotonicity": ("kernel", "kernel_prime", "n_list", "replicas"),
    "accept": (),
}


def _invalid(msg):
    return ValidationError(msg, module="cli", operation="run_command")


def validate_config(config: dict) -> dict:
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise _invalid(f"config invalid at {path}: {exc.message}") from None
    missing = [k for k in _REQUIRED[config["command"]] if k not in config]
    if missing:
        raise _invalid(f"command {config['command']!r} needs {', '.join(missing)}")
    for key in ("kernel", "kernel_prime"):
        if key in config:
            _validate_kernel(config[key])
    return config


def _validate_kernel(spec: dict):
    family = spec["family"]
    sub = {"table": _TABLE_PARAMS, "polynomial-phi": _PHI_PARAMS,
           "product-scaled": _SCALED_PARAMS}[family]
    try:
        jsonschema.validate(spec["params"], sub)
    except jsonschema.ValidationError as exc:
        raise _invalid(f"kernel params invalid: {exc.message}") from None
    if family == "product-scaled":
        jsonschema.validate(spec["params"]["inner"], KERNEL_SCHEMA)
        _validate_kernel(spec["params"]["inner"])
    elif "d" not in spec:
        raise _invalid(f"kernel family {family!r} needs d")


def _table(entries, d: int) -> dict:
    out = {}
    for entry in entries:
        z = tuple(entry["displacement"])
        if len(z) != d:
            raise _invalid(f"displacement {list(z)} is not in Z^{d}")
        out[z] = float(entry["value"])
    return out


def build_kernel(spec: dict) -> Kernel:
    """Kernel object from a validated kernel spec."""
    family = spec["family"]
    orientation = spec.get("orientation", "undirected")
    directed = orientation != "undirected"
    params = spec["params"]
    if family == "product-scaled":
        K = ScaledKernel(build_kernel(params["inner"]), float(params["factor"]))
    elif family == "polynomial-phi":
        if directed:
            raise _invalid("polynomial-phi kernels are undirected")
        K = PolynomialPhiKernel(spec["d"], float(params["beta"]), float(params["alpha"]))
    else:
        d = spec["d"]
        table = _table(params.get("entries", []), d)
        if "nearest_neighbour" in params:
            p = float(params["nearest_neighbour"])
            for i in range(d):
                for s in (1, -1) if directed else (1,):
                    z = tuple(s if k == i else 0 for k in range(d))
                    table.setdefault(z, p)
        if orientation == "oriented" and any(z[-1] != 1 for z in table):
            raise _invalid("oriented kernels need time coordinate +1 on every displacement")
        K = TableKernel.from_mapping(d, table, directed=directed)
    if spec.get("overrides"):
        K = override(K, _table(spec["overrides"], K.d))
    return K


def _phi_family(spec: dict):
    d = spec["d"]
    table = {}
    for e in spec.get("entries", []):
        table[tuple(e["displacement"])] = float(e["value"])
    if "nearest_neighbour" in spec:
        for i in range(d):
            for s in (1, -1):
                table.setdefault(tuple(s if k == i else 0 for k in range(d)), float(spec["nearest_neighbour"]))
    if not table:
        raise _invalid("phi needs entries or nearest_neighbour")
    from .montecarlo import phi_kernel
    return lambda beta: phi_kernel(table, beta, d)


def config_digest(config: dict) -> str:
    payload = {"config": config, "generator": GENERATOR_VERSION, "schema_version": SCHEMA_VERSION}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _vlist(vs) -> list:
    return [list(v) for v in sorted(vs)]


def _elist(es) -> list:
    return [[list(x), list(y)] for x, y in sorted(es)]


# --- commands -------------------------------------------------------------------


def _delta_and_q(config, J):
    if "kernel_prime" in config:
        Jp = build_kernel(config["kernel_prime"])
        from .coupling import compute_q
        params = compute_q(J, Jp)
        q = config.get("q", params.q)
        return params.delta, q, Jp
    return DifferenceSet.empty(J.directed), config.get("q", 0.0), None


def cmd_explore(config, ctx):
    from .exploration import run, Status

    J = build_kernel(config["kernel"])
    delta, q, _ = _delta_and_q(config, J)
    field = MarkField(ctx["seed"], directed=J.directed)
    res = run(J, delta, q, config["n"], field, assert_level=ctx["assert"],
              stop_at_T=config.get("stop_at_T", False))
    out = {
        "termination": res.termination.value, "stages": res.stages, "q": q,
        "delta": [list(z) for z in delta],
        "vertices": _vlist(res.discovered), "A": _vlist(res.A), "B": _vlist(res.B),
        "cluster_h": _vlist(res.cluster_h()),
        "h_edges": _elist(res.edges_with(Status.OPEN_H)),
        "tagged_edges": _elist(res.tagged_edges),
    }
    if res.trace is not None:
        out["trace"] = res.trace
    return out


def cmd_bfs(config, ctx):
    from .oracle import bfs_cluster

    J = build_kernel(config["kernel"])
    b = bfs_cluster(J, config["n"], MarkField(ctx["seed"], directed=J.directed))
    return {"vertices": _vlist(b.vertices), "open_edges": _elist(b.edges),
            "reaches_T": b.reaches_T}


def cmd_couple(config, ctx):
    from .coupling import compute_q, containment_sweep, domination_report, realize_coupled

    J = build_kernel(config["kernel"])
    Jp = build_kernel(config["kernel_prime"])
    params = compute_q(J, Jp, p=config.get("p"))
    mode = config.get("mode", "pointwise")
    n = config["n"]
    seed = ctx["seed"]
    out = {"params": params.as_dict(), "mode": mode}
    replicas = config.get("replicas", 1)
    if replicas == 1:
        sample = realize_coupled(J, Jp, n, seed, params=params, mode=mode,
                                 assert_level=ctx["assert"])
        out["sample"] = sample.summary()
    else:
        out["containment"] = containment_sweep(J, Jp, n, range(seed, seed + replicas), mode=mode,
                                               params=params, assert_level=ctx["assert"])
    if config.get("domination"):
        out["domination"] = domination_report(J, Jp, n, replicas, seed, params=params).as_dict()
    return out


def cmd_enumerate(config, ctx):
    from .oracle import enumerate_exact, exact_domination_check

    J = build_kernel(config["kernel"])
    Jp = build_kernel(config["kernel_prime"]) if "kernel_prime" in config else None
    if config.get("check") == "domination":
        if Jp is None:
            raise _invalid("domination check needs kernel_prime")
        return exact_domination_check(J, Jp, config["n"], p=config.get("p")).as_dict()
    functional = config.get("functional", "cluster")
    dist = enumerate_exact(J, config["n"], functional, Jp=Jp, p=config.get("p"),
                           q=config.get("q"), mode=config.get("mode", "exact_marginal"))
    return {**dist.as_dict(), "mean": dist.mean(), "total": dist.total()}


def cmd_theta(config, ctx):
    from .montecarlo import estimate_theta

    J = build_kernel(config["kernel"])
    return estimate_theta(J, config["n"], config["replicas"], ctx["seed"]).as_dict()


def cmd_susceptibility(config, ctx):
    from .montecarlo import estimate_susceptibility

    J = build_kernel(config["kernel"])
    return estimate_susceptibility(J, config["n"], config["replicas"], ctx["seed"]).as_dict()


def cmd_decay(config, ctx):
    from .montecarlo import estimate_decay

    J = build_kernel(config["kernel"])
    fit = estimate_decay(J, config["n_list"], config["replicas"], ctx["seed"])
    if "csv" in config:
        with open(config["csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "theta", "stderr"])
            w.writerows(fit.points)
    return fit.as_dict()


def cmd_bisect(config, ctx):
    from .montecarlo import bisect_beta_c

    family = _phi_family(config["phi"])
    b = bisect_beta_c(family, config["n"], config["replicas"],
                      theta_target=config.get("target", 0.5), tol=config.get("tol", 1e-3),
                      beta_max=config.get("beta_max", 10.0), seed0=ctx["seed"])
    if "csv" in config:
        with open(config["csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["beta", "theta", "stderr"])
            w.writerows(b.evaluations)
    return b.as_dict()


def cmd_monotonicity(config, ctx):
    from .montecarlo import monotonicity_experiment

    J = build_kernel(config["kernel"])
    Jp = build_kernel(config["kernel_prime"])
    rep = monotonicity_experiment(J, Jp, config["n_list"], config["replicas"], ctx["seed"],
                                  target=config.get("target", 0.5), tol=config.get("tol", 1e-3))
    return rep.as_dict()


def cmd_accept(config, ctx):
    from .acceptance import run_suite

    echo = ctx.get("echo")
    results = run_suite(config.get("criteria"), scale=config.get("scale", 1.0),
                        seed0=ctx["seed"], echo=echo)
    return {"criteria": [r.as_dict() for r in results],
            "all_passed": all(r.passed for r in results)}


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def run_config(config: dict, *, timing: bool = True, echo=None) -> tuple[dict, int]:
    """Validate and execute a config; returns ``(document, exit status)``."""
    t0 = time.perf_counter()
    config = copy.deepcopy(config)
    doc = {"schema_version": SCHEMA_VERSION, "generator": GENERATOR_VERSION,
           "package_version": __version__}
    try:
        validate_config(config)
        if "seed" in config:
            config["seed"] = parse_seed(config["seed"])
        doc["command"] = config["command"]
        doc["config"] = config
        doc["config_digest"] = config_digest(config)
        ctx = {"seed": config.get("seed", 0), "assert": config.get("assert", "off"),
               "echo": echo}
        doc["results"] = HANDLERS[config["command"]](config, ctx)
        status = 0
        if config["command"] == "accept" and not doc["results"]["all_passed"]:
            status = 1
    except PercolationError as exc:
        doc["error"] = {"type": type(exc).__name__, "module": exc.module,
                        "operation": exc.operation, "message": str(exc)}
        status = exc.exit_code
    if timing:
        doc["wall_time_s"] = time.perf_counter() - t0
    return doc, status


def load_config(path: str) -> dict:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise _invalid(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise _invalid(f"{path} does not contain a mapping")
    return data


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lrperc", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", nargs="?", choices=COMMANDS,
                    help="operation to run (overrides the config's 'command')")
    ap.add_argument("--config", metavar="PATH", help="YAML or JSON experiment config")
    ap.add_argument("--seed", help="seed override, decimal or 0x-hex")
    ap.add_argument("--workers", type=int, default=1,
                    help="threads splitting replica ranges; results do not depend on it (default 1)")
    ap.add_argument("--assert", dest="assert_level", choices=ASSERT_LEVELS,
                    help="runtime check level for explorations")
    ap.add_argument("--out", metavar="PATH", help="write the output document here (default stdout)")
    ap.add_argument("--no-timing", action="store_true",
                    help="omit wall_time_s so documents are byte-reproducible")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("--workers must be >= 1", file=sys.stderr)
        return 2
    set_workers(args.workers)
    try:
        config = load_config(args.config) if args.config else {}
    except (OSError, PercolationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command:
        config["command"] = args.command
    elif "command" not in config:
        print("error: no command given (positional argument or 'command' in the config)",
              file=sys.stderr)
        return 2
    if args.seed is not None:
        config["seed"] = args.seed
    if args.assert_level:
        config["assert"] = args.assert_level
    echo = (lambda line: print(line, file=sys.stderr)) if config.get("command") == "accept" else None
    doc, status = run_config(config, timing=not args.no_timing, echo=echo)
    text = json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if "error" in doc:
        print(f"error: {doc['error']['message']}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
