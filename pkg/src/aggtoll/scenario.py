"""Scenario files: JSON description of network, groups, policy and integrator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dynamics import IntegratorConfig
from .errors import EmptyPathSet, ParseError, ValidationError
from .game import GroupProfile, SolverConfig, check_state
from .network import NetworkSpec, enumerate_paths
from .pricing import PolicyKind

TOP_KEYS = {"name", "network", "groups", "policy", "integrator", "solver", "seed"}
NETWORK_KEYS = {"node_count", "edges", "origin", "destination"}
GROUP_KEYS = {"m", "theta"}
POLICY_KEYS = {"kind", "target", "optimum_index"}
INTEGRATOR_KEYS = {"h", "T", "record_every", "epsilon", "tol"}
SOLVER_KEYS = {"grid_step", "starts", "tol"}


def _number(value, where: str) -> Fraction:
    """Exact rational from a JSON number or a string such as ``"5/12"``."""
    if isinstance(value, bool):
        raise ValidationError("expected a number", where)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not np.isfinite(value):
            raise ValidationError("expected a finite number", where)
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            pass
    raise ValidationError(f"expected a number or rational string, got {value!r}", where)


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"expected an integer, got {value!r}", where)
    return value


def _section(obj, key: str, allowed: set[str], required: bool = True) -> dict:
    if key not in obj:
        if required:
            raise ValidationError("missing section", key)
        return {}
    section = obj[key]
    if not isinstance(section, dict):
        raise ValidationError("expected an object", key)
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ValidationError(f"unknown key(s) {unknown}", key)
    return section


@dataclass
class PolicySpec:
    kind: PolicyKind
    target: list | None = None
    optimum_index: int | None = None


@dataclass
class Scenario:
    network: NetworkSpec
    groups: GroupProfile
    policy: PolicySpec
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    name: str = "scenario"
    # exact rationals as written in the file, used by exact-arithmetic checks
    masses_exact: tuple = ()
    thetas_exact: tuple = ()

    def target_array(self) -> np.ndarray | None:
        if self.policy.target is None:
            return None
        return np.array([[float(v) for v in row] for row in self.policy.target])


def parse_scenario(data) -> Scenario:
    """Validate a decoded JSON object and build a :class:`Scenario`."""
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a JSON object")
    unknown = sorted(set(data) - TOP_KEYS)
    if unknown:
        raise ValidationError(f"unknown key(s) {unknown}", "<root>")

    net = _section(data, "network", NETWORK_KEYS)
    for key in ("node_count", "edges"):
        if key not in net:
            raise ValidationError("missing key", f"network.{key}")
    edges = net["edges"]
    if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 2 for e in edges):
        raise ValidationError("expected a list of [tail, head] pairs", "network.edges")
    node_count = _int(net["node_count"], "network.node_count")
    try:
        network = NetworkSpec(
            node_count,
            tuple((_int(t, f"network.edges[{i}]"), _int(h, f"network.edges[{i}]")) for i, (t, h) in enumerate(edges)),
            _int(net.get("origin", 1), "network.origin"),
            _int(net.get("destination", node_count), "network.destination"),
        )
    except ValidationError as exc:
        if exc.field and not exc.field.startswith("network"):
            raise ValidationError(str(exc).split(": ", 1)[-1], f"network.{exc.field}") from None
        raise

    grp = _section(data, "groups", GROUP_KEYS)
    for key in ("m", "theta"):
        if not isinstance(grp.get(key), list) or not grp[key]:
            raise ValidationError("expected a non-empty list", f"groups.{key}")
    masses = tuple(_number(v, f"groups.m[{i}]") for i, v in enumerate(grp["m"]))
    thetas = tuple(_number(v, f"groups.theta[{i}]") for i, v in enumerate(grp["theta"]))
    if len(masses) != len(thetas):
        raise ValidationError("m and theta must have the same length", "groups")
    if abs(float(sum(masses)) - 1.0) > 1e-12:
        raise ValidationError(f"masses sum to {float(sum(masses))!r}, not 1", "groups.m")
    groups = GroupProfile([float(m) for m in masses], [float(t) for t in thetas])

    pol = _section(data, "policy", POLICY_KEYS)
    if "kind" not in pol:
        raise ValidationError("missing key", "policy.kind")
    try:
        kind = PolicyKind(pol["kind"])
    except ValueError:
        raise ValidationError(f"unknown policy {pol['kind']!r}; expected one of "
                              f"{[k.value for k in PolicyKind]}", "policy.kind") from None
    target = None
    if "target" in pol:
        rows = pol["target"]
        if not isinstance(rows, list) or len(rows) != len(masses) or not all(isinstance(r, list) for r in rows):
            raise ValidationError("expected an R x K nested list", "policy.target")
        target = [[_number(v, f"policy.target[{r}][{k}]") for k, v in enumerate(row)] for r, row in enumerate(rows)]
        try:
            check_state(np.array([[float(v) for v in row] for row in target]), groups.masses)
        except ValidationError as exc:
            raise ValidationError(str(exc), "policy.target") from None
    optimum_index = None
    if "optimum_index" in pol:
        optimum_index = _int(pol["optimum_index"], "policy.optimum_index")
        if optimum_index < 0:
            raise ValidationError("must be nonnegative", "policy.optimum_index")
    if kind is PolicyKind.AGGREGATE_TOLL:
        if target is None and optimum_index is None:
            raise ValidationError("aggregate_toll needs either target or optimum_index", "policy")
        if target is not None and optimum_index is not None:
            raise ValidationError("give target or optimum_index, not both", "policy")
    policy = PolicySpec(kind, target, optimum_index)

    integ = _section(data, "integrator", INTEGRATOR_KEYS, required=False)
    kwargs = {}
    for key in ("h", "T", "epsilon", "tol"):
        if key in integ:
            kwargs[key] = float(_number(integ[key], f"integrator.{key}"))
    if "record_every" in integ:
        kwargs["record_every"] = _int(integ["record_every"], "integrator.record_every")
    integrator = IntegratorConfig(**kwargs)
    try:
        K = len(enumerate_paths(network))
    except EmptyPathSet:
        K = 1  # surfaced by the commands that need paths
    try:
        integrator.check_floor(groups.masses, K)
    except ValidationError as exc:
        raise ValidationError(str(exc).split(": ", 1)[-1], "integrator.epsilon") from None

    seed = _int(data.get("seed", 0), "seed")
    solv = _section(data, "solver", SOLVER_KEYS, required=False)
    solver = SolverConfig(seed=seed)
    if "grid_step" in solv:
        solver.grid_step = float(_number(solv["grid_step"], "solver.grid_step"))
    if "starts" in solv:
        solver.starts = _int(solv["starts"], "solver.starts")
    if "tol" in solv:
        solver.tol = float(_number(solv["tol"], "solver.tol"))

    name = data.get("name", "scenario")
    if not isinstance(name, str):
        raise ValidationError("expected a string", "name")
    return Scenario(network, groups, policy, integrator, solver, seed, name, masses, thetas)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return parse_scenario(data)
