"""Property and stability checks run by ``aggtoll verify``.

Each check returns ``{"name", "passed", "detail"}``.  Checks that do not
apply to a scenario (wrong size, no aggregate toll) are simply not run.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np

from .analysis import (
    classify_rest_point,
    kronecker_spectrum,
    lyapunov_weights,
    projected_symmetric_part,
    projection_basis,
    symmetric_eigenvalues,
    taylor_ess_check,
    tangent_trace,
)
from .dynamics import IntegratorConfig, basin_sweep, interior_grid, policy_field, run_batch
from .game import Game, aggregate, base_payoffs, grid_states, nash_check, social_welfare, support_equilibria
from .network import NetworkSpec
from .pricing import Policy, aggregate_toll, toll_block

RANDOM_INSTANCES = 100


def _check(name, passed, **detail) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def random_states(rng, masses, K: int, n: int) -> np.ndarray:
    masses = np.asarray(masses, dtype=float)
    return rng.dirichlet(np.ones(K), size=(n, masses.size)) * masses[None, :, None]


def brute_force_paths(net: NetworkSpec, max_edges: int = 8) -> list[tuple[int, ...]] | None:
    """Every ordering of every edge subset that chains origin to destination."""
    L = net.edge_count
    if L > max_edges:
        return None
    out = set()
    for size in range(1, L + 1):
        for combo in itertools.permutations(range(L), size):
            node = net.origin
            ok = True
            for pos, idx in enumerate(combo):
                tail, head = net.edges[idx]
                if tail != node or (node == net.destination and pos > 0):
                    ok = False
                    break
                node = head
            if ok and node == net.destination:
                out.add(combo)
    return sorted(out)


def network_checks(net: NetworkSpec, game: Game) -> list[dict]:
    checks = []
    brute = brute_force_paths(net)
    if brute is not None:
        checks.append(_check("paths_match_brute_force", list(game.paths) == brute, paths=len(brute)))
    edge_sets = [set(p) for p in game.paths]
    pairwise = np.array([[len(a & b) for b in edge_sets] for a in edge_sets])
    checks.append(_check("overlap_matches_pairwise_intersections", np.array_equal(pairwise, game.phi)))
    if game.K >= 2:
        tr = tangent_trace(game.phi)
        checks.append(_check("tangent_trace_positive", tr > 0, trace=float(tr)))
    return checks


def game_checks(game: Game, optima, rng) -> list[dict]:
    checks = []
    A = np.asarray(game.A, dtype=float)
    thetas = np.asarray(game.thetas, dtype=float)
    phi = np.asarray(game.phi, dtype=float)
    states = random_states(rng, game.masses, game.K, RANDOM_INSTANCES)

    mass_err = max(abs(aggregate(z).sum() - 1.0) for z in states)
    checks.append(_check("aggregate_preserves_mass", mass_err < 1e-12, max_error=mass_err))

    blockwise = max(np.max(np.abs(base_payoffs(z, A) + thetas[:, None] * (phi @ aggregate(z))[None, :]))
                    for z in states)
    checks.append(_check("payoffs_match_blockwise_formula", blockwise < 1e-12, max_error=blockwise))

    sw_err = max(abs(social_welfare(z, A) - (z * base_payoffs(z, A)).sum()) for z in states)
    checks.append(_check("welfare_equals_total_payoff", sw_err < 1e-12, max_error=sw_err))

    if game.K >= 2:
        basis = projection_basis(game.K, game.R)
        assembled = symmetric_eigenvalues(projected_symmetric_part(A, basis)).eigenvalues
        kron = kronecker_spectrum(thetas, phi).eigenvalues
        gap = max(abs(a - b) for a, b in zip(assembled, kron))
        checks.append(_check("kronecker_spectrum_matches_jacobi", gap < 1e-9, max_gap=gap, eigenvalues=assembled))

    sw_star = max(float(social_welfare(z, A)) for z in optima)
    if game.R == 2 and game.K == 2:
        probe = grid_states(game.masses, 201)
    else:
        probe = random_states(rng, game.masses, game.K, 2000)
    excess = float(np.max(social_welfare(probe, A)) - sw_star)
    checks.append(_check("optimum_dominates_grid", excess <= 1e-12, max_excess=excess, sw_star=sw_star))
    return checks


def policy_checks(game: Game, aggregate_policy: Policy | None, rng) -> list[dict]:
    checks = []
    thetas = np.asarray(game.thetas, dtype=float)
    phi = np.asarray(game.phi, dtype=float)
    states = random_states(rng, game.masses, game.K, RANDOM_INSTANCES)
    policies = [Policy.adaptive_pigouvian(game)]
    if aggregate_policy is not None:
        policies.append(aggregate_policy)
    for pol in policies:
        worst = 0.0
        for z in states:
            implied = -pol.payoffs(z) - thetas[:, None] * (phi @ aggregate(z))[None, :]
            worst = max(worst, float(np.max(np.abs(implied - pol.toll(z)[None, :]))))
        checks.append(_check(f"uniform_fee_{pol.kind.value}", worst < 1e-12, max_error=worst))
    if aggregate_policy is not None:
        pol = aggregate_policy
        K = game.K
        worst = 0.0
        for z in states:
            x = aggregate(z)
            for r in range(game.R):
                lhs = np.asarray(pol.operator, dtype=float)[r * K:(r + 1) * K] @ z.ravel()
                rhs = np.asarray(toll_block(pol, r), dtype=float) @ x
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        checks.append(_check("block_consistency", worst < 1e-12, max_error=worst))
        target = np.asarray(pol.target, dtype=float)
        report = nash_check(target, pol.payoffs(target), 1e-9)
        checks.append(_check("target_is_equilibrium_under_toll", report.is_nash,
                             worst_violation=float(report.worst_violation)))
        toll_gap = float(np.max(np.abs(aggregate_toll(aggregate(target), pol)
                                       - Policy.adaptive_pigouvian(game).toll(target))))
        checks.append(_check("toll_equals_pigouvian_at_target", toll_gap < 1e-12, max_gap=toll_gap))
    return checks


def dynamics_checks(game: Game, cfg: IntegratorConfig, rng) -> list[dict]:
    """Simplex and face invariance plus welfare monotonicity on random starts."""
    checks = []
    short = IntegratorConfig(h=cfg.h, T=min(cfg.T, 20.0), record_every=cfg.record_every,
                             epsilon=cfg.epsilon, tol=cfg.tol)
    starts = random_states(rng, game.masses, game.K, RANDOM_INSTANCES)
    pig = Policy.adaptive_pigouvian(game)
    for pol in (Policy.no_toll(game), pig):
        _, mon, _ = run_batch(starts, pol, short)
        checks.append(_check(f"simplex_invariance_{pol.kind.value}",
                             mon.max_drift.max() <= 1e-9 and mon.min_coordinate.min() >= -1e-12,
                             max_drift=float(mon.max_drift.max()), min_coordinate=float(mon.min_coordinate.min())))
        if pol is pig:
            checks.append(_check("welfare_monotone_adaptive_pigouvian", mon.sw_min_increment.min() >= -1e-9,
                                 min_increment=float(mon.sw_min_increment.min())))
    if game.K >= 2:
        faces = starts.copy()
        for i, z in enumerate(faces):
            r, k = i % game.R, (i // game.R) % game.K
            z[r, (k + 1) % game.K] += z[r, k]
            z[r, k] = 0.0
        finals, _, _ = run_batch(faces, pig, short)
        leaked = max(float(finals[i][i % game.R, (i // game.R) % game.K]) for i in range(len(faces)))
        checks.append(_check("face_invariance", leaked == 0.0, max_leak=leaked))
    return checks


def kkt_checks(game: Game, optima) -> tuple[list[dict], list[dict]]:
    """Rest points of the adaptive-Pigouvian dynamics and their stability classes."""
    checks = []
    pig = Policy.adaptive_pigouvian(game)
    A = np.asarray(game.A, dtype=float)
    points = []
    for z in support_equilibria(pig.operator, game.masses):
        rest = bool(np.max(np.abs(policy_field(z, pig))) <= 1e-9)
        entry = {"state": z.tolist(), "sw": float(social_welfare(z, A)), "rest_point": rest}
        if rest and game.K >= 2:
            cls = classify_rest_point(z, pig)
            entry["class"] = cls["class"]
            entry["real_parts"] = [float(v) for v in cls["real_parts"]]
        entry["optimal"] = any(np.max(np.abs(z - o)) < 1e-6 for o in optima)
        points.append(entry)
    kkt_ok = all(p["rest_point"] and nash_check(np.array(p["state"]), pig.payoffs(np.array(p["state"])), 1e-9).is_nash
                 for p in points)
    checks.append(_check("kkt_points_are_rest_points", kkt_ok, count=len(points)))
    kkt_optima = all(nash_check(o, pig.payoffs(o), 1e-9).is_nash for o in optima)
    checks.append(_check("optima_are_kkt_points", kkt_optima, optima=len(optima)))
    isolated = all(any(np.max(np.abs(np.array(p["state"]) - o)) < 1e-6 for p in points) for o in optima)
    if game.K >= 2 and isolated:
        # A non-strict optimum (an unused path priced exactly at the used cost)
        # has a zero eigenvalue, so only the absence of unstable directions is checked.
        opt_classes = [p.get("class") for p in points if p["optimal"]]
        stable = all(c in ("attracting", "degenerate") for c in opt_classes) and all(
            max(p["real_parts"]) <= 1e-8 for p in points if p["optimal"])
        checks.append(_check("optima_not_unstable_under_adaptive_pigouvian", stable,
                             classes=opt_classes))
    return checks, points


def nash_set_check(game: Game) -> dict:
    """The untolled Nash set with two disjoint paths is the line z11 + z21 = 1/2."""
    A = np.asarray(game.A, dtype=float)
    m1, m2 = (float(m) for m in game.masses)
    line = [np.array([[a, m1 - a], [0.5 - a, m2 - 0.5 + a]])
            for a in np.linspace(max(0.0, 0.5 - m2), min(m1, 0.5), 101)]
    on_ok = all(nash_check(z, base_payoffs(z, A), 1e-9).is_nash for z in line)
    off = [z for z in grid_states(game.masses, 41) if abs(z[0, 0] + z[1, 0] - 0.5) >= 1e-2]
    off_ok = not any(nash_check(z, base_payoffs(z, A), 1e-9).is_nash for z in off)
    return _check("nash_set_is_half_line", on_ok and off_ok, on_line=len(line), off_line=len(off))


def two_path_checks(game: Game, optima, points, aggregate_policy: Policy | None, cfg: IntegratorConfig,
                    sweeps: bool = True) -> list[dict]:
    """Closed-form and stability checks for two groups on two disjoint paths."""
    checks = []
    t1, t2 = (float(t) for t in game.thetas)
    basis = projection_basis(2, 2)
    A = np.asarray(game.A, dtype=float)

    checks.append(nash_set_check(game))

    spec = symmetric_eigenvalues(projected_symmetric_part(A, basis))
    root = math.sqrt(2) * math.sqrt(t1 * t1 + t2 * t2)
    closed = sorted([t1 + t2 - root, t1 + t2 + root])
    gap = max(abs(a - b) for a, b in zip(spec.eigenvalues, closed))
    checks.append(_check("welfare_hessian_closed_form", gap < 1e-9, eigenvalues=spec.eigenvalues, closed_form=closed))
    pig = Policy.adaptive_pigouvian(game)
    if abs(t1 - t2) > 1e-12:
        saddles = [p for p in points if p.get("class") == "saddle-like"]
        checks.append(_check("welfare_indefinite", spec.mixed, inertia=spec.inertia))
        checks.append(_check("saddle_rest_point_under_adaptive_pigouvian", len(saddles) >= 1,
                             saddles=[p["state"] for p in saddles]))
        if sweeps and len(optima) >= 2:
            starts = interior_grid(game.masses, 21, cfg.epsilon)
            finals, _, _ = run_batch(starts, pig, cfg)
            hits = Counter()
            for f in finals:
                idx = [i for i, o in enumerate(optima) if np.max(np.abs(f - o)) < cfg.tol]
                hits[idx[0] if idx else -1] += 1
            best_single = max(hits[i] for i in range(len(optima)))
            checks.append(_check("adaptive_pigouvian_not_globally_stable",
                                 best_single < len(starts) and sum(hits[i] > 0 for i in range(len(optima))) >= 2,
                                 attractor_counts={str(k): v for k, v in sorted(hits.items())}))
    else:
        checks.append(_check("welfare_concave_on_tangent_space",
                             spec.inertia["neg"] == 0 and spec.inertia["zero"] >= 1, inertia=spec.inertia))

    if aggregate_policy is not None:
        pol = aggregate_policy
        weights = lyapunov_weights(np.asarray(game.thetas, dtype=float), pol)
        delta = float(weights.delta)
        spec_tau = symmetric_eigenvalues(projected_symmetric_part(pol.operator, basis))
        rad = math.sqrt(2 * (t1 * t1 + t2 * t2) + 2 * delta * (t1 + t2) + delta * delta)
        closed = sorted([t1 + t2 + delta - rad, t1 + t2 + delta + rad])
        gap = max(abs(a - b) for a, b in zip(spec_tau.eigenvalues, closed))
        checks.append(_check("toll_hessian_closed_form", gap < 1e-9, eigenvalues=spec_tau.eigenvalues, delta=delta))
        ess = taylor_ess_check(pol.operator, basis)
        checks.append(_check("target_not_taylor_ess", not ess["is_taylor_ess"], inertia=ess["spectrum"].inertia))
        target = np.asarray(pol.target, dtype=float)
        checks.append(_check("target_attracting_under_toll", classify_rest_point(target, pol)["class"] == "attracting"))
        if sweeps:
            starts = interior_grid(game.masses, 21, cfg.epsilon)
            res = basin_sweep(starts, pol, target, cfg, weights)
            mon = res.monitor
            checks.append(_check("aggregate_toll_globally_stable", res.converged_count == res.total,
                                 converged=res.converged_count, total=res.total,
                                 max_distance=float(res.distances.max())))
            checks.append(_check("lyapunov_nondecreasing", mon.w_min_increment.min() >= -1e-9,
                                 min_increment=float(mon.w_min_increment.min())))
            checks.append(_check("lyapunov_rate_matches_finite_difference", mon.w_fd_error.max() <= 1e-6,
                                 max_error=float(mon.w_fd_error.max())))
    return checks


def run_checks(scenario, game: Game, optima, aggregate_policy: Policy | None, sweeps: bool = True) -> list[dict]:
    rng = np.random.default_rng(scenario.seed)
    checks = network_checks(scenario.network, game)
    checks += game_checks(game, optima, rng)
    checks += policy_checks(game, aggregate_policy, rng)
    checks += dynamics_checks(game, scenario.integrator, rng)
    kkt, points = kkt_checks(game, optima)
    checks += kkt
    phi = np.asarray(game.phi)
    if game.R == 2 and game.K == 2 and np.array_equal(phi, np.eye(2, dtype=phi.dtype)):
        checks += two_path_checks(game, optima, points, aggregate_policy, scenario.integrator, sweeps)
    return checks
