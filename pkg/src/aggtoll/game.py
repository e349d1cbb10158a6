"""Heterogeneous congestion game: payoffs, welfare, equilibria, social optimum.

States are R x K arrays (group r, path k).  When a flat vector is needed the
state is stacked group-major, ``z.reshape(-1) == (z_1; ...; z_R)``, and every
matrix in the package uses that convention.

Functions avoid forcing a float dtype so that object arrays of
``fractions.Fraction`` pass through unchanged and give exact results.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SolverDidNotConverge, UnsupportedDimension, ValidationError
from .network import NetworkSpec, enumerate_paths, incidence_matrix, overlap_matrix

log = logging.getLogger(__name__)

MASS_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GroupProfile:
    masses: np.ndarray
    thetas: np.ndarray

    def __post_init__(self):
        masses = _frozen(self.masses)
        thetas = _frozen(self.thetas)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "thetas", thetas)
        if masses.ndim != 1 or masses.shape != thetas.shape or masses.size == 0:
            raise ValidationError("masses and thetas must be non-empty vectors of equal length", "groups")
        if any(m <= 0 for m in masses):
            raise ValidationError("group masses must be positive", "groups.m")
        if any(t <= 0 for t in thetas):
            raise ValidationError("values of time must be positive", "groups.theta")
        if abs(sum(masses) - 1) > MASS_TOL:
            raise ValidationError(f"group masses sum to {float(sum(masses))!r}, not 1", "groups.m")

    @property
    def size(self) -> int:
        return self.masses.shape[0]


def cost_matrix(thetas, phi) -> np.ndarray:
    """RK x RK matrix ``(theta 1') kron Phi``; block (r, s) is ``theta_r * Phi``."""
    thetas = np.asarray(thetas)
    ones = np.ones(thetas.shape[0], dtype=np.int64)
    return np.kron(np.outer(thetas, ones), np.asarray(phi))


@dataclass(frozen=True)
class Game:
    """Group profile plus path-overlap structure, with the assembled cost matrix."""

    groups: GroupProfile
    phi: np.ndarray
    A: np.ndarray = field(init=False, repr=False)
    paths: tuple = ()

    def __post_init__(self):
        phi = _frozen(self.phi)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
            raise ValidationError("overlap matrix must be square", "phi")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "A", _frozen(cost_matrix(self.groups.thetas, phi)))

    @classmethod
    def from_network(cls, net: NetworkSpec, groups: GroupProfile) -> "Game":
        paths = enumerate_paths(net)
        phi = overlap_matrix(incidence_matrix(net, paths))
        return cls(groups, phi, paths=paths)

    @property
    def R(self) -> int:
        return self.groups.size

    @property
    def K(self) -> int:
        return self.phi.shape[0]

    @property
    def masses(self) -> np.ndarray:
        return self.groups.masses

    @property
    def thetas(self) -> np.ndarray:
        return self.groups.thetas

    def uniform_state(self) -> np.ndarray:
        return np.outer(self.masses.astype(float), np.full(self.K, 1.0 / self.K))


def check_state(z, masses, tol: float = 1e-9) -> np.ndarray:
    """Return ``z`` as an R x K array after checking nonnegativity and row sums."""
    z = np.asarray(z)
    masses = np.asarray(masses)
    if z.ndim == 1:
        if z.size % masses.size:
            raise ValidationError(f"state of length {z.size} does not split into {masses.size} groups")
        z = z.reshape(masses.size, -1)
    if z.shape[0] != masses.size:
        raise ValidationError(f"state has {z.shape[0]} rows, expected {masses.size}")
    if any(v < -tol for v in z.ravel()):
        raise ValidationError("state has negative entries")
    for r, row in enumerate(z):
        if abs(sum(row) - masses[r]) > tol:
            raise ValidationError(f"row {r} sums to {float(sum(row))!r}, expected {float(masses[r])!r}")
    return z


def aggregate(z) -> np.ndarray:
    """Per-path totals ``x_k = sum_r z_rk``; works on batches of shape (..., R, K)."""
    return np.asarray(z).sum(axis=-2)


def linear_payoffs(z, M) -> np.ndarray:
    """Payoffs ``-M z`` on the flattened state, returned in the shape of ``z``."""
    z = np.asarray(z)
    flat = z.reshape(*z.shape[:-2], -1)
    return -(flat @ np.asarray(M).T).reshape(z.shape)


def base_payoffs(z, A) -> np.ndarray:
    """Untolled payoffs ``v = -A z`` (minus travel cost)."""
    return linear_payoffs(z, A)


def social_welfare(z, A):
    """Total payoff ``-z' A z``; batches of shape (..., R, K) give an array."""
    z = np.asarray(z)
    flat = z.reshape(*z.shape[:-2], -1)
    A = np.asarray(A)
    if flat.dtype == object or A.dtype == object:
        return -(flat @ A @ flat)
    return -np.einsum("...i,ij,...j->...", flat, A, flat)


@dataclass
class NashReport:
    is_nash: bool
    worst_violation: float
    per_group: list


def nash_check(z, payoffs, tol: float = 1e-8) -> NashReport:
    """Best-response test of the equilibrium condition for linear payoffs.

    Every path carrying more than ``tol`` mass of group r must earn within
    ``tol`` of the best payoff available to group r.
    """
    z = np.asarray(z)
    payoffs = np.asarray(payoffs)
    worst = 0
    per_group = []
    for r in range(z.shape[0]):
        best = max(payoffs[r])
        gaps = [best - payoffs[r, k] for k in range(z.shape[1]) if z[r, k] > tol]
        group_worst = max(gaps) if gaps else 0
        per_group.append({"group": r, "best_payoff": best, "worst_gap": group_worst})
        worst = max(worst, group_worst)
    return NashReport(bool(worst <= tol), worst, per_group)


def project_to_simplex(v: np.ndarray, mass: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{z >= 0, sum z = mass}``."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - mass
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    shift = css[rho] / (rho + 1)
    return np.maximum(v - shift, 0.0)


def project_state(z: np.ndarray, masses) -> np.ndarray:
    return np.vstack([project_to_simplex(row, m) for row, m in zip(z, masses)])


def support_equilibria(M, masses, tol: float = 1e-10) -> list[np.ndarray]:
    """Isolated Nash equilibria of the linear game with payoffs ``-M z``.

    Enumerates every combination of per-group supports and solves the square
    system "equal payoff on the support, zero mass off it, row sums fixed".
    Supports whose system is singular (a continuum of equilibria) are skipped.
    """
    M = np.asarray(M, dtype=float)
    masses = np.asarray(masses, dtype=float)
    R = masses.size
    K = M.shape[0] // R
    subsets = [s for n in range(1, K + 1) for s in itertools.combinations(range(K), n)]
    if len(subsets) ** R > 200_000:
        raise UnsupportedDimension(f"support enumeration too large for R={R}, K={K}")
    n = R * K
    found: list[np.ndarray] = []
    for supports in itertools.product(subsets, repeat=R):
        lhs = np.zeros((n + R, n + R))
        rhs = np.zeros(n + R)
        for r, support in enumerate(supports):
            for k in range(K):
                i = r * K + k
                if k in support:
                    # -M_i z - u_r = 0
                    lhs[i, :n] = -M[i]
                    lhs[i, n + r] = -1.0
                else:
                    lhs[i, i] = 1.0
            lhs[n + r, r * K:(r + 1) * K] = 1.0
            rhs[n + r] = masses[r]
        if np.linalg.matrix_rank(lhs, tol=1e-10) < n + R:
            continue
        sol = np.linalg.solve(lhs, rhs)
        z = sol[:n].reshape(R, K)
        if z.min() < -tol:
            continue
        z = np.maximum(z, 0.0)
        v = linear_payoffs(z, M)
        if not nash_check(z, v, tol=1e-9).is_nash:
            continue
        if not any(np.max(np.abs(z - other)) < 1e-9 for other in found):
            found.append(z)
    found.sort(key=lambda s: tuple(s.ravel()))
    return found


@dataclass
class SolverConfig:
    grid_step: float = 1e-3
    starts: int = 64
    tol: float = 1e-12
    keep_tol: float = 1e-9
    cluster_tol: float = 1e-6
    max_iter: int = 200_000
    seed: int = 0


@dataclass
class OptimumResult:
    z_star: np.ndarray
    sw_star: float
    optima: list = field(default_factory=list)
    sw_values: list = field(default_factory=list)


def _polish(z: np.ndarray, A: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Solve the KKT system on the support of ``z`` exactly; keep ``z`` if that fails."""
    M = A + A.T
    R, K = z.shape
    n = R * K
    lhs = np.zeros((n + R, n + R))
    rhs = np.zeros(n + R)
    for r in range(R):
        for k in range(K):
            i = r * K + k
            if z[r, k] > 1e-9:
                lhs[i, :n] = -M[i]
                lhs[i, n + r] = -1.0
            else:
                lhs[i, i] = 1.0
        lhs[n + r, r * K:(r + 1) * K] = 1.0
        rhs[n + r] = masses[r]
    if np.linalg.matrix_rank(lhs, tol=1e-10) < n + R:
        return z
    cand = np.linalg.solve(lhs, rhs)[:n].reshape(R, K)
    if cand.min() < -1e-12 or np.max(np.abs(cand - z)) > 1e-6:
        return z
    return np.maximum(cand, 0.0)


def gradient_ascent(z0: np.ndarray, A: np.ndarray, masses: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Projected gradient ascent of ``-z'Az`` over the product of group simplices."""
    M = A + A.T
    step = 1.0 / max(np.linalg.norm(M, 2), 1e-12)
    z = project_state(np.array(z0, dtype=float), masses)
    for _ in range(cfg.max_iter):
        grad = linear_payoffs(z, M)
        nxt = project_state(z + step * grad, masses)
        if np.max(np.abs(nxt - z)) < cfg.tol:
            return _polish(nxt, A, masses)
        z = nxt
    raise SolverDidNotConverge(f"projected gradient ascent did not settle within {cfg.max_iter} iterations")


def _grid_candidates(A: np.ndarray, masses: np.ndarray, step: float) -> list[np.ndarray]:
    """Local maxima of SW over a dense grid of the free coordinates (R = K = 2)."""
    a = np.linspace(0.0, masses[0], int(round(masses[0] / step)) + 1)
    b = np.linspace(0.0, masses[1], int(round(masses[1] / step)) + 1)
    za, zb = np.meshgrid(a, b, indexing="ij")
    states = np.stack([np.stack([za, masses[0] - za], -1), np.stack([zb, masses[1] - zb], -1)], -2)
    sw = social_welfare(states, A)
    padded = np.pad(sw, 1, constant_values=-np.inf)
    is_max = np.ones_like(sw, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                neighbour = padded[1 + di:1 + di + sw.shape[0], 1 + dj:1 + dj + sw.shape[1]]
                is_max &= sw >= neighbour
    return [states[i, j] for i, j in zip(*np.nonzero(is_max))]


def social_optimum(game: Game, cfg: SolverConfig | None = None) -> OptimumResult:
    """Maximise social welfare; returns every distinct global maximiser found.

    Welfare is indefinite in general, so ascent runs from many starts: the
    uniform state, every vertex of Z, seeded random interior points and, for
    two groups on two paths, each local maximum of a dense grid scan.
    """
    cfg = cfg or SolverConfig()
    A = np.asarray(game.A, dtype=float)
    masses = np.asarray(game.masses, dtype=float)
    R, K = game.R, game.K
    rng = np.random.default_rng(cfg.seed)

    starts = [game.uniform_state()]
    if K ** R <= 4096:
        for choice in itertools.product(range(K), repeat=R):
            vertex = np.zeros((R, K))
            vertex[np.arange(R), choice] = masses
            starts.append(vertex)
    for _ in range(cfg.starts):
        starts.append(rng.dirichlet(np.ones(K), size=R) * masses[:, None])
    if R == 2 and K == 2:
        starts.extend(_grid_candidates(A, masses, cfg.grid_step))

    refined = [gradient_ascent(s, A, masses, cfg) for s in starts]
    values = np.array([social_welfare(z, A) for z in refined])
    best = values.max()
    optima: list[np.ndarray] = []
    for idx in np.argsort(-values, kind="stable"):
        if values[idx] < best - cfg.keep_tol:
            break
        z = refined[idx]
        if not any(np.max(np.abs(z - o)) < cfg.cluster_tol for o in optima):
            optima.append(z)
    optima.sort(key=lambda s: tuple(s.ravel()))
    sw_values = [float(social_welfare(z, A)) for z in optima]
    log.debug("social optimum: %d distinct maximiser(s), sw*=%r", len(optima), float(best))
    return OptimumResult(optima[0], float(best), optima, sw_values)


def total_payoff(z, payoffs):
    """``sum_rk z_rk v_rk``; equals social welfare when ``payoffs`` are untolled."""
    return (np.asarray(z) * np.asarray(payoffs)).sum()


def grid_states(masses: Sequence[float], n: int, inset: float = 0.0) -> np.ndarray:
    """n x n grid of R = K = 2 states over the free coordinates (z_11, z_21).

    Returns an array of shape (n*n, 2, 2), ordered with z_11 varying slowest.
    """
    m1, m2 = float(masses[0]), float(masses[1])
    a = np.linspace(inset, m1 - inset, n)
    b = np.linspace(inset, m2 - inset, n)
    za, zb = np.meshgrid(a, b, indexing="ij")
    za, zb = za.ravel(), zb.ravel()
    return np.stack([np.stack([za, m1 - za], -1), np.stack([zb, m2 - zb], -1)], -2)
