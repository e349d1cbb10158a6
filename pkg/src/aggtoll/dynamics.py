"""Replicator dynamics: vector field, fixed-step RK4 integration, sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import StateDrift, UnsupportedDimension, ValidationError
from .game import grid_states, linear_payoffs, social_welfare
from .lyapunov import LyapunovWeights, lyapunov_log_value
from .pricing import Policy, toll_block

log = logging.getLogger(__name__)

DRIFT_LIMIT = 1e-9


@dataclass
class IntegratorConfig:
    h: float = 0.01
    T: float = 2000.0
    record_every: int = 100
    epsilon: float = 1e-3
    tol: float = 1e-3

    def __post_init__(self):
        if not self.h > 0:
            raise ValidationError("step must be positive", "integrator.h")
        if not self.T > 0:
            raise ValidationError("horizon must be positive", "integrator.T")
        if int(self.record_every) < 1:
            raise ValidationError("record_every must be >= 1", "integrator.record_every")
        if not self.tol > 0:
            raise ValidationError("tol must be positive", "integrator.tol")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.h))

    def check_floor(self, masses, K: int) -> None:
        bound = float(np.min(masses)) / K
        if not 0 < self.epsilon < bound:
            raise ValidationError(f"epsilon must lie in (0, {bound!r})", "integrator.epsilon")


def replicator_rhs(z, payoffs, masses) -> np.ndarray:
    """``dz_rk = z_rk (v_rk - mean payoff of group r)``; batches of shape (..., R, K) allowed."""
    z = np.asarray(z)
    payoffs = np.asarray(payoffs)
    masses = np.asarray(masses)
    if z.dtype == object:
        out = np.empty(z.shape, dtype=object)
        for r in range(z.shape[0]):
            mean = sum(z[r, k] * payoffs[r, k] for k in range(z.shape[1])) / masses[r]
            for k in range(z.shape[1]):
                out[r, k] = z[r, k] * (payoffs[r, k] - mean)
        return out
    mean = (z * payoffs).sum(axis=-1, keepdims=True) / masses[:, None]
    return z * (payoffs - mean)


def policy_field(z, pol: Policy) -> np.ndarray:
    """Replicator velocity at ``z`` under the payoffs induced by ``pol``."""
    return replicator_rhs(z, linear_payoffs(z, pol.operator), pol.game.masses)


def rest_point_check(z, pol: Policy, tol: float = 1e-9) -> bool:
    return bool(np.max(np.abs(policy_field(np.asarray(z, dtype=float), pol))) <= tol)


def rk4_step(z: np.ndarray, M: np.ndarray, masses: np.ndarray, h: float) -> np.ndarray:
    def f(s):
        return replicator_rhs(s, linear_payoffs(s, M), masses)

    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class Monitor:
    """Worst-case statistics gathered over every step of a (batched) run.

    Arrays are per trajectory.  ``sw_min_increment`` is the smallest one-step
    change of social welfare; ``w_min_increment`` and ``w_fd_error`` are only
    filled when Lyapunov tracking is on.
    """

    max_drift: np.ndarray
    min_coordinate: np.ndarray
    sw_min_increment: np.ndarray
    w_min_increment: np.ndarray | None = None
    w_fd_error: np.ndarray | None = None


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    sw: np.ndarray
    tolls: np.ndarray
    lyapunov: np.ndarray | None
    monitor: Monitor = field(repr=False, default=None)

    @property
    def final(self) -> np.ndarray:
        return self.z[-1]


class _FlatKernel:
    """Precomputed matrices for batched work on flat (N, RK) states."""

    def __init__(self, pol: Policy, weights: LyapunovWeights | None):
        game = pol.game
        R, K = game.R, game.K
        self.masses = np.asarray(game.masses, dtype=float)
        self.M_t = np.asarray(pol.operator, dtype=float).T
        self.A = np.asarray(game.A, dtype=float)
        # group-indicator (RK x R) and per-coordinate group mean operator
        self.S = np.kron(np.eye(R), np.ones((K, 1)))
        self.G = np.kron(np.diag(1.0 / self.masses), np.ones((K, K)))
        self.mass_flat = np.repeat(self.masses, K)
        self.track = weights is not None
        if self.track:
            z_star = np.asarray(pol.target, dtype=float).ravel()
            coef = np.repeat(weights.as_array(), K) * z_star
            self.active = np.nonzero(coef > 0)[0]
            self.coef = coef[self.active]
            self.z_star = z_star
            # x(z) = z @ X ; rate = -sum_r q_r (z*_r - z_r) . B_r x
            self.X = np.kron(np.ones((R, 1)), np.eye(K))
            q = weights.as_array()
            self.B_t = np.hstack([q[r] * np.asarray(toll_block(pol, r), dtype=float).T for r in range(R)])

    def field(self, z):
        v = -(z @ self.M_t)
        return z * (v - (z * v) @ self.G)

    def step(self, z, h):
        k1 = self.field(z)
        k2 = self.field(z + 0.5 * h * k1)
        k3 = self.field(z + 0.5 * h * k2)
        k4 = self.field(z + h * k3)
        return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def sw(self, z):
        return -np.einsum("ij,ij->i", z @ self.A, z)

    def w(self, z):
        return np.log(z[:, self.active]) @ self.coef

    def w_rate(self, z):
        loads = (z @ self.X) @ self.B_t
        return -np.einsum("ij,ij->i", self.z_star - z, loads)


def run_batch(z0, pol: Policy, cfg: IntegratorConfig, weights: LyapunovWeights | None = None,
              record: bool = False):
    """Integrate a batch of initial states side by side.

    Returns ``(final_states, monitor, records)``; ``records`` is a list of
    ``(t, states)`` snapshots every ``cfg.record_every`` steps when ``record``
    is set.  With ``weights`` the Lyapunov value is checked at every step:
    its one-step increments and the gap between the analytic rate and a
    fourth-order central difference of the recorded values.
    """
    game = pol.game
    R, K = game.R, game.K
    kern = _FlatKernel(pol, weights)
    z = np.array(z0, dtype=float)
    if z.ndim == 2:
        z = z[None]
    n = z.shape[0]
    z = z.reshape(n, R * K)
    h = cfg.h

    max_drift = np.zeros(n)
    min_coord = z.min(axis=1)
    sw_prev = kern.sw(z)
    sw_min = np.full(n, np.inf)
    if kern.track:
        if np.any(z[:, kern.active] <= 0):
            raise ValidationError("Lyapunov tracking needs positive mass on every path the target uses", "z0")
        w_hist = [kern.w(z)]
        rate_hist = [kern.w_rate(z)]
        w_min = np.full(n, np.inf)
        fd_err = np.zeros(n)

    records = [(0.0, z.reshape(n, R, K).copy())] if record else []
    for step in range(1, cfg.steps + 1):
        raw = kern.step(z, h)
        drift = np.abs(raw @ kern.S - kern.masses).max(axis=1)
        if drift.max() > DRIFT_LIMIT:
            raise StateDrift(f"row sums drifted by {drift.max():.3e} in one step")
        np.maximum(max_drift, drift, out=max_drift)
        np.minimum(min_coord, raw.min(axis=1), out=min_coord)
        np.maximum(raw, 0.0, out=raw)
        z = raw * ((kern.masses / (raw @ kern.S)) @ kern.S.T)

        sw = kern.sw(z)
        np.minimum(sw_min, sw - sw_prev, out=sw_min)
        sw_prev = sw
        if kern.track:
            w = kern.w(z)
            np.minimum(w_min, w - w_hist[-1], out=w_min)
            w_hist.append(w)
            rate_hist.append(kern.w_rate(z))
            if len(w_hist) == 5:
                w0, w1, _, w3, w4 = w_hist
                fd = (w0 - 8.0 * w1 + 8.0 * w3 - w4) / (12.0 * h)
                np.maximum(fd_err, np.abs(fd - rate_hist[2]), out=fd_err)
                del w_hist[0], rate_hist[0]
        if record and step % cfg.record_every == 0:
            records.append((step * h, z.reshape(n, R, K).copy()))
    if record and cfg.steps % cfg.record_every:
        records.append((cfg.steps * h, z.reshape(n, R, K).copy()))

    monitor = Monitor(max_drift, min_coord, sw_min,
                      w_min if kern.track else None, fd_err if kern.track else None)
    return z.reshape(n, R, K), monitor, records


def integrate(z0, pol: Policy, cfg: IntegratorConfig | None = None,
              weights: LyapunovWeights | None = None) -> Trajectory:
    """Fixed-step RK4 trajectory from ``z0``, sampled every ``cfg.record_every`` steps.

    After each step negative coordinates are clamped to zero and rows are
    rescaled to the group masses.  Passing ``weights`` (aggregate-toll policy
    only) attaches the log-Lyapunov value to every record.
    """
    cfg = cfg or IntegratorConfig()
    z0 = np.asarray(z0, dtype=float)
    if weights is not None and np.any(z0 < cfg.epsilon):
        raise ValidationError("Lyapunov tracking needs a strictly interior start (all z_rk >= epsilon)", "z0")
    _, monitor, records = run_batch(z0, pol, cfg, weights, record=True)
    t = np.array([r[0] for r in records])
    z = np.stack([r[1][0] for r in records])
    A = np.asarray(pol.game.A, dtype=float)
    sw = social_welfare(z, A)
    tolls = np.asarray(pol.toll(z), dtype=float)
    lyap = None
    if weights is not None:
        lyap = lyapunov_log_value(z, pol.target, weights)
    return Trajectory(t, z, sw, tolls, lyap, monitor)


def vector_field(pol: Policy, z11_values, z21_values) -> np.ndarray:
    """Rows ``(z11, z21, dz11, dz21)`` over a grid of the two free coordinates.

    ``z11`` varies slowest.  Only defined for two groups on two paths.
    """
    game = pol.game
    if game.R != 2 or game.K != 2:
        raise UnsupportedDimension("vector fields are drawn for R = K = 2 only")
    m1, m2 = (float(m) for m in game.masses)
    za, zb = np.meshgrid(np.asarray(z11_values, float), np.asarray(z21_values, float), indexing="ij")
    za, zb = za.ravel(), zb.ravel()
    states = np.stack([np.stack([za, m1 - za], -1), np.stack([zb, m2 - zb], -1)], -2)
    dz = policy_field(states, pol)
    return np.column_stack([za, zb, dz[:, 0, 0], dz[:, 1, 0]])


@dataclass
class SweepResult:
    converged_count: int
    total: int
    starts: np.ndarray
    finals: np.ndarray
    distances: np.ndarray
    failures: list
    monitor: Monitor = field(repr=False, default=None)

    @property
    def converged(self) -> np.ndarray:
        return self.distances < self._tol

    _tol: float = 1e-3


def basin_sweep(starts, pol: Policy, target, cfg: IntegratorConfig | None = None,
                weights: LyapunovWeights | None = None) -> SweepResult:
    """Integrate every start to ``cfg.T`` and count arrivals within ``cfg.tol`` (sup norm) of ``target``."""
    cfg = cfg or IntegratorConfig()
    starts = np.asarray(starts, dtype=float)
    finals, monitor, _ = run_batch(starts, pol, cfg, weights)
    target = np.asarray(target, dtype=float)
    dist = np.abs(finals - target).reshape(len(finals), -1).max(axis=1)
    ok = dist < cfg.tol
    failures = [(int(i), starts[i], finals[i], float(dist[i])) for i in np.nonzero(~ok)[0]]
    log.info("basin sweep: %d/%d starts converged", int(ok.sum()), len(starts))
    return SweepResult(int(ok.sum()), len(starts), starts, finals, dist, failures, monitor, cfg.tol)


def interior_grid(masses, n: int, inset: float) -> np.ndarray:
    """n x n grid of interior starting states inset by ``inset`` from every face."""
    return grid_states(masses, n, inset)
