"""Weighted log-share Lyapunov function for the aggregate-based toll.

``W(z) = sum_rk q_r z*_rk ln z_rk`` is the log of the product-form function
``V(z) = prod z_rk ** (q_r z*_rk)``.  Working in log form avoids underflow
near the boundary; W and V rise and fall together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, UnsupportedDimension
from .game import aggregate
from .pricing import Policy, PolicyKind, toll_block


@dataclass(frozen=True)
class LyapunovWeights:
    q: tuple
    delta: object

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.q])


def lyapunov_weights(thetas, pol: Policy) -> LyapunovWeights:
    """Group weights for two groups on two disjoint paths.

    ``delta = sum_t theta_t (psi_t1 + psi_t2)`` and
    ``q = (1, (2 theta_1 + delta) / (2 theta_2 + delta))``.
    """
    if pol.kind is not PolicyKind.AGGREGATE_TOLL:
        raise ValueError("Lyapunov weights are defined for the aggregate-based toll only")
    game = pol.game
    phi = np.asarray(game.phi)
    if game.R != 2 or game.K != 2 or not np.array_equal(phi, np.eye(2, dtype=phi.dtype)):
        raise UnsupportedDimension("Lyapunov weights are only known for R = K = 2 with Phi = I")
    psi = pol.psi
    delta = sum(thetas[t] * (psi[t, 0] + psi[t, 1]) for t in range(2))
    q2 = (2 * thetas[0] + delta) / (2 * thetas[1] + delta)
    one = Fraction(1) if isinstance(q2, Fraction) else 1.0
    return LyapunovWeights((one, q2), delta)


def lyapunov_log_value(z, z_star, weights: LyapunovWeights):
    """``W(z)``; terms with ``z*_rk = 0`` contribute nothing.

    Accepts a single R x K state or a batch of shape (N, R, K).
    """
    z = np.asarray(z, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    coef = weights.as_array()[:, None] * z_star
    active = coef > 0
    used = z[..., active]
    if np.any(used <= 0):
        raise DomainError("W is undefined where z_rk <= 0 on the support of the target")
    return (np.log(used) * coef[active]).sum(axis=-1)


def lyapunov_derivative(z, z_star, weights: LyapunovWeights, pol: Policy):
    """Time derivative of W along the replicator flow under ``pol``.

    ``dW/dt = -sum_r q_r (z*_r - z_r)' B_r x(z)``, i.e. the weighted payoff
    gain of the target over the current state.  Works on batches.
    """
    z = np.asarray(z)
    z_star = np.asarray(z_star)
    exact = z.dtype == object
    if not exact:
        z = z.astype(float)
        z_star = z_star.astype(float)
    x = aggregate(z)
    total = 0
    for r, q_r in enumerate(weights.q):
        block = toll_block(pol, r)
        if not exact:
            block = block.astype(float)
            q_r = float(q_r)
        load = x @ block.T
        total = total - q_r * ((z_star[r] - z[..., r, :]) * load).sum(axis=-1)
    return total


def lyapunov_lower_bound(z, z_star, weights: LyapunovWeights, thetas):
    """Perfect-square lower bound ``(2 theta_1 + delta) (alpha + beta)^2`` on dW/dt.

    ``alpha = z*_11 - z_11`` and ``beta = z*_21 - z_21``.  With the chosen q_2
    the cross term coefficient is exactly twice ``2 theta_1 + delta``.
    """
    alpha = z_star[0][0] - z[0][0]
    beta = z_star[1][0] - z[1][0]
    return (2 * thetas[0] + weights.delta) * (alpha + beta) ** 2


def displayed_square_bound(z, z_star, weights: LyapunovWeights, thetas) -> float:
    """``(sqrt(2 theta_1 + delta) alpha + sqrt(2 q_2 theta_2 + delta) beta)^2`` in floats."""
    alpha = float(z_star[0][0] - z[0][0])
    beta = float(z_star[1][0] - z[1][0])
    d = float(weights.delta)
    q2 = float(weights.q[1])
    return (math.sqrt(2 * float(thetas[0]) + d) * alpha + math.sqrt(2 * q2 * float(thetas[1]) + d) * beta) ** 2
