"""Toll regimes and the payoff operators they induce.

Each policy reduces to a single RK x RK matrix ``M`` so that tolled payoffs
are ``-M z`` (minus travel cost minus toll):

* no toll:             M = A
* adaptive Pigouvian:  M = A + A'
* aggregate-based:     M = A + J_R kron (sum_r theta_r Phi Psi_r)

Tolls are per-path K-vectors, identical for every group on a path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ValidationError
from .game import Game, aggregate, check_state, linear_payoffs


class PolicyKind(str, Enum):
    NONE = "none"
    ADAPTIVE_PIGOUVIAN = "adaptive_pigouvian"
    AGGREGATE_TOLL = "aggregate_toll"


def mix_matrix(z_star, masses) -> np.ndarray:
    """Group shares of each path at the target, ``psi_rk = z*_rk / x*_k``.

    Paths unused at the target fall back to the population shares ``m_r``.
    """
    z_star = np.asarray(z_star)
    masses = np.asarray(masses)
    x_star = aggregate(z_star)
    psi = np.empty(z_star.shape, dtype=np.result_type(z_star.dtype, masses.dtype, float)
                   if z_star.dtype != object else object)
    for k in range(z_star.shape[1]):
        for r in range(z_star.shape[0]):
            psi[r, k] = z_star[r, k] / x_star[k] if x_star[k] > 0 else masses[r]
    return psi


def stacked_mix(psi) -> np.ndarray:
    """RK x K block column of ``diag(psi_r.)``; maps an aggregate state to the imputed z."""
    psi = np.asarray(psi)
    R, K = psi.shape
    out = np.zeros((R * K, K), dtype=psi.dtype)
    for r in range(R):
        for k in range(K):
            out[r * K + k, k] = psi[r, k]
    return out


def _weighted_mix(game: Game, psi) -> np.ndarray:
    """``sum_s theta_s psi_s.`` as a K-vector."""
    psi = np.asarray(psi)
    return sum(game.thetas[s] * psi[s] for s in range(game.R))


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    game: Game = field(repr=False)
    operator: np.ndarray = field(repr=False)
    target: np.ndarray | None = None
    psi: np.ndarray | None = None

    @classmethod
    def no_toll(cls, game: Game) -> "Policy":
        return cls(PolicyKind.NONE, game, game.A)

    @classmethod
    def adaptive_pigouvian(cls, game: Game) -> "Policy":
        return cls(PolicyKind.ADAPTIVE_PIGOUVIAN, game, game.A + game.A.T)

    @classmethod
    def aggregate_toll(cls, game: Game, target) -> "Policy":
        target = np.asarray(target)
        try:
            target = check_state(target, game.masses)
        except ValidationError as exc:
            raise ValidationError(f"target is not a population state: {exc}", "policy.target") from None
        if target.shape[1] != game.K:
            raise ValidationError(f"target has {target.shape[1]} paths, game has {game.K}", "policy.target")
        psi = mix_matrix(target, game.masses)
        phi = game.phi
        common = phi * _weighted_mix(game, psi)[None, :]  # Phi diag(sum_s theta_s psi_s)
        ones = np.ones((game.R, game.R), dtype=np.int64)
        operator = game.A + np.kron(ones, common)
        return cls(PolicyKind.AGGREGATE_TOLL, game, operator, target, psi)

    @classmethod
    def from_kind(cls, kind, game: Game, target=None) -> "Policy":
        kind = PolicyKind(kind)
        if kind is PolicyKind.NONE:
            return cls.no_toll(game)
        if kind is PolicyKind.ADAPTIVE_PIGOUVIAN:
            return cls.adaptive_pigouvian(game)
        if target is None:
            raise ValidationError("aggregate_toll needs a target state", "policy")
        return cls.aggregate_toll(game, target)

    def payoffs(self, z) -> np.ndarray:
        return policy_payoffs(z, self)

    def toll(self, z) -> np.ndarray:
        """Per-path charge at population state ``z`` (zeros without a toll)."""
        z = np.asarray(z)
        if self.kind is PolicyKind.NONE:
            return np.zeros(z.shape[:-2] + (self.game.K,))
        if self.kind is PolicyKind.ADAPTIVE_PIGOUVIAN:
            return adaptive_pigouvian_toll(z, self.game)
        return aggregate_toll(aggregate(z), self)


def adaptive_pigouvian_toll(z, game: Game) -> np.ndarray:
    """Current marginal external cost ``Phi sum_s theta_s z_s``, common to all groups."""
    z = np.asarray(z)
    thetas = np.asarray(game.thetas)
    weighted = (thetas[:, None] * z).sum(axis=-2) if z.dtype != object else sum(thetas[s] * z[s] for s in range(game.R))
    return weighted @ np.asarray(game.phi).T


def aggregate_toll(x, pol: Policy) -> np.ndarray:
    """Aggregate-based toll ``Phi sum_s theta_s diag(psi_s) x`` from path totals only."""
    if pol.kind is not PolicyKind.AGGREGATE_TOLL:
        raise ValueError("aggregate_toll requires an aggregate-toll policy")
    x = np.asarray(x)
    return (_weighted_mix(pol.game, pol.psi) * x) @ np.asarray(pol.game.phi).T


def policy_payoffs(z, pol: Policy) -> np.ndarray:
    """Payoffs under ``pol``: minus travel cost minus toll."""
    return linear_payoffs(z, pol.operator)


def toll_block(pol: Policy, r: int) -> np.ndarray:
    """K x K block ``B_r`` with ``A^tau_r z = B_r x(z)`` for every state z."""
    if pol.kind is not PolicyKind.AGGREGATE_TOLL:
        raise ValueError("toll_block requires an aggregate-toll policy")
    game = pol.game
    phi = np.asarray(game.phi)
    return game.thetas[r] * phi + phi * _weighted_mix(game, pol.psi)[None, :]
