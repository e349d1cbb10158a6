"""Tangent-space projections, spectra, Taylor-ESS test and rest-point classification."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import policy_field, rest_point_check
from .errors import NotARestPoint, NotSymmetric
from .lyapunov import (  # noqa: F401  re-exported
    LyapunovWeights,
    displayed_square_bound,
    lyapunov_derivative,
    lyapunov_log_value,
    lyapunov_lower_bound,
    lyapunov_weights,
)
from .pricing import Policy

INERTIA_TOL = 1e-9


@dataclass(frozen=True)
class ProjectionBasis:
    Q: np.ndarray
    script_Q: np.ndarray

    @property
    def K(self) -> int:
        return self.Q.shape[0]


def projection_basis(K: int, R: int = 1) -> ProjectionBasis:
    """Identity on the first K-1 paths with a last row of -1s, and its R-fold block diagonal."""
    if K < 2:
        raise ValueError("the tangent space is trivial for fewer than two paths")
    Q = np.vstack([np.eye(K - 1, dtype=np.int64), -np.ones((1, K - 1), dtype=np.int64)])
    return ProjectionBasis(Q, np.kron(np.eye(R, dtype=np.int64), Q))


def projected_symmetric_part(M, basis: ProjectionBasis) -> np.ndarray:
    """``Q' ((M + M') / 2) Q`` with the block-diagonal basis."""
    M = np.asarray(M)
    sym = (M + M.T) / 2
    return basis.script_Q.T @ sym @ basis.script_Q


@dataclass
class SpectrumReport:
    eigenvalues: list
    inertia: dict

    @classmethod
    def from_values(cls, values, tol: float = INERTIA_TOL) -> "SpectrumReport":
        values = sorted(float(v) for v in values)
        inertia = {
            "pos": sum(v > tol for v in values),
            "zero": sum(abs(v) <= tol for v in values),
            "neg": sum(v < -tol for v in values),
        }
        return cls(values, inertia)

    @property
    def mixed(self) -> bool:
        return self.inertia["pos"] > 0 and self.inertia["neg"] > 0

    def to_dict(self) -> dict:
        return {"eigenvalues": self.eigenvalues, "inertia": dict(self.inertia)}


def jacobi_eigenvalues(S, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(S, dtype=float)
    n = a.shape[0]
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    else:
        raise RuntimeError("Jacobi sweeps did not converge")
    return np.sort(np.diag(a))


def symmetric_eigenvalues(S, tol: float = INERTIA_TOL) -> SpectrumReport:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSymmetric("matrix must be square")
    if np.max(np.abs(S - S.T), initial=0.0) > 1e-12:
        raise NotSymmetric("matrix is not symmetric within 1e-12")
    return SpectrumReport.from_values(jacobi_eigenvalues(S), tol)


def group_weight_eigenvalues(thetas) -> list[float]:
    """Closed-form spectrum of ``(theta 1' + 1 theta') / 2``.

    Rank two: ``(sum theta +- sqrt(R) |theta|) / 2`` plus R-2 zeros.  For a
    single group the matrix is just ``[theta_1]``.
    """
    th = [float(t) for t in thetas]
    R = len(th)
    if R == 1:
        return [th[0]]
    total = sum(th)
    root = math.sqrt(R) * math.sqrt(sum(t * t for t in th))
    return [0.5 * (total - root), 0.5 * (total + root)] + [0.0] * (R - 2)


def kronecker_spectrum(thetas, phi, basis: ProjectionBasis | None = None) -> SpectrumReport:
    """Spectrum of the projected welfare Hessian from the Kronecker factorisation.

    Every eigenvalue is a product of an eigenvalue of the group-weight matrix
    with an eigenvalue of ``Q' Phi Q``.
    """
    phi = np.asarray(phi, dtype=float)
    basis = basis or projection_basis(phi.shape[0])
    Q = basis.Q
    path_part = jacobi_eigenvalues(Q.T @ phi @ Q)
    products = [lam * tau for lam in group_weight_eigenvalues(thetas) for tau in path_part]
    return SpectrumReport.from_values(products)


def taylor_ess_check(M, basis: ProjectionBasis) -> dict:
    """Taylor-ESS test for payoffs ``-M z``: projected symmetric part of M positive definite."""
    spectrum = symmetric_eigenvalues(projected_symmetric_part(np.asarray(M, dtype=float), basis))
    is_ess = spectrum.inertia["pos"] == len(spectrum.eigenvalues)
    return {"is_taylor_ess": bool(is_ess), "spectrum": spectrum}


def _eig2(J: np.ndarray) -> list[complex]:
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    disc = cmath.sqrt(tr * tr / 4.0 - det)
    return [tr / 2.0 - disc, tr / 2.0 + disc]


def tangent_jacobian(z, pol: Policy, h_fd: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the replicator field in free coordinates.

    Free coordinates are the first K-1 entries of each group's row; the last
    entry absorbs the remaining group mass.
    """
    z = np.asarray(z, dtype=float)
    R, K = z.shape
    free = [(r, k) for r in range(R) for k in range(K - 1)]
    J = np.zeros((len(free), len(free)))
    for j, (r, k) in enumerate(free):
        bump = np.zeros_like(z)
        bump[r, k] = h_fd
        bump[r, K - 1] = -h_fd
        up = policy_field(z + bump, pol)
        down = policy_field(z - bump, pol)
        J[:, j] = [(up[i] - down[i]) / (2 * h_fd) for i in free]
    return J


def classify_rest_point(z, pol: Policy, h_fd: float = 1e-6, rest_tol: float = 1e-9,
                        tol: float = 1e-8) -> dict:
    """Linear stability class of a rest point from its tangent Jacobian.

    ``attracting`` if every eigenvalue has real part below ``-tol``,
    ``saddle-like`` with real parts of both signs beyond ``tol``,
    ``repelling`` if all exceed ``tol``, otherwise ``degenerate``.
    """
    if not rest_point_check(z, pol, rest_tol):
        raise NotARestPoint(f"replicator field does not vanish at {np.asarray(z).tolist()}")
    J = tangent_jacobian(z, pol, h_fd)
    eig = _eig2(J) if J.shape == (2, 2) else list(np.linalg.eigvals(J))
    real = sorted(float(e.real) for e in eig)
    neg = sum(v < -tol for v in real)
    pos = sum(v > tol for v in real)
    if neg == len(real):
        cls = "attracting"
    elif neg and pos:
        cls = "saddle-like"
    elif pos == len(real):
        cls = "repelling"
    else:
        cls = "degenerate"
    return {"real_parts": real, "class": cls, "jacobian": J}


def tangent_trace(phi) -> float:
    """``trace(Q' Phi Q)``; positive for any overlap matrix with distinct paths."""
    phi = np.asarray(phi)
    K = phi.shape[0]
    return sum(phi[k, k] - phi[k, K - 1] + phi[K - 1, K - 1] - phi[K - 1, k] for k in range(K - 1))
