"""Distributionally robust mixing weights over clients.

The server maximizes ``sum_k lam_k f_k - q * KL(lam || p)`` over the
probability simplex by projected gradient ascent, where ``p`` is the
topological prior. ``q = 0`` recovers the plain worst-case (DRFL) ascent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# points this close to the simplex are treated as already on it, which keeps
# the projection exactly idempotent under float round-off
SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class DualConfig:
    """Hyperparameters of the mixing-weight ascent.

    The ascent is only stable when ``eta_lambda * q < 2 * min(p)``: the
    regularizer has curvature ``q / lam_k`` near the prior.
    """

    q: float = 0.1
    eta_lambda: float = 0.1
    clamp_floor: float = 1e-12

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("q must be non-negative")
        if self.eta_lambda < 0:
            raise ValueError("eta_lambda must be non-negative")
        if not 0 < self.clamp_floor < 1:
            raise ValueError("clamp_floor must lie in (0, 1)")


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-and-threshold)."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("NaN or Inf in input to simplex projection")
    if np.all(v >= 0) and abs(v.sum() - 1.0) <= SIMPLEX_TOL:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    j = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / j > 0)[-1] + 1
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


def uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def _clamped(lam, floor):
    lam = np.maximum(np.asarray(lam, dtype=np.float64), floor)
    return lam / lam.sum()


def _check_prior(p):
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0):
        raise ValueError("prior must be strictly positive")
    return p


def kl_divergence(lam, p, clamp_floor: float = 1e-12) -> float:
    """KL(lam || p) with ``lam`` clamped at ``clamp_floor`` and renormalized."""
    p = _check_prior(p)
    lt = _clamped(lam, clamp_floor)
    return max(float(np.sum(lt * np.log(lt / p))), 0.0)


def lambda_gradient(losses, lam, p, q: float, clamp_floor: float = 1e-12) -> np.ndarray:
    """Gradient in ``lam`` of ``sum lam_k f_k - q KL(lam || p)``."""
    f = np.asarray(losses, dtype=np.float64)
    p = _check_prior(p)
    lt = _clamped(lam, clamp_floor)
    return f - q * (np.log(lt / p) + 1.0)


def objective(losses, lam, p, q: float) -> float:
    """The regularized mixture objective, with unclamped ``lam`` (interior use)."""
    lam = np.asarray(lam, dtype=np.float64)
    return float(np.dot(lam, losses) - q * np.sum(lam * np.log(lam / p)))


def update_lambda(lam, losses, p, cfg: DualConfig) -> np.ndarray:
    """One projected ascent step on the mixing weights."""
    grad = lambda_gradient(losses, lam, p, cfg.q, cfg.clamp_floor)
    return project_simplex(np.asarray(lam, dtype=np.float64) + cfg.eta_lambda * grad)


def sample_clients(lam, m: int, rng) -> np.ndarray:
    """Draw ``m`` distinct clients, sequentially, with probability proportional to ``lam``.

    Once the clients with positive weight are exhausted the rest are drawn
    uniformly from the zero-weight clients.
    """
    lam = np.asarray(lam, dtype=np.float64)
    k = lam.size
    if not 1 <= m <= k:
        raise ValueError(f"need 1 <= m <= {k}, got {m}")
    rng = np.random.default_rng(rng)
    mass = np.maximum(lam, 0.0).copy()
    chosen = []
    available = np.ones(k, dtype=bool)
    for _ in range(m):
        w = np.where(available, mass, 0.0)
        total = w.sum()
        if total > 0:
            idx = int(rng.choice(k, p=w / total))
        else:
            idx = int(rng.choice(np.flatnonzero(available)))
        chosen.append(idx)
        available[idx] = False
    return np.array(chosen, dtype=int)
