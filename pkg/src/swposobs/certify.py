"""Common linear copositive stability certificates via LP feasibility.

A family of square matrices ``M_1 .. M_N`` admits a common linear copositive
certificate when some vector ``lam > 0`` satisfies ``M_i^T lam < 0`` for all
``i``.  The strict system is closed with a uniform margin ``eps``:

    lam >= eps * 1        and        M_i^T lam <= -eps * 1.

By positive homogeneity any strictly feasible ``lam`` can be rescaled to meet
any margin, so the margin is numerical bookkeeping, not a modelling choice.
Feasibility is decided by a small dense phase-1 simplex with Bland's rule;
no external solver is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import as_matrix, freeze

__all__ = ["Certificate", "check_lambda", "find_lambda"]

DEFAULT_MARGIN = 1e-6
DEFAULT_SWEEP_TO = 1e-8

_PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class Certificate:
    """Witness vector for the closed copositive system.

    ``lam`` is normalised so its largest component equals 1, and ``margin``
    is the exact margin this normalised vector achieves:
    ``min(min(lam), min_i min(-M_i^T lam))``.  ``residuals[i]`` records
    ``max(M_i^T lam)`` per subsystem (all < 0 for a valid certificate).
    """

    lam: np.ndarray
    margin: float
    residuals: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        res = np.array(self.residuals, dtype=float)
        if lam.ndim != 1 or res.ndim != 1:
            raise ValueError("lam and residuals must be 1-D")
        object.__setattr__(self, "lam", freeze(lam))
        object.__setattr__(self, "residuals", freeze(res))


def _stack_mats(mats) -> list[np.ndarray]:
    if not mats:
        raise ValueError("need at least one matrix")
    out = []
    size = None
    for k, m in enumerate(mats):
        m = as_matrix(m, f"mats[{k}]")
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"mats[{k}] is not square: shape {m.shape}")
        if size is None:
            size = m.shape[0]
        elif m.shape[0] != size:
            raise ValueError(f"mats[{k}] has size {m.shape[0]}, expected {size}")
        out.append(m)
    return out


def _phase1_feasible(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Find ``mu >= 0`` with ``a @ mu <= b``, or None if none exists.

    Dense phase-1 simplex: slacks make the rows equalities, rows with a
    negative right-hand side are negated and given an artificial variable,
    and the sum of artificials is minimised.  Bland's rule (smallest
    eligible index, ties by smallest basis variable) prevents cycling.
    """
    nrows, nvars = a.shape
    neg = b < 0
    tab_a = np.where(neg[:, None], -a, a)
    rhs = np.where(neg, -b, b)
    slack_sign = np.where(neg, -1.0, 1.0)

    art_rows = np.flatnonzero(neg)
    n_art = art_rows.size
    ncols = nvars + nrows + n_art

    tab = np.zeros((nrows + 1, ncols + 1))
    tab[:nrows, :nvars] = tab_a
    tab[np.arange(nrows), nvars + np.arange(nrows)] = slack_sign
    for k, r in enumerate(art_rows):
        tab[r, nvars + nrows + k] = 1.0
    tab[:nrows, -1] = rhs

    basis = nvars + np.arange(nrows)
    basis[art_rows] = nvars + nrows + np.arange(n_art)

    # Objective row holds z_j - c_j for "minimise sum of artificials" (and the
    # running objective value in the rhs cell); initially that is the sum of
    # the artificial rows minus the unit cost on each artificial column.
    tab[-1, :] = tab[art_rows, :].sum(axis=0)
    tab[-1, nvars + nrows : ncols] -= 1.0

    structural = ncols - n_art  # artificial columns may not re-enter
    max_iter = 200 * (ncols + 1)
    for _ in range(max_iter):
        entering = -1
        for j in range(structural):
            if tab[-1, j] > _PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            break
        leaving = -1
        best_ratio = np.inf
        for i in range(nrows):
            coef = tab[i, entering]
            if coef > _PIVOT_TOL:
                ratio = tab[i, -1] / coef
                if ratio < best_ratio - _PIVOT_TOL or (
                    abs(ratio - best_ratio) <= _PIVOT_TOL
                    and (leaving < 0 or basis[i] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            raise RuntimeError("phase-1 simplex became unbounded (should not happen)")
        pivot = tab[leaving, entering]
        tab[leaving, :] /= pivot
        for i in range(nrows + 1):
            if i != leaving and tab[i, entering] != 0.0:
                tab[i, :] -= tab[i, entering] * tab[leaving, :]
        basis[leaving] = entering
    else:
        raise RuntimeError("phase-1 simplex exceeded its iteration budget")

    scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
    if tab[-1, -1] > 1e-9 * scale:
        return None
    mu = np.zeros(nvars)
    for i in range(nrows):
        if basis[i] < nvars:
            mu[basis[i]] = tab[i, -1]
    return np.maximum(mu, 0.0)


def _attempt(mats: list[np.ndarray], margin: float) -> Certificate | None:
    size = mats[0].shape[0]
    a = np.vstack([m.T for m in mats])
    ones = np.ones(size)
    # Substituting mu = lam - margin*1 >= 0 turns the closed system into
    # a standard-form feasibility problem a @ mu <= b.
    b = np.concatenate([-margin * (ones + m.T @ ones) for m in mats])
    mu = _phase1_feasible(a, b)
    if mu is None:
        return None
    lam = mu + margin
    lam = lam / lam.max()
    products = [m.T @ lam for m in mats]
    witnessed = min(float(lam.min()), min(float(-v.max()) for v in products))
    if witnessed <= 0.0:
        return None
    residuals = np.array([float(v.max()) for v in products])
    return Certificate(lam=lam, margin=witnessed, residuals=residuals)


def find_lambda(mats, margin: float = DEFAULT_MARGIN, sweep_to: float = DEFAULT_SWEEP_TO):
    """Search for a common copositive certificate for ``mats``.

    Attempts the closed system at ``margin``, then sweeps the margin down
    geometrically (factor 10) to ``sweep_to`` before giving up.  Returns a
    verified :class:`Certificate` or None when every attempt is infeasible.
    """
    if margin <= 0:
        raise ValueError("margin must be > 0")
    if sweep_to > margin:
        sweep_to = margin
    mats = _stack_mats(mats)
    eps = margin
    while True:
        cert = _attempt(mats, eps)
        if cert is not None:
            return cert
        if eps <= sweep_to * (1 + 1e-12):
            return None
        eps = max(eps / 10.0, sweep_to)


def check_lambda(mats, cert: Certificate) -> bool:
    """Re-verify a certificate by direct matrix-vector products."""
    mats = _stack_mats(mats)
    size = mats[0].shape[0]
    lam = cert.lam
    if lam.shape != (size,):
        raise ValueError(f"certificate length {lam.shape} does not match size {size}")
    if not np.all(lam >= cert.margin):
        return False
    return all(np.all(m.T @ lam <= -cert.margin) for m in mats)
