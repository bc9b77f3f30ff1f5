"""Dense matrix predicates and helpers for positive-systems work.

Everything operates on plain numpy float arrays.  Strict sign conditions
(Metzler off-diagonals, principal-minor positivity) are evaluated against a
configurable tolerance because exact floating-point comparisons are
meaningless; the shared default is ``DEFAULT_TOL``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-9

__all__ = [
    "DEFAULT_TOL",
    "IntervalMat",
    "PartitionedBlocks",
    "as_matrix",
    "as_vector",
    "expm",
    "freeze",
    "is_metzler",
    "is_nonneg",
    "metzler_is_hurwitz",
    "nonneg_is_schur",
    "partition",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float array with at least one row and column."""
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must be 2-D and non-empty, got shape {m.shape}")
    return m


def freeze(a: np.ndarray) -> np.ndarray:
    """Mark an array read-only (value types store only frozen arrays)."""
    a.flags.writeable = False
    return a


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce ``a`` to a 1-D float array."""
    v = np.array(a, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"{name} must be 1-D and non-empty, got shape {v.shape}")
    return v


def _require_square(m: np.ndarray, who: str) -> np.ndarray:
    m = as_matrix(m, who)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{who} requires a square matrix, got shape {m.shape}")
    return m


def is_nonneg(m, tol: float = DEFAULT_TOL) -> bool:
    """True iff every entry of ``m`` is >= -tol."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    return bool(np.all(np.asarray(m, dtype=float) >= -tol))


def is_metzler(m, tol: float = DEFAULT_TOL) -> bool:
    """True iff every off-diagonal entry of the square matrix ``m`` is >= -tol."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    m = _require_square(m, "is_metzler")
    off = m.copy()
    np.fill_diagonal(off, 0.0)
    return bool(np.all(off >= -tol))


def _leading_minors(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    return np.array([np.linalg.det(m[: k + 1, : k + 1]) for k in range(n)])


def metzler_is_hurwitz(m, tol: float = DEFAULT_TOL) -> bool:
    """Stability test for Metzler matrices.

    A Metzler matrix ``m`` is Hurwitz exactly when ``-m`` is a nonsingular
    M-matrix, i.e. all leading principal minors of ``-m`` are strictly
    positive.  The equivalence fails for general matrices, so non-Metzler
    input is rejected.
    """
    m = _require_square(m, "metzler_is_hurwitz")
    if not is_metzler(m, tol):
        raise ValueError("metzler_is_hurwitz requires Metzler input")
    return bool(np.all(_leading_minors(-m) > tol))


def nonneg_is_schur(m, tol: float = DEFAULT_TOL) -> bool:
    """Spectral radius < 1 test for nonnegative matrices.

    A nonnegative square matrix has spectral radius < 1 exactly when
    ``I - m`` is a nonsingular M-matrix (all leading principal minors
    strictly positive).  Input with negative entries is rejected.
    """
    m = _require_square(m, "nonneg_is_schur")
    if not is_nonneg(m, tol):
        raise ValueError("nonneg_is_schur requires nonnegative input")
    return bool(np.all(_leading_minors(np.eye(m.shape[0]) - m) > tol))


# Truncated-series order for the scaled exponential core; with the scaled
# norm held below 0.5 the truncation error is far under 1e-14 relative.
_EXPM_ORDER = 17
_EXPM_THETA = 0.5
_EXPM_MAX_SQUARINGS = 60


def expm(m, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^{m t}`` by scaling and squaring.

    The diagonal is shifted so the scaled-and-squared core runs on a
    nonnegative matrix whenever ``m`` is Metzler; the shift is restored as a
    scalar factor folded into the core before squaring.  All core arithmetic
    on Metzler input is then sums and products of nonnegative numbers, so the
    result is entrywise nonnegative without roundoff excursions.

    Raises OverflowError when the result (or a squaring intermediate) leaves
    the double-precision range.
    """
    m = _require_square(m, "expm")
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    n = m.shape[0]
    x = m * t
    shift = max(0.0, -float(np.min(np.diagonal(x))))
    b = x + shift * np.eye(n)

    norm = float(np.linalg.norm(b, np.inf))
    if not math.isfinite(norm):
        raise OverflowError("expm: input norm is not finite")
    squarings = 0
    if norm > _EXPM_THETA:
        squarings = int(math.ceil(math.log2(norm / _EXPM_THETA)))
        if squarings > _EXPM_MAX_SQUARINGS:
            raise OverflowError(f"expm: norm {norm:.3g} too large to scale")

    y = b / 2.0**squarings
    result = np.eye(n)
    for k in range(_EXPM_ORDER, 0, -1):
        result = np.eye(n) + (y / k) @ result
    result *= math.exp(-shift / 2.0**squarings)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(squarings):
            result = result @ result
            if not np.isfinite(result).all():
                raise OverflowError("expm: overflow while squaring")
    if not np.isfinite(result).all():
        raise OverflowError("expm: result is not finite")
    return result


@dataclass(frozen=True)
class IntervalMat:
    """Elementwise interval ``lower <= upper`` of two same-shape matrices."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_matrix(self.lower, "lower")
        up = as_matrix(self.upper, "upper")
        if lo.shape != up.shape:
            raise ValueError(f"interval bounds differ in shape: {lo.shape} vs {up.shape}")
        if not np.all(lo <= up):
            i, j = np.argwhere(lo > up)[0]
            raise ValueError(f"interval bounds out of order at entry ({i}, {j})")
        object.__setattr__(self, "lower", freeze(lo))
        object.__setattr__(self, "upper", freeze(up))

    @property
    def shape(self) -> tuple[int, int]:
        return self.lower.shape

    def contains(self, m, tol: float = 0.0) -> bool:
        m = as_matrix(m, "candidate")
        if m.shape != self.shape:
            return False
        return bool(np.all(m >= self.lower - tol) and np.all(m <= self.upper + tol))


@dataclass(frozen=True)
class PartitionedBlocks:
    """Four-block split of a square matrix at row/column index ``p``."""

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray

    def __post_init__(self):
        p, q = self.a11.shape
        if p != q:
            raise ValueError("a11 must be square")
        r = self.a22.shape[0]
        if self.a22.shape != (r, r) or self.a12.shape != (p, r) or self.a21.shape != (r, p):
            raise ValueError("block shapes are inconsistent with a single square parent")

    @property
    def p(self) -> int:
        return self.a11.shape[0]

    def assemble(self) -> np.ndarray:
        """Reassemble the original matrix from the four blocks."""
        return np.block([[self.a11, self.a12], [self.a21, self.a22]])


def partition(m, p: int) -> PartitionedBlocks:
    """Split the n x n matrix ``m`` into blocks at index ``p`` (1 <= p < n)."""
    m = _require_square(m, "partition")
    n = m.shape[0]
    if not 1 <= p < n:
        raise ValueError(f"partition index p={p} out of range for n={n}")
    return PartitionedBlocks(
        a11=m[:p, :p].copy(),
        a12=m[:p, p:].copy(),
        a21=m[p:, :p].copy(),
        a22=m[p:, p:].copy(),
    )
