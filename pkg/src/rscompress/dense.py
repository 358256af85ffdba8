"""Dense factorization kernels (pivoted QR, SVD, ID) and the randomized
range finder.

Every factorization accepts a :class:`Mode` which is one of

* ``full()``          -- economy-size factorization, exact to roundoff,
* ``fixed_rank(k)``   -- exactly k terms retained,
* ``tolerance(eps)``  -- rank chosen adaptively from the singular spectrum.

Tolerance-mode SVD truncation uses an absolute singular-value threshold by
default (operators in this package are O(1)-normalized); pass
``tolerance(eps, relative=True)`` for a threshold of eps * sigma_1.  QR and
ID tolerance modes are relative to ||A||.

Random numbers come from numpy's Philox counter-based generator, with
Gaussians drawn by the ziggurat method of ``Generator.standard_normal``; both
are fixed, documented algorithms, so sample matrices are reproducible across
platforms for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

# A column counts as numerically zero when its norm is below this factor
# times the largest column norm of the enclosing block.
ZERO_COLUMN_RTOL = 1e-14


@dataclass(frozen=True)
class Mode:
    kind: str                 # "full" | "rank" | "tol"
    k: int = 0
    eps: float = 0.0
    relative: bool = False


def full() -> Mode:
    return Mode("full")


def fixed_rank(k: int) -> Mode:
    if k < 1:
        raise ValueError("rank must be positive")
    return Mode("rank", k=k)


def tolerance(eps: float, relative: bool = False) -> Mode:
    if not (0.0 < eps < 1.0):
        raise ValueError("tolerance must lie in (0, 1)")
    return Mode("tol", eps=eps, relative=relative)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def gaussian_block(n: int, r: int, rng_state) -> np.ndarray:
    """n x r block of iid N(0,1) entries, deterministic per rng_state."""
    if n < 1 or r < 1:
        raise ValueError("block dimensions must be positive")
    return make_rng(rng_state).standard_normal((n, r))


def _check_nonempty(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("matrix must be nonempty and 2-dimensional")
    return a


def _tol_rank_from_singvals(s: np.ndarray, eps: float, relative: bool) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    cut = eps * s[0] if relative else eps
    # Keep components down to and including the threshold: the rank is the
    # smallest k whose first discarded singular value is strictly below eps.
    # A small relative slack keeps values that sit exactly on the threshold
    # but were nudged below it by roundoff.
    return int(np.count_nonzero(s >= cut * (1.0 - 1e-9)))


def qr(a: np.ndarray, mode: Mode = full()):
    """Column-pivoted QR: a[:, jc] = q @ r.

    Returns (q, r, jc) with q orthonormal and r upper triangular with
    nonincreasing diagonal magnitudes.  Tolerance mode truncates where the
    singular values of r (equal to those of a) drop below eps * sigma_1.
    """
    a = _check_nonempty(a)
    q, r, jc = sla.qr(a, mode="economic", pivoting=True)
    if mode.kind == "full":
        return q, r, jc
    if mode.kind == "rank":
        k = mode.k
        if k > min(a.shape):
            raise ValueError("rank exceeds matrix dimensions")
    else:
        s = sla.svdvals(r)
        k = _tol_rank_from_singvals(s, mode.eps, relative=True)
    return np.ascontiguousarray(q[:, :k]), np.ascontiguousarray(r[:k, :]), jc


def svd(a: np.ndarray, mode: Mode = full()):
    """SVD a = u @ diag(s) @ v.T, truncated per mode.  Returns (u, s, v).

    Outputs are C-contiguous so that downstream products are bit-reproducible
    regardless of how the factors were sliced.
    """
    a = _check_nonempty(a)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if mode.kind == "full":
        k = min(a.shape)
    elif mode.kind == "rank":
        k = mode.k
        if k > min(a.shape):
            raise ValueError("rank exceeds matrix dimensions")
    else:
        k = _tol_rank_from_singvals(s, mode.eps, mode.relative)
    return (np.ascontiguousarray(u[:, :k]), s[:k].copy(),
            np.ascontiguousarray(vh[:k, :].T))


def id_decompose(a: np.ndarray, mode: Mode = full()):
    """Interpolative decomposition a ~= a[:, j[:k]] @ x.

    x is k x n with an exact k x k identity submatrix at columns j[:k];
    computed from the column-pivoted QR via a triangular solve.  Tolerance
    mode picks the smallest k with residual <= eps * ||a||.
    """
    a = _check_nonempty(a)
    _, r, j = sla.qr(a, mode="economic", pivoting=True)
    if mode.kind == "full":
        k = min(a.shape)
    elif mode.kind == "rank":
        k = mode.k
        if k > min(a.shape):
            raise ValueError("rank exceeds matrix dimensions")
    else:
        s = sla.svdvals(r)
        k = _tol_rank_from_singvals(s, mode.eps, relative=True)
    n = a.shape[1]
    x = np.zeros((k, n))
    if k > 0:
        t = sla.solve_triangular(r[:k, :k], r[:k, k:])
        x[:, j[:k]] = np.eye(k)
        x[:, j[k:]] = t
    return x, j, k


def randomized_range(sampler, n: int, k: int, p: int, seed) -> np.ndarray:
    """Orthonormal basis for the range of a linear map, via Gaussian probing.

    ``sampler`` maps an n x s block to an m x s block.  Draws k + p probe
    columns; the failure probability of missing the rank-k range decays like
    6 * p**-p.  A numerically zero sample collapses to an empty basis.
    """
    if k + p > n:
        raise ValueError("k + p may not exceed n")
    omega = gaussian_block(n, k + p, seed)
    y = np.asarray(sampler(omega), dtype=float)
    norms = np.linalg.norm(y, axis=0)
    scale = norms.max(initial=0.0)
    if scale == 0.0:
        return np.zeros((y.shape[0], 0))
    keep = norms > ZERO_COLUMN_RTOL * scale
    q, _ = sla.qr(y[:, keep], mode="economic")
    return q


def orthonormalize(y: np.ndarray) -> np.ndarray:
    """Economy QR orthonormalization of the columns of y."""
    if y.shape[1] == 0:
        return y.copy()
    q, _ = sla.qr(y, mode="economic")
    return q
