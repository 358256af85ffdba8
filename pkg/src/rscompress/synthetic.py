"""Instances with planted rank structure, used for validation and benchmarks.

Each builder returns a dense matrix assembled exactly from the planted
factors, so compressed representations can be checked against ground truth.
All factors are drawn with O(1) scale: orthonormal bases and singular values
in [1, 2], which keeps absolute and relative error tolerances interchangeable
up to a small constant.
"""

from __future__ import annotations

import numpy as np

from . import dense
from .hbs import HbsMatrix
from .tree import IndexTree, build_tree


def _orthonormal(m: int, k: int, rng) -> np.ndarray:
    q, _ = np.linalg.qr(dense.gaussian_block(m, min(m, k), rng))
    return q


def planted_spectrum(m: int, n: int, svals, seed=0) -> np.ndarray:
    """Dense m-by-n matrix with prescribed singular values."""
    rng = dense.make_rng(seed)
    svals = np.asarray(svals, dtype=float)
    k = len(svals)
    u = _orthonormal(m, k, rng)
    v = _orthonormal(n, k, rng)
    return (u * svals[None, :]) @ v.T


def planted_hodlr_dense(n: int, leaf_size: int, rank: int = 5, seed=0,
                        tree: IndexTree | None = None) -> np.ndarray:
    """Dense matrix whose every off-diagonal sibling block has exact rank.

    Blocks are U diag(s) V^T with orthonormal U, V and s in [1, 2]; leaf
    diagonal blocks are Gaussian.
    """
    if tree is None:
        tree = build_tree(n, leaf_size)
    rng = dense.make_rng(seed)
    a = np.zeros((n, n))
    for tau in range(1, tree.node_count + 1):
        if tree.is_leaf(tau):
            continue
        ca, cb = tree.children(tau)
        sa, sb = slice(*tree.interval(ca)), slice(*tree.interval(cb))
        for rows, cols in ((sa, sb), (sb, sa)):
            k = min(rank, rows.stop - rows.start, cols.stop - cols.start)
            u = _orthonormal(rows.stop - rows.start, k, rng)
            v = _orthonormal(cols.stop - cols.start, k, rng)
            s = 1.0 + rng.random(k)
            a[rows, cols] = (u * s[None, :]) @ v.T
    for leaf in tree.leaves():
        s = slice(*tree.interval(leaf))
        m = s.stop - s.start
        a[s, s] = dense.gaussian_block(m, m, rng) / np.sqrt(m)
    return a


def planted_hbs(n: int, leaf_size: int, rank: int = 5, seed=0,
                tree: IndexTree | None = None) -> tuple[HbsMatrix, np.ndarray]:
    """Planted nested-basis instance built by the telescoping construction.

    Leaves get orthonormal long bases; every interior non-root node gets an
    orthonormal transfer matrix, so the recursively assembled long bases are
    orthonormal too.  Sibling interaction matrices have entries of O(1).
    Returns the structured matrix and its exact dense assembly.
    """
    if tree is None:
        tree = build_tree(n, leaf_size)
    rng = dense.make_rng(seed)
    h = HbsMatrix(tree=tree, sample_rank=rank, seed=seed)

    for leaf in tree.leaves():
        m = tree.size(leaf)
        k = min(rank, m)
        h.u_leaf[leaf] = _orthonormal(m, k, rng)
        h.v_leaf[leaf] = _orthonormal(m, k, rng)
        h.y[leaf] = np.ones(k)
        h.z[leaf] = np.ones(k)
        h.diag[leaf] = dense.gaussian_block(m, m, rng) / np.sqrt(m)

    interior = [t for t in range(2, tree.node_count + 1) if not tree.is_leaf(t)]
    interior.sort(key=lambda t: -tree.level[t])
    ranks_u, ranks_v = {}, {}
    for t in range(1, tree.node_count + 1):
        if tree.is_leaf(t):
            ranks_u[t] = h.u_leaf[t].shape[1]
            ranks_v[t] = h.v_leaf[t].shape[1]
    for tau in interior:
        a, b = tree.children(tau)
        k = min(rank, ranks_u[a] + ranks_u[b])
        h.u_short[tau] = _orthonormal(ranks_u[a] + ranks_u[b], k, rng)
        ranks_u[tau] = k
        k = min(rank, ranks_v[a] + ranks_v[b])
        h.v_short[tau] = _orthonormal(ranks_v[a] + ranks_v[b], k, rng)
        ranks_v[tau] = k
        h.y[tau] = np.ones(ranks_u[tau])
        h.z[tau] = np.ones(ranks_v[tau])

    for tau in range(1, tree.node_count + 1):
        if tree.is_leaf(tau):
            continue
        a, b = tree.children(tau)
        h.b_ab[tau] = dense.gaussian_block(ranks_u[a], ranks_v[b], rng)
        h.b_ba[tau] = dense.gaussian_block(ranks_u[b], ranks_v[a], rng)

    a_dense = np.zeros((n, n))
    for tau in range(1, tree.node_count + 1):
        if tree.is_leaf(tau):
            continue
        ca, cb = tree.children(tau)
        sa, sb = slice(*tree.interval(ca)), slice(*tree.interval(cb))
        ua, ub = h.long_basis(ca, "u"), h.long_basis(cb, "u")
        va, vb = h.long_basis(ca, "v"), h.long_basis(cb, "v")
        a_dense[sa, sb] = ua @ h.b_ab[tau] @ vb.T
        a_dense[sb, sa] = ub @ h.b_ba[tau] @ va.T
    for leaf in tree.leaves():
        s = slice(*tree.interval(leaf))
        a_dense[s, s] = h.diag[leaf]
    return h, a_dense
