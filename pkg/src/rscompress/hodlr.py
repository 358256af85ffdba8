"""HODLR representation: every off-diagonal sibling block is stored as an
explicit low-rank factorization A(I_a, I_b) ~= Ua @ diag(b_ab) @ Vb.T, with
dense diagonal blocks on the leaves.

Compression is a single sweep from the root towards the leaves.  On each
level, fresh Gaussian probes are applied through the black-box oracle and the
contribution of all coarser blocks is subtracted via the level-truncated
apply, so the samples see exactly the blocks being built.  Sibling
interaction matrices are diagonal (SVD-derived) and the column bases are
updated with the third SVD factor.  Leaf diagonals are extracted exactly with
one padded-identity probe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dense
from .operators import LinearOracle
from .tree import IndexTree, nodes_on_level


@dataclass
class PairFactors:
    """Factors of the two blocks coupling a sibling pair {a, b}.

    A(I_a, I_b) ~= u_a @ diag(b_ab) @ v_b.T
    A(I_b, I_a) ~= u_b @ diag(b_ba) @ v_a.T
    """

    u_a: np.ndarray
    b_ab: np.ndarray
    v_b: np.ndarray
    u_b: np.ndarray
    b_ba: np.ndarray
    v_a: np.ndarray


@dataclass
class HodlrMatrix:
    tree: IndexTree
    blocks: dict[int, PairFactors] = field(default_factory=dict)  # keyed by parent id
    diag: dict[int, np.ndarray] = field(default_factory=dict)     # keyed by leaf id
    eps: float = 0.0
    sample_width: int = 0
    seed: int = 0

    format_tag = "hodlr"

    def _check_block(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[:, None]
        if x.shape[0] != self.tree.n:
            raise ValueError("dimension mismatch")
        return x, squeeze

    def apply_truncated(self, x: np.ndarray, level: int, adjoint: bool = False) -> np.ndarray:
        """Apply the level-truncated matrix: only off-diagonal blocks whose
        sibling pair sits on a level <= ``level``; no diagonal blocks."""
        x, squeeze = self._check_block(x)
        tree = self.tree
        if level > 0:
            have = {tree.level[p] + 1 for p in self.blocks}
            missing = set(range(1, level + 1)) - have
            if missing and level <= tree.depth:
                raise ValueError(f"levels {sorted(missing)} not compressed yet")
        out = np.zeros_like(x)
        for p, f in self.blocks.items():
            if tree.level[p] + 1 > level:
                continue
            a, b = tree.children(p)
            sa = slice(*tree.interval(a))
            sb = slice(*tree.interval(b))
            if adjoint:
                # A.T(I_b, I_a) = (A(I_a, I_b)).T = v_b diag(b_ab) u_a.T
                out[sb] += f.v_b @ (f.b_ab[:, None] * (f.u_a.T @ x[sa]))
                out[sa] += f.v_a @ (f.b_ba[:, None] * (f.u_b.T @ x[sb]))
            else:
                out[sa] += f.u_a @ (f.b_ab[:, None] * (f.v_b.T @ x[sb]))
                out[sb] += f.u_b @ (f.b_ba[:, None] * (f.v_a.T @ x[sa]))
        return out[:, 0] if squeeze else out

    def apply(self, x: np.ndarray, adjoint: bool = False) -> np.ndarray:
        x, squeeze = self._check_block(x)
        out = self.apply_truncated(x, self.tree.depth, adjoint=adjoint)
        for leaf, d in self.diag.items():
            s = slice(*self.tree.interval(leaf))
            out[s] += (d.T if adjoint else d) @ x[s]
        return out[:, 0] if squeeze else out

    def max_rank(self) -> int:
        ranks = [0]
        for f in self.blocks.values():
            ranks.append(len(f.b_ab))
            ranks.append(len(f.b_ba))
        return max(ranks)

    def storage_bytes(self) -> int:
        total = 0
        for f in self.blocks.values():
            for arr in (f.u_a, f.b_ab, f.v_b, f.u_b, f.b_ba, f.v_a):
                total += arr.size
        for d in self.diag.values():
            total += d.size
        return total * 8


def hodlr_compress(oracle: LinearOracle, tree: IndexTree, sample_width: int,
                   eps: float, seed=0) -> HodlrMatrix:
    """Randomized HODLR compression using only products with A and A.T.

    ``sample_width`` probe columns are used per child per level (clipped to
    the child size); off-diagonal ranks are truncated adaptively at the
    absolute singular-value threshold ``eps``.  Column tallies sent to the
    oracle are exactly L * 2 * sample_width (apply, plus one padded-identity
    probe of the max leaf width) and L * 2 * sample_width (adjoint).
    """
    if oracle.n != tree.n:
        raise ValueError("oracle dimension does not match tree")
    if sample_width < 1:
        raise ValueError("sample_width must be positive")
    mode = dense.tolerance(eps)
    rng = dense.make_rng(seed)
    r = sample_width
    h = HodlrMatrix(tree=tree, eps=eps, sample_width=sample_width,
                    seed=seed if isinstance(seed, int) else 0)

    for lvl in range(tree.depth):
        parents = [t for t in nodes_on_level(tree, lvl) if not tree.is_leaf(t)]
        omega1 = np.zeros((tree.n, r))
        omega2 = np.zeros((tree.n, r))
        spans = {}
        for p in parents:
            a, b = tree.children(p)
            sa, sb = slice(*tree.interval(a)), slice(*tree.interval(b))
            wa, wb = min(r, tree.size(a)), min(r, tree.size(b))
            omega1[sa, :wa] = dense.gaussian_block(tree.size(a), wa, rng)
            omega2[sb, :wb] = dense.gaussian_block(tree.size(b), wb, rng)
            spans[p] = (a, b, sa, sb, wa, wb)

        y1 = oracle.apply(omega2) - h.apply_truncated(omega2, lvl)
        y2 = oracle.apply(omega1) - h.apply_truncated(omega1, lvl)

        u_long = {}
        for p in parents:
            a, b, sa, sb, wa, wb = spans[p]
            ua = dense.orthonormalize(y1[sa, :wb])
            ub = dense.orthonormalize(y2[sb, :wa])
            u_long[p] = (ua, ub)
            omega1[sa] = 0.0
            omega1[sa, :ua.shape[1]] = ua
            omega2[sb] = 0.0
            omega2[sb, :ub.shape[1]] = ub

        z1 = oracle.apply_adjoint(omega2) - h.apply_truncated(omega2, lvl, adjoint=True)
        z2 = oracle.apply_adjoint(omega1) - h.apply_truncated(omega1, lvl, adjoint=True)

        for p in parents:
            a, b, sa, sb, wa, wb = spans[p]
            ua, ub = u_long[p]
            # Z1(I_a, :) = A(I_b, I_a).T @ ub; its SVD gives the row basis
            # v_a, the diagonal interaction, and the update for ub.
            v_a, b_ba, w = dense.svd(z1[sa, :ub.shape[1]], mode)
            u_b = ub @ w
            v_b, b_ab, w = dense.svd(z2[sb, :ua.shape[1]], mode)
            u_a = ua @ w
            h.blocks[p] = PairFactors(u_a=u_a, b_ab=b_ab, v_b=v_b,
                                      u_b=u_b, b_ba=b_ba, v_a=v_a)

    _extract_diagonals(oracle, h)
    return h


def _extract_diagonals(oracle: LinearOracle, h) -> None:
    """Padded-identity probe recovering every leaf diagonal block exactly."""
    tree = h.tree
    m_max = tree.max_leaf_size()
    omega = np.zeros((tree.n, m_max))
    leaves = tree.leaves()
    for leaf in leaves:
        s = slice(*tree.interval(leaf))
        omega[s, :tree.size(leaf)] = np.eye(tree.size(leaf))
    y = oracle.apply(omega) - h.apply_truncated(omega, tree.depth)
    for leaf in leaves:
        s = slice(*tree.interval(leaf))
        h.diag[leaf] = y[s, :tree.size(leaf)].copy()
