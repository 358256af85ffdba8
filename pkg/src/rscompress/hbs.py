"""HBS nested-basis representation and its interpolative (HBS-ID) variant.

The HBS format stores long basis matrices only on the leaves; every interior
node keeps a small transfer matrix expressing its long basis through those of
its children.  Compression (a level sweep from the root) samples each level's
sibling blocks with Gaussian probes, augments the local samples with the
parent's retained spanning contribution (the singular-value-scaled basis
restriction), and keeps a fixed number of singular components per node.
Adaptive ranks are recovered afterwards by a second sweep from the leaves
upward that converts the representation to interpolative form: skeleton index
sets that are nested across levels, interpolation matrices containing exact
identity submatrices, and sibling interactions that are literal submatrices
of the operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dense
from .operators import LinearOracle
from .tree import IndexTree, nodes_on_level


def _rank_of(node, long_bases, shorts):
    if node in long_bases:
        return long_bases[node].shape[1]
    return shorts[node].shape[1]


def nested_apply(tree: IndexTree, in_long: dict, in_short: dict,
                 out_long: dict, out_short: dict, b_ab: dict, b_ba: dict,
                 x: np.ndarray, max_pair_level: int) -> np.ndarray:
    """Apply sum of factored sibling blocks at pair levels <= max_pair_level.

    ``in_long``/``out_long`` hold long bases on the frontier nodes (leaves of
    a finished matrix, or the deepest processed level during compression);
    ``in_short``/``out_short`` hold transfer matrices for every interior
    non-root node above the frontier.  Sibling interactions are keyed by the
    parent node.  No diagonal blocks are applied.
    """
    n, s = x.shape
    out = np.zeros((n, s))
    if max_pair_level < 1 or not b_ab:
        return out

    # Upward pass: outgoing expansions.
    qhat = {}
    for lvl in range(tree.depth, 0, -1):
        for tau in nodes_on_level(tree, lvl):
            if tau in out_long:
                sl = slice(*tree.interval(tau))
                qhat[tau] = out_long[tau].T @ x[sl]
            elif tau in out_short:
                a, b = tree.children(tau)
                qhat[tau] = out_short[tau].T @ np.vstack([qhat[a], qhat[b]])

    # Exchange at the children of the root.
    uhat = {}
    ra, rb = tree.children(1)
    if 1 <= max_pair_level and 1 in b_ab:
        uhat[ra] = b_ab[1] @ qhat[rb]
        uhat[rb] = b_ba[1] @ qhat[ra]
    else:
        uhat[ra] = np.zeros((_rank_of(ra, in_long, in_short), s))
        uhat[rb] = np.zeros((_rank_of(rb, in_long, in_short), s))

    # Downward pass: incoming expansions through the transfer matrices.
    for lvl in range(1, tree.depth):
        for tau in nodes_on_level(tree, lvl):
            if tau not in in_short:
                continue
            a, b = tree.children(tau)
            ka = _rank_of(a, in_long, in_short)
            ua = in_short[tau][:ka, :] @ uhat[tau]
            ub = in_short[tau][ka:, :] @ uhat[tau]
            if lvl + 1 <= max_pair_level and tau in b_ab:
                ua += b_ab[tau] @ qhat[b]
                ub += b_ba[tau] @ qhat[a]
            uhat[a] = ua
            uhat[b] = ub

    for tau, basis in in_long.items():
        if tau in uhat:
            sl = slice(*tree.interval(tau))
            out[sl] += basis @ uhat[tau]
    return out


class _NestedBase:
    """Shared apply/inspection machinery for HBS and HBS-ID matrices."""

    def _sides(self, adjoint: bool):
        """(in_long, in_short, out_long, out_short, b_ab, b_ba) for A or A.T."""
        raise NotImplementedError

    def _check_block(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[:, None]
        if x.shape[0] != self.tree.n:
            raise ValueError("dimension mismatch")
        return x, squeeze

    def apply_truncated(self, x: np.ndarray, level: int, adjoint: bool = False) -> np.ndarray:
        """Apply only the off-diagonal blocks at pair levels <= ``level``."""
        x, squeeze = self._check_block(x)
        if level > self.tree.depth:
            raise ValueError("level exceeds tree depth")
        out = nested_apply(self.tree, *self._sides(adjoint), x, level)
        return out[:, 0] if squeeze else out

    def apply(self, x: np.ndarray, adjoint: bool = False) -> np.ndarray:
        x, squeeze = self._check_block(x)
        out = nested_apply(self.tree, *self._sides(adjoint), x, self.tree.depth)
        for leaf, d in self.diag.items():
            s = slice(*self.tree.interval(leaf))
            out[s] += (d.T if adjoint else d) @ x[s]
        return out[:, 0] if squeeze else out


@dataclass
class HbsMatrix(_NestedBase):
    tree: IndexTree
    sample_rank: int = 0
    seed: int = 0
    u_leaf: dict[int, np.ndarray] = field(default_factory=dict)
    v_leaf: dict[int, np.ndarray] = field(default_factory=dict)
    u_short: dict[int, np.ndarray] = field(default_factory=dict)
    v_short: dict[int, np.ndarray] = field(default_factory=dict)
    y: dict[int, np.ndarray] = field(default_factory=dict)   # retained sample singular values
    z: dict[int, np.ndarray] = field(default_factory=dict)
    b_ab: dict[int, np.ndarray] = field(default_factory=dict)  # keyed by parent
    b_ba: dict[int, np.ndarray] = field(default_factory=dict)
    diag: dict[int, np.ndarray] = field(default_factory=dict)
    debug_u_long: dict[int, np.ndarray] | None = None
    debug_v_long: dict[int, np.ndarray] | None = None

    format_tag = "hbs"

    def _sides(self, adjoint):
        if adjoint:
            bt = {p: m.T for p, m in self.b_ba.items()}
            bs = {p: m.T for p, m in self.b_ab.items()}
            return self.v_leaf, self.v_short, self.u_leaf, self.u_short, bt, bs
        return self.u_leaf, self.u_short, self.v_leaf, self.v_short, self.b_ab, self.b_ba

    def long_basis(self, tau: int, side: str = "u") -> np.ndarray:
        """Reconstruct the telescoped long basis of a node explicitly."""
        leaf = self.u_leaf if side == "u" else self.v_leaf
        short = self.u_short if side == "u" else self.v_short
        if self.tree.is_leaf(tau):
            return leaf[tau]
        a, b = self.tree.children(tau)
        la, lb = self.long_basis(a, side), self.long_basis(b, side)
        blk = np.zeros((la.shape[0] + lb.shape[0], la.shape[1] + lb.shape[1]))
        blk[:la.shape[0], :la.shape[1]] = la
        blk[la.shape[0]:, la.shape[1]:] = lb
        return blk @ short[tau]

    def max_rank(self) -> int:
        ranks = [0]
        for d in (self.u_leaf, self.v_leaf, self.u_short, self.v_short):
            ranks.extend(m.shape[1] for m in d.values())
        return max(ranks)

    def storage_bytes(self) -> int:
        total = 0
        for d in (self.u_leaf, self.v_leaf, self.u_short, self.v_short,
                  self.y, self.z, self.b_ab, self.b_ba, self.diag):
            total += sum(m.size for m in d.values())
        return total * 8


@dataclass
class HbsIdMatrix(_NestedBase):
    tree: IndexTree
    eps: float = 0.0
    skel_in: dict[int, np.ndarray] = field(default_factory=dict)   # global indices, ascending
    skel_out: dict[int, np.ndarray] = field(default_factory=dict)
    e_in: dict[int, np.ndarray] = field(default_factory=dict)      # interpolation operators
    e_out: dict[int, np.ndarray] = field(default_factory=dict)
    u_samp: dict[int, np.ndarray] = field(default_factory=dict)    # basis restrictions to skeletons
    v_samp: dict[int, np.ndarray] = field(default_factory=dict)
    b_ab: dict[int, np.ndarray] = field(default_factory=dict)      # skeleton submatrices of A
    b_ba: dict[int, np.ndarray] = field(default_factory=dict)
    diag: dict[int, np.ndarray] = field(default_factory=dict)

    format_tag = "hbsid"

    def _split(self, d):
        leaf = {t: m for t, m in d.items() if self.tree.is_leaf(t)}
        short = {t: m for t, m in d.items() if not self.tree.is_leaf(t)}
        return leaf, short

    def _sides(self, adjoint):
        in_leaf, in_short = self._split(self.e_in)
        out_leaf, out_short = self._split(self.e_out)
        if adjoint:
            bt = {p: m.T for p, m in self.b_ba.items()}
            bs = {p: m.T for p, m in self.b_ab.items()}
            return out_leaf, out_short, in_leaf, in_short, bt, bs
        return in_leaf, in_short, out_leaf, out_short, self.b_ab, self.b_ba

    def max_rank(self) -> int:
        ranks = [0]
        ranks.extend(len(v) for v in self.skel_in.values())
        ranks.extend(len(v) for v in self.skel_out.values())
        return max(ranks)

    def storage_bytes(self) -> int:
        total = 0
        for d in (self.e_in, self.e_out, self.b_ab, self.b_ba, self.diag):
            total += sum(m.size for m in d.values())
        for d in (self.skel_in, self.skel_out):
            total += sum(v.size for v in d.values())
        return total * 8


def hbs_compress(oracle: LinearOracle, tree: IndexTree, sample_rank: int,
                 seed=0, debug_long_bases: bool = False) -> HbsMatrix:
    """Storage-efficient randomized HBS compression at fixed sample rank.

    Every node keeps exactly min(sample_rank, n_tau) basis columns; adaptive
    rank determination is deferred to :func:`hbs_to_hbsid`.  Long bases are
    deleted level by level unless ``debug_long_bases`` (the retention-only
    debug mode: identical arithmetic, explicit long-matrix storage).
    """
    if oracle.n != tree.n:
        raise ValueError("oracle dimension does not match tree")
    if sample_rank < 1:
        raise ValueError("sample_rank must be positive")
    rng = dense.make_rng(seed)
    r = sample_rank
    h = HbsMatrix(tree=tree, sample_rank=r, seed=seed)
    if debug_long_bases:
        h.debug_u_long, h.debug_v_long = {}, {}

    long_u: dict[int, np.ndarray] = {}
    long_v: dict[int, np.ndarray] = {}

    def partial(x, lvl, adjoint):
        if adjoint:
            bt = {p: m.T for p, m in h.b_ba.items()}
            bs = {p: m.T for p, m in h.b_ab.items()}
            return nested_apply(tree, long_v, h.v_short, long_u, h.u_short, bt, bs, x, lvl)
        return nested_apply(tree, long_u, h.u_short, long_v, h.v_short,
                            h.b_ab, h.b_ba, x, lvl)

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

        y1 = oracle.apply(omega2) - partial(omega2, lvl, False)
        y2 = oracle.apply(omega1) - partial(omega1, lvl, False)

        for p in parents:
            a, b, sa, sb, wa, wb = spans[p]
            ja, jb = tree.child_slices(p)
            for child, sl, jloc, ysample, omg in ((a, sa, ja, y1[sa, :wb], omega1),
                                                  (b, sb, jb, y2[sb, :wa], omega2)):
                if lvl == 0:
                    yloc = ysample
                else:
                    yloc = np.hstack([ysample, long_u[p][jloc] * h.y[p][None, :]])
                ubar, yvals, _ = _clipped_svd(yloc, r)
                long_u[child] = ubar
                h.y[child] = yvals
                omg[sl] = 0.0
                omg[sl, :ubar.shape[1]] = ubar
            if lvl > 0:
                h.u_short[p] = np.vstack([long_u[a].T @ long_u[p][ja],
                                          long_u[b].T @ long_u[p][jb]])
                if debug_long_bases:
                    h.debug_u_long[p] = long_u[p]
                del long_u[p]

        z1 = oracle.apply_adjoint(omega2) - partial(omega2, lvl, True)
        z2 = oracle.apply_adjoint(omega1) - partial(omega1, lvl, True)

        for p in parents:
            a, b, sa, sb, wa, wb = spans[p]
            ja, jb = tree.child_slices(p)
            ku_a, ku_b = long_u[a].shape[1], long_u[b].shape[1]
            results = {}
            for child, sl, jloc, zsample in ((a, sa, ja, z1[sa, :ku_b]),
                                             (b, sb, jb, z2[sb, :ku_a])):
                if lvl == 0:
                    zloc = zsample
                else:
                    zloc = np.hstack([zsample, long_v[p][jloc] * h.z[p][None, :]])
                vbar, bvals, xfac = _clipped_svd(zloc, r)
                long_v[child] = vbar
                h.z[child] = bvals
                results[child] = (bvals, xfac)
            b21, x1 = results[a]
            b12, x2 = results[b]
            # A(I_a, I_b) ~= Ua (X2[:ku_a,:] diag(b12)) Vb.T; the first block
            # of rows of each right factor corresponds to the fresh samples.
            h.b_ab[p] = x2[:ku_a, :] * b12[None, :]
            h.b_ba[p] = x1[:ku_b, :] * b21[None, :]
            if lvl > 0:
                h.v_short[p] = np.vstack([long_v[a].T @ long_v[p][ja],
                                          long_v[b].T @ long_v[p][jb]])
                if debug_long_bases:
                    h.debug_v_long[p] = long_v[p]
                del long_v[p]

    # Leaves retain their long bases; extract the diagonal blocks exactly.
    for leaf in tree.leaves():
        h.u_leaf[leaf] = long_u.get(leaf, np.zeros((tree.size(leaf), 0)))
        h.v_leaf[leaf] = long_v.get(leaf, np.zeros((tree.size(leaf), 0)))
        h.y.setdefault(leaf, np.zeros(0))
        h.z.setdefault(leaf, np.zeros(0))

    m_max = tree.max_leaf_size()
    omega = np.zeros((tree.n, m_max))
    for leaf in tree.leaves():
        s = slice(*tree.interval(leaf))
        omega[s, :tree.size(leaf)] = np.eye(tree.size(leaf))
    yd = oracle.apply(omega) - h.apply_truncated(omega, tree.depth)
    for leaf in tree.leaves():
        s = slice(*tree.interval(leaf))
        h.diag[leaf] = yd[s, :tree.size(leaf)].copy()
    return h


def _clipped_svd(mat: np.ndarray, r: int):
    """Rank-clipped SVD of a local sample, dropping numerically zero modes.

    Columns whose sample singular value is numerically zero carry no
    information; dropping them keeps the nested bases exactly orthonormal on
    rank-deficient operators.
    """
    k = min(r, mat.shape[0], mat.shape[1])
    if k == 0:
        return (np.zeros((mat.shape[0], 0)), np.zeros(0),
                np.zeros((mat.shape[1], 0)))
    u, s, x = dense.svd(mat, dense.fixed_rank(k))
    keep = s > 1e-14 * s.max(initial=0.0)
    return (np.ascontiguousarray(u[:, keep]), s[keep],
            np.ascontiguousarray(x[:, keep]))


def _sorted_id(spanning: np.ndarray, eps: float):
    """ID of ``spanning.T`` with the selected rows sorted ascending.

    Returns (e, sel, k): spanning ~= e @ spanning[sel, :] with
    e[sel, :] = I_k exactly and sel strictly increasing.
    """
    rows = spanning.shape[0]
    if rows == 0 or spanning.shape[1] == 0 or not np.any(spanning):
        return np.zeros((rows, 0)), np.zeros(0, dtype=int), 0
    x, j, k = dense.id_decompose(spanning.T, dense.tolerance(eps, relative=True))
    if k == 0:
        return np.zeros((rows, 0)), np.zeros(0, dtype=int), 0
    order = np.argsort(j[:k])
    sel = np.asarray(j[:k])[order]
    e = np.ascontiguousarray(x.T[:, order])
    return e, sel, k


def hbs_to_hbsid(h: HbsMatrix, eps: float) -> HbsIdMatrix:
    """Convert an HBS matrix to interpolative form with adaptive ranks.

    Sweeps from the leaves upward.  At every node the retained spanning
    matrix (basis times sample singular values) is row-skeletonized by an ID
    at relative tolerance ``eps``; parents stack their children's sampled
    basis restrictions through the transfer matrices, so skeletons are nested
    by construction.  Sibling interactions become literal submatrices of A.
    """
    tree = h.tree
    out = HbsIdMatrix(tree=tree, eps=eps,
                      diag={t: d.copy() for t, d in h.diag.items()})

    for leaf in tree.leaves():
        if leaf == 1:  # single-node tree: no off-diagonal structure
            continue
        lo = tree.start[leaf]
        for side, basis, vals in (("in", h.u_leaf[leaf], h.y[leaf]),
                                  ("out", h.v_leaf[leaf], h.z[leaf])):
            e, sel, k = _sorted_id(basis * vals[None, :], eps)
            samp = basis[sel, :]
            if side == "in":
                out.e_in[leaf], out.skel_in[leaf], out.u_samp[leaf] = e, lo + sel, samp
            else:
                out.e_out[leaf], out.skel_out[leaf], out.v_samp[leaf] = e, lo + sel, samp

    interior = [t for t in range(2, tree.node_count + 1) if not tree.is_leaf(t)]
    interior.sort(key=lambda t: -tree.level[t])
    for tau in interior:
        a, b = tree.children(tau)
        for side in ("in", "out"):
            samp_d = out.u_samp if side == "in" else out.v_samp
            skel_d = out.skel_in if side == "in" else out.skel_out
            e_d = out.e_in if side == "in" else out.e_out
            short = (h.u_short if side == "in" else h.v_short)[tau]
            vals = (h.y if side == "in" else h.z)[tau]
            sa, sb = samp_d[a], samp_d[b]
            stacked = np.zeros((sa.shape[0] + sb.shape[0], sa.shape[1] + sb.shape[1]))
            stacked[:sa.shape[0], :sa.shape[1]] = sa
            stacked[sa.shape[0]:, sa.shape[1]:] = sb
            tmp = stacked @ short
            e, sel, k = _sorted_id(tmp * vals[None, :], eps)
            union = np.concatenate([skel_d[a], skel_d[b]])
            e_d[tau], skel_d[tau], samp_d[tau] = e, union[sel], tmp[sel, :]

    for p in list(h.b_ab):
        a, b = tree.children(p)
        out.b_ab[p] = out.u_samp[a] @ h.b_ab[p] @ out.v_samp[b].T
        out.b_ba[p] = out.u_samp[b] @ h.b_ba[p] @ out.v_samp[a].T
    return out
