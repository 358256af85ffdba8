"""Black-box linear operators: the contract the compressors consume, plus
the test-operator family (kernel matrices, Nystrom double layer, frontal
Schur complements, operator products) and invocation accounting.

An oracle exposes only ``apply`` (A @ block) and ``apply_adjoint``
(A.T @ block) on multi-column blocks.  Point sets must be ordered so that
contiguous index ranges correspond to contiguous arcs/segments of the
geometry; this is what makes the off-diagonal blocks low-rank.
"""

from __future__ import annotations

import threading
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class LinearOracle:
    """Base class: square operator applied to N x s blocks."""

    def __init__(self, n: int):
        self.n = int(n)

    def apply(self, block: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_adjoint(self, block: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, block: np.ndarray) -> np.ndarray:
        block = np.asarray(block, dtype=float)
        if block.ndim == 1:
            block = block[:, None]
        if block.shape[0] != self.n:
            raise ValueError(f"block has {block.shape[0]} rows, operator is {self.n}")
        return block


class DenseOracle(LinearOracle):
    """Reference oracle over an explicitly stored square matrix."""

    def __init__(self, a: np.ndarray):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("dense oracle requires a square matrix")
        super().__init__(a.shape[0])
        self.matrix = a

    def apply(self, block):
        return self.matrix @ self._check(block)

    def apply_adjoint(self, block):
        return self.matrix.T @ self._check(block)


def dense_oracle(a: np.ndarray) -> DenseOracle:
    return DenseOracle(a)


class ProductOracle(LinearOracle):
    """Composition left @ right of two oracles of matching dimension."""

    def __init__(self, left: LinearOracle, right: LinearOracle):
        if left.n != right.n:
            raise ValueError("operator dimensions do not match")
        super().__init__(left.n)
        self.left = left
        self.right = right

    def apply(self, block):
        return self.left.apply(self.right.apply(self._check(block)))

    def apply_adjoint(self, block):
        return self.right.apply_adjoint(self.left.apply_adjoint(self._check(block)))


def product_oracle(left: LinearOracle, right: LinearOracle) -> ProductOracle:
    return ProductOracle(left, right)


class CompressedOracle(LinearOracle):
    """Wraps a compressed matrix so its fast apply can feed back in as input."""

    def __init__(self, compressed):
        super().__init__(compressed.tree.n)
        self.compressed = compressed

    def apply(self, block):
        return self.compressed.apply(self._check(block))

    def apply_adjoint(self, block):
        return self.compressed.apply(self._check(block), adjoint=True)


def compressed_oracle(compressed) -> CompressedOracle:
    return CompressedOracle(compressed)


class CountingOracle(LinearOracle):
    """Counts columns sent to apply/apply_adjoint and accumulates wall time.

    Counts are exact column tallies; wrapping does not perturb values.
    Counter updates are lock-protected so concurrent applies stay exact.
    """

    def __init__(self, inner: LinearOracle):
        super().__init__(inner.n)
        self.inner = inner
        self.matvec_count = 0
        self.adjoint_count = 0
        self.apply_seconds = 0.0
        self.adjoint_seconds = 0.0
        self._lock = threading.Lock()

    @property
    def oracle_seconds(self) -> float:
        return self.apply_seconds + self.adjoint_seconds

    def apply(self, block):
        block = self._check(block)
        t0 = time.perf_counter()
        out = self.inner.apply(block)
        dt = time.perf_counter() - t0
        with self._lock:
            self.matvec_count += block.shape[1]
            self.apply_seconds += dt
        return out

    def apply_adjoint(self, block):
        block = self._check(block)
        t0 = time.perf_counter()
        out = self.inner.apply_adjoint(block)
        dt = time.perf_counter() - t0
        with self._lock:
            self.adjoint_count += block.shape[1]
            self.adjoint_seconds += dt
        return out


class PointSet2D:
    """Points in the plane, ordered consistently with the index tree."""

    def __init__(self, xy: np.ndarray):
        xy = np.asarray(xy, dtype=float)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise ValueError("point set must be an (n, 2) array")
        d2 = np.sum((xy[:, None, :] - xy[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        if d2.min() == 0.0:
            raise ValueError("point set contains coincident points")
        self.xy = xy

    def __len__(self):
        return self.xy.shape[0]


def load_points(path) -> PointSet2D:
    """Read a whitespace-delimited text file with one 'x y' pair per line."""
    xy = np.loadtxt(path, dtype=float, ndmin=2)
    return PointSet2D(xy)


def log_kernel_oracle(points: PointSet2D) -> DenseOracle:
    """Potential map A[i, j] = -(1/2 pi) log|x_i - x_j|, zero diagonal."""
    xy = points.xy
    d = np.hypot(xy[:, 0, None] - xy[None, :, 0], xy[:, 1, None] - xy[None, :, 1])
    np.fill_diagonal(d, 1.0)
    a = -np.log(d) / (2.0 * np.pi)
    np.fill_diagonal(a, 0.0)
    return DenseOracle(a)


class StarCurve:
    """Smooth closed curve r(t) = 1 + amplitude * cos(lobes * t), t in [0, 2 pi).

    Counterclockwise; outward normal is (y', -x') / |gamma'|.
    """

    def __init__(self, lobes: int = 3, amplitude: float = 0.3):
        if not (0.0 <= amplitude < 1.0):
            raise ValueError("amplitude must keep the radius positive")
        self.lobes = lobes
        self.amplitude = amplitude

    def _radius(self, t):
        w = self.lobes
        r = 1.0 + self.amplitude * np.cos(w * t)
        dr = -self.amplitude * w * np.sin(w * t)
        ddr = -self.amplitude * w * w * np.cos(w * t)
        return r, dr, ddr

    def frame(self, t):
        """Position, first and second parameter derivatives at t."""
        t = np.asarray(t, dtype=float)
        r, dr, ddr = self._radius(t)
        ct, st = np.cos(t), np.sin(t)
        g = np.stack([r * ct, r * st], axis=-1)
        dg = np.stack([dr * ct - r * st, dr * st + r * ct], axis=-1)
        ddg = np.stack([ddr * ct - 2 * dr * st - r * ct,
                        ddr * st + 2 * dr * ct - r * st], axis=-1)
        return g, dg, ddg

    def points(self, n: int) -> PointSet2D:
        t = 2.0 * np.pi * np.arange(n) / n
        return PointSet2D(self.frame(t)[0])


class UnitCircle(StarCurve):
    def __init__(self):
        super().__init__(lobes=1, amplitude=0.0)


def double_layer_oracle(curve: StarCurve, n: int) -> DenseOracle:
    """Nystrom matrix of (1/2) I + D for the interior Laplace double layer.

    Trapezoidal rule on n equispaced parameter nodes.  The kernel
    (x - y) . n(y) / (2 pi |x - y|^2) is smooth on a smooth curve; the
    diagonal takes its limiting value -kappa / (4 pi).  Rows of the
    discretized operator applied to the constant vector vanish in the
    n -> inf limit (interior Gauss identity).
    """
    if n < 8:
        raise ValueError("need at least 8 quadrature nodes")
    t = 2.0 * np.pi * np.arange(n) / n
    g, dg, ddg = curve.frame(t)
    speed = np.hypot(dg[:, 0], dg[:, 1])
    if speed.min() < 1e-12:
        raise ValueError("curve speed vanishes at a node")
    normal = np.stack([dg[:, 1], -dg[:, 0]], axis=-1) / speed[:, None]
    weights = speed * (2.0 * np.pi / n)

    diff = g[:, None, :] - g[None, :, :]               # x_i - y_j
    dist2 = np.sum(diff ** 2, axis=2)
    np.fill_diagonal(dist2, 1.0)
    num = np.sum(diff * normal[None, :, :], axis=2)
    kern = num / (2.0 * np.pi * dist2)
    kappa = (dg[:, 0] * ddg[:, 1] - dg[:, 1] * ddg[:, 0]) / speed ** 3
    np.fill_diagonal(kern, -kappa / (4.0 * np.pi))

    a = kern * weights[None, :]
    a[np.diag_indices(n)] += 0.5
    return DenseOracle(a)


class SchurFrontalOracle(LinearOracle):
    """Schur complement onto the middle separator column of a grid-conduction
    matrix on a grid_width x n grid with random bar conductivities in [1, 2].

    The two halves are eliminated through sparse LU factorizations computed
    once at construction; apply performs two triangular solves per block.
    """

    def __init__(self, grid_width: int, n: int, conductivity_seed=0,
                 unit_conductivity: bool = False):
        if grid_width % 2 == 0 or grid_width < 3:
            raise ValueError("grid_width must be odd and at least 3")
        if n < 2:
            raise ValueError("separator length must be at least 2")
        super().__init__(n)
        self.grid_width = grid_width

        b = assemble_grid_conduction(grid_width, n, conductivity_seed,
                                     unit_conductivity=unit_conductivity).tocsr()
        sep = (grid_width - 1) // 2
        cols = np.arange(grid_width * n).reshape(n, grid_width)
        i1 = cols[:, :sep].ravel()
        i2 = cols[:, sep + 1:].ravel()
        i3 = cols[:, sep].ravel()
        self._b33 = b[np.ix_(i3, i3)].tocsr()
        self._b31 = b[np.ix_(i3, i1)].tocsr()
        self._b13 = b[np.ix_(i1, i3)].tocsr()
        self._b32 = b[np.ix_(i3, i2)].tocsr()
        self._b23 = b[np.ix_(i2, i3)].tocsr()
        self._lu1 = spla.splu(b[np.ix_(i1, i1)].tocsc())
        self._lu2 = spla.splu(b[np.ix_(i2, i2)].tocsc())

    def _schur(self, block, trans):
        out = self._b33.T @ block if trans == "T" else self._b33 @ block
        if trans == "T":
            out -= self._b13.T @ self._lu1.solve(self._b31.T @ block, trans="T")
            out -= self._b23.T @ self._lu2.solve(self._b32.T @ block, trans="T")
        else:
            out -= self._b31 @ self._lu1.solve(self._b13 @ block)
            out -= self._b32 @ self._lu2.solve(self._b23 @ block)
        return out

    def apply(self, block):
        return self._schur(self._check(block), "N")

    def apply_adjoint(self, block):
        return self._schur(self._check(block), "T")


def assemble_grid_conduction(width: int, height: int, seed,
                             unit_conductivity: bool = False) -> sp.lil_matrix:
    """Graph Laplacian of a width x height grid with per-bar conductivities
    drawn uniformly from [1, 2] (or all 1 when unit_conductivity)."""
    rng = np.random.Generator(np.random.Philox(seed))
    idx = np.arange(width * height).reshape(height, width)
    b = sp.lil_matrix((width * height, width * height))

    def add_edge(p, q):
        c = 1.0 if unit_conductivity else rng.uniform(1.0, 2.0)
        b[p, p] += c
        b[q, q] += c
        b[p, q] -= c
        b[q, p] -= c

    for i in range(height):
        for j in range(width):
            if j + 1 < width:
                add_edge(idx[i, j], idx[i, j + 1])
            if i + 1 < height:
                add_edge(idx[i, j], idx[i + 1, j])
    return b


def schur_frontal_oracle(grid_width: int, n: int, conductivity_seed=0) -> SchurFrontalOracle:
    return SchurFrontalOracle(grid_width, n, conductivity_seed)
