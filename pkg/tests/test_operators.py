import numpy as np
import pytest

from rscompress import dense
from rscompress.operators import (CountingOracle, PointSet2D, StarCurve,
                                  UnitCircle, assemble_grid_conduction,
                                  dense_oracle, double_layer_oracle,
                                  load_points, log_kernel_oracle,
                                  product_oracle, schur_frontal_oracle,
                                  SchurFrontalOracle)


def _adjoint_defect(oracle, trials=20, seed=0):
    rng = dense.make_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal((oracle.n, 1))
        y = rng.standard_normal((oracle.n, 1))
        ax = oracle.apply(x).ravel()
        aty = oracle.apply_adjoint(y).ravel()
        norm_est = np.linalg.norm(ax) / np.linalg.norm(x)
        scale = np.linalg.norm(x) * np.linalg.norm(y) * max(norm_est, 1e-300)
        worst = max(worst, abs(ax @ y.ravel() - x.ravel() @ aty) / scale)
    return worst


def test_dense_oracle_basics():
    orc = dense_oracle(np.eye(5))
    w = dense.gaussian_block(5, 2, 0)
    assert np.array_equal(orc.apply(w), w)
    orc = dense_oracle(np.diag([1.0, 2.0, 3.0, 4.0]))
    e3 = np.zeros((4, 1))
    e3[2] = 1.0
    assert np.allclose(orc.apply(e3), 3.0 * e3)
    with pytest.raises(ValueError):
        dense_oracle(np.ones((3, 2)))


def test_dense_oracle_adjoint_consistency():
    a = dense.gaussian_block(20, 20, 1)
    assert _adjoint_defect(dense_oracle(a)) <= 1e-13


def test_log_kernel_values():
    pts = PointSet2D(np.array([[0.0, 0.0], [1.0, 0.0]]))
    a = log_kernel_oracle(pts).matrix
    assert np.array_equal(a, np.zeros((2, 2)))
    pts = PointSet2D(np.array([[0.0, 0.0], [np.e, 0.0]]))
    a = log_kernel_oracle(pts).matrix
    assert np.allclose(a[0, 1], -1.0 / (2.0 * np.pi))
    assert np.allclose(a, a.T)
    assert np.array_equal(np.diag(a), np.zeros(2))


def test_log_kernel_rejects_coincident_points():
    with pytest.raises(ValueError):
        log_kernel_oracle(PointSet2D(np.zeros((2, 2))))


def test_load_points(tmp_path):
    p = tmp_path / "pts.txt"
    p.write_text("0 0\n1 2.5\n-3 4\n")
    pts = load_points(p)
    assert pts.xy.shape == (3, 2)
    assert pts.xy[1, 1] == 2.5


def test_double_layer_interior_identity():
    """(1/2 I + D) annihilates constants on a closed curve."""
    for curve in (UnitCircle(), StarCurve()):
        a = double_layer_oracle(curve, 256).matrix
        assert np.abs(a @ np.ones(256)).max() <= 1e-10
        assert np.all(np.isfinite(a))


def test_double_layer_rejects_tiny_n():
    with pytest.raises(ValueError):
        double_layer_oracle(UnitCircle(), 1)


def test_double_layer_adjoint_consistency():
    assert _adjoint_defect(double_layer_oracle(StarCurve(), 128)) <= 1e-10


def _dense_schur(width, height, unit=True, seed=0):
    b = np.asarray(assemble_grid_conduction(width, height, seed,
                                            unit_conductivity=unit).todense())
    sep = (width - 1) // 2
    cols = np.arange(width * height).reshape(height, width)
    i1, i2, i3 = cols[:, :sep].ravel(), cols[:, sep + 1:].ravel(), cols[:, sep].ravel()
    b11 = b[np.ix_(i1, i1)]
    b22 = b[np.ix_(i2, i2)]
    return (b[np.ix_(i3, i3)]
            - b[np.ix_(i3, i1)] @ np.linalg.solve(b11, b[np.ix_(i1, i3)])
            - b[np.ix_(i3, i2)] @ np.linalg.solve(b22, b[np.ix_(i2, i3)]))


def test_schur_tiny_hand_check():
    """3 x 2 grid with unit conductivities against explicit dense elimination."""
    orc = SchurFrontalOracle(3, 2, unit_conductivity=True)
    a_ref = _dense_schur(3, 2, unit=True)
    a = orc.apply(np.eye(2))
    assert np.abs(a - a_ref).max() <= 1e-12
    # and against the 5-point Laplacian worked by hand: interior bars only
    lap = np.asarray(assemble_grid_conduction(3, 2, 0, unit_conductivity=True).todense())
    assert lap[0, 0] == 2.0 and lap[1, 1] == 3.0  # corner and edge-center degrees


def test_schur_matches_dense_and_symmetry():
    orc = schur_frontal_oracle(41, 100, conductivity_seed=3)
    a_ref = _dense_schur(41, 100, unit=False, seed=3)
    rng = dense.make_rng(0)
    for j in rng.integers(0, 100, size=5):
        e = np.zeros((100, 1))
        e[j] = 1.0
        col = orc.apply(e).ravel()
        assert np.abs(col - a_ref[:, j]).max() <= 1e-11 * np.abs(a_ref).max()
    assert np.abs(a_ref - a_ref.T).max() <= 1e-11 * np.abs(a_ref).max()
    assert _adjoint_defect(orc) <= 1e-10


def test_schur_rejects_bad_geometry():
    with pytest.raises(ValueError):
        schur_frontal_oracle(40, 100)
    with pytest.raises(ValueError):
        schur_frontal_oracle(41, 1)


def test_product_oracle():
    a = dense.gaussian_block(30, 30, 1)
    b = dense.gaussian_block(30, 30, 2)
    prod = product_oracle(dense_oracle(a), dense_oracle(b))
    w = dense.gaussian_block(30, 10, 3)
    assert np.allclose(prod.apply(w), a @ (b @ w))
    ident = product_oracle(dense_oracle(np.eye(30)), dense_oracle(a))
    assert np.allclose(ident.apply(w), a @ w)
    assert _adjoint_defect(prod) <= 1e-11
    with pytest.raises(ValueError):
        product_oracle(dense_oracle(a), dense_oracle(np.eye(4)))


def test_counting_oracle_tallies_and_transparency():
    a = dense.gaussian_block(12, 12, 4)
    orc = CountingOracle(dense_oracle(a))
    w = dense.gaussian_block(12, 5, 5)
    out = orc.apply(w)
    assert np.array_equal(out, a @ w)
    orc.apply(w[:, :2])
    orc.apply_adjoint(w)
    assert orc.matvec_count == 7
    assert orc.adjoint_count == 5
    assert orc.oracle_seconds >= 0.0


def test_pointset_rejects_bad_shapes():
    with pytest.raises(ValueError):
        PointSet2D(np.zeros((4, 3)))
