import numpy as np
import pytest

from rscompress import bench, dense
from rscompress.hodlr import hodlr_compress
from rscompress.operators import CompressedOracle, dense_oracle
from rscompress.synthetic import planted_hodlr_dense
from rscompress.tree import build_tree


def test_estimate_error_identical_oracles():
    a = dense.gaussian_block(50, 50, 0)
    e = bench.estimate_error(dense_oracle(a), dense_oracle(a.copy()))
    assert e <= 1e-15


def test_estimate_error_zero_vs_identity():
    e = bench.estimate_error(dense_oracle(np.eye(40)),
                             dense_oracle(np.zeros((40, 40))))
    assert abs(e - 1.0) <= 1e-14


def test_estimate_error_compressed_within_tolerance():
    a = planted_hodlr_dense(256, 32, rank=5, seed=1)
    h = hodlr_compress(dense_oracle(a), build_tree(256, 32), 15, 1e-9, seed=2)
    assert bench.estimate_error(dense_oracle(a), CompressedOracle(h)) <= 1e-8


def test_estimate_error_all_probes_annihilated():
    with pytest.raises(ValueError):
        bench.estimate_error(dense_oracle(np.zeros((10, 10))),
                             dense_oracle(np.zeros((10, 10))))
    with pytest.raises(ValueError):
        bench.estimate_error(dense_oracle(np.eye(4)), dense_oracle(np.eye(5)))


def _planted_config(**overrides):
    cfg = {"kernel": "planted-hodlr", "format": "hodlr", "sizes": [256, 512],
           "leaf_size": 32, "sample_width": 15, "eps": 1e-12, "seed": 1}
    cfg.update(overrides)
    return cfg


def test_run_benchmark_planted_sweep():
    reports = bench.run_benchmark(_planted_config())
    assert [r.n for r in reports] == [256, 512]
    for r in reports:
        assert r.error_e <= 1e-10
        assert r.t_net_seconds <= r.t_compress_seconds
        assert r.storage_per_dof == r.storage_bytes / (8.0 * r.n)
        tree = build_tree(r.n, 32)
        assert r.n_matvec_apply == tree.depth * 2 * 15 + tree.max_leaf_size()
        assert r.n_matvec_adjoint == tree.depth * 2 * 15


def test_run_benchmark_deterministic():
    cfg = _planted_config(sizes=[256])
    r1 = bench.run_benchmark(cfg)[0]
    r2 = bench.run_benchmark(cfg)[0]
    assert r1.error_e == r2.error_e
    assert r1.max_rank_k == r2.max_rank_k
    assert r1.storage_bytes == r2.storage_bytes


def test_run_benchmark_rejects_unknown_names():
    with pytest.raises(ValueError):
        bench.run_benchmark(_planted_config(kernel="nope"))
    with pytest.raises(ValueError):
        bench.run_benchmark(_planted_config(format="nope"))


def test_csv_round_trip():
    reports = bench.run_benchmark(_planted_config(sizes=[256]))
    assert bench.parse_csv(bench.emit_csv(reports)) == reports
    with pytest.raises(ValueError):
        bench.parse_csv("no,such,header\n1,2,3\n")


def test_load_config_key_value(tmp_path):
    p = tmp_path / "cfg.txt"
    p.write_text("# comment\nkernel = logcurve\nformat = hbsid\n"
                 "sizes = 400, 800\neps = 1e-9\nseed = 3\n")
    cfg = bench.load_config(str(p))
    assert cfg["kernel"] == "logcurve"
    assert cfg["sizes"] == ["400", "800"]
    assert float(cfg["eps"]) == 1e-9


def test_load_config_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text('{"kernel": "planted-hbs", "format": "hbs", "sizes": [128]}')
    cfg = bench.load_config(str(p))
    assert cfg["sizes"] == [128]


def test_load_config_rejects_garbage(tmp_path):
    p = tmp_path / "cfg.txt"
    p.write_text("kernel logcurve\n")
    with pytest.raises(ValueError):
        bench.load_config(str(p))


def test_make_kernel_sizes():
    for name in bench.KERNELS:
        orc = bench.make_kernel(name, 64, seed=0)
        assert orc.n == 64
        w = dense.gaussian_block(64, 2, 1)
        assert orc.apply(w).shape == (64, 2)
