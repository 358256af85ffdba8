"""Error estimation, timing, and CSV reporting for compression runs.

A benchmark run compresses one configured operator family over a sweep of
problem sizes and reports, per size: oracle call counts, wall-clock
compression time, net time (compression minus time spent inside the oracle),
a median apply time over 3 repetitions, storage, a randomized relative error
estimate, and the maximum rank.  CSV is the output boundary; no plotting.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from dataclasses import dataclass

import numpy as np

from . import dense
from .hbs import hbs_compress, hbs_to_hbsid
from .hodlr import hodlr_compress
from .operators import (CompressedOracle, CountingOracle, LinearOracle,
                        PointSet2D, StarCurve, dense_oracle,
                        double_layer_oracle, log_kernel_oracle,
                        product_oracle, schur_frontal_oracle)
from .synthetic import planted_hbs, planted_hodlr_dense
from .tree import build_tree

KERNELS = ("planted-hodlr", "planted-hbs", "logcurve", "bie-doublelayer",
           "frontal", "product")
FORMATS = ("hodlr", "hbs", "hbsid")


@dataclass
class CompressionReport:
    n: int
    n_matvec_apply: int
    n_matvec_adjoint: int
    t_compress_seconds: float
    t_net_seconds: float
    t_apply_seconds: float
    storage_bytes: int
    storage_per_dof: float
    error_e: float
    max_rank_k: int
    format: str
    kernel: str
    seed: int
    eps: float
    sample_width: int


def estimate_error(reference: LinearOracle, compressed: LinearOracle,
                   trials: int = 10, seed=0) -> float:
    """max_i ||A w_i - A~ w_i|| / ||A w_i|| over unit-sphere probes.

    Probes are normalized Gaussians (rotation invariance makes them uniform
    on the sphere).  Probes annihilated by the reference are skipped; if all
    probes are annihilated the estimate is undefined.
    """
    if reference.n != compressed.n:
        raise ValueError("dimension mismatch between oracles")
    rng = dense.make_rng(seed)
    worst = None
    for _ in range(trials):
        w = rng.standard_normal(reference.n)
        w /= np.linalg.norm(w)
        ref = reference.apply(w)
        nrm = np.linalg.norm(ref)
        if nrm == 0.0:
            continue
        err = np.linalg.norm(ref - compressed.apply(w)) / nrm
        worst = err if worst is None else max(worst, err)
    if worst is None:
        raise ValueError("reference annihilated every probe; error undefined")
    return worst


def _star_points(n: int) -> PointSet2D:
    curve = StarCurve()
    t = 2.0 * np.pi * np.arange(n) / n
    pts = np.empty((n, 2))
    for i, ti in enumerate(t):
        g, _, _ = curve.frame(ti)
        pts[i] = g
    return PointSet2D(pts)


def make_kernel(name: str, n: int, seed=0) -> LinearOracle:
    """Construct one of the named benchmark operators at size n."""
    if name == "planted-hodlr":
        return dense_oracle(planted_hodlr_dense(n, 32, rank=5, seed=seed))
    if name == "planted-hbs":
        return dense_oracle(planted_hbs(n, 32, rank=5, seed=seed)[1])
    if name == "logcurve":
        return log_kernel_oracle(_star_points(n))
    if name == "bie-doublelayer":
        return double_layer_oracle(StarCurve(), n)
    if name == "frontal":
        return schur_frontal_oracle(41, n, conductivity_seed=seed)
    if name == "product":
        return product_oracle(log_kernel_oracle(_star_points(n)),
                              double_layer_oracle(StarCurve(), n))
    raise ValueError(f"unknown kernel {name!r}; choose from {KERNELS}")


def compress_as(oracle: LinearOracle, fmt: str, leaf_size: int,
                sample_width: int, eps: float, seed=0):
    """Compress an oracle in the requested format."""
    tree = build_tree(oracle.n, leaf_size)
    if fmt == "hodlr":
        return hodlr_compress(oracle, tree, sample_width, eps, seed=seed)
    if fmt == "hbs":
        return hbs_compress(oracle, tree, sample_width, seed=seed)
    if fmt == "hbsid":
        h = hbs_compress(oracle, tree, sample_width, seed=seed)
        return hbs_to_hbsid(h, eps)
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def run_benchmark(config: dict) -> list[CompressionReport]:
    """Run a configured sweep and return one report per problem size."""
    kernel = config["kernel"]
    fmt = config["format"]
    sizes = [int(v) for v in config["sizes"]]
    leaf_size = int(config.get("leaf_size", 64))
    width = int(config.get("sample_width", 45))
    eps = float(config.get("eps", 1e-9))
    seed = int(config.get("seed", 0))
    trials = int(config.get("error_trials", 10))
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")

    reports = []
    for n in sizes:
        base = make_kernel(kernel, n, seed=seed)
        counting = CountingOracle(base)
        t0 = time.perf_counter()
        mat = compress_as(counting, fmt, leaf_size, width, eps, seed=seed)
        t_compress = time.perf_counter() - t0
        t_net = t_compress - counting.oracle_seconds

        x = dense.make_rng(seed + 1).standard_normal(n)
        t_apply = float(np.median([_timed(mat.apply, x) for _ in range(3)]))
        err = float(estimate_error(base, CompressedOracle(mat), trials=trials,
                                   seed=seed + 2))
        storage = mat.storage_bytes()
        reports.append(CompressionReport(
            n=n,
            n_matvec_apply=counting.matvec_count,
            n_matvec_adjoint=counting.adjoint_count,
            t_compress_seconds=t_compress,
            t_net_seconds=t_net,
            t_apply_seconds=t_apply,
            storage_bytes=storage,
            storage_per_dof=storage / (8.0 * n),
            error_e=err,
            max_rank_k=mat.max_rank(),
            format=fmt,
            kernel=kernel,
            seed=seed,
            eps=eps,
            sample_width=width,
        ))
    return reports


def _timed(fn, x):
    t0 = time.perf_counter()
    fn(x)
    return time.perf_counter() - t0


_FIELDS = [f.name for f in dataclasses.fields(CompressionReport)]
_INT_FIELDS = {"n", "n_matvec_apply", "n_matvec_adjoint", "storage_bytes",
               "max_rank_k", "seed", "sample_width"}
_STR_FIELDS = {"format", "kernel"}


def emit_csv(reports: list[CompressionReport]) -> str:
    """CSV text for a list of reports; floats use repr so parsing round-trips."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_FIELDS)
    for rep in reports:
        row = []
        for name in _FIELDS:
            v = getattr(rep, name)
            if name in _STR_FIELDS:
                row.append(v)
            elif name in _INT_FIELDS:
                row.append(str(int(v)))
            else:
                row.append(repr(float(v)))
        w.writerow(row)
    return buf.getvalue()


def parse_csv(text: str) -> list[CompressionReport]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != _FIELDS:
        raise ValueError("unrecognized report CSV header")
    out = []
    for row in rows[1:]:
        kwargs = {}
        for name, cell in zip(_FIELDS, row):
            if name in _STR_FIELDS:
                kwargs[name] = cell
            elif name in _INT_FIELDS:
                kwargs[name] = int(cell)
            else:
                kwargs[name] = float(cell)
        out.append(CompressionReport(**kwargs))
    return out


def load_config(path: str) -> dict:
    """Read a benchmark config: JSON, or simple ``key = value`` lines.

    In the key-value form ``sizes`` is a comma-separated list.
    """
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(text)
    config: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        config[key] = [v.strip() for v in value.split(",")] if key == "sizes" else value
    return config
