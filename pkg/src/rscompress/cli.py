"""Command-line front door.

Subcommands: compress, apply, info, validate, bench.  Exit codes: 0 success,
1 validation failure, 2 usage error, 3 I/O or file-format error.  All output
files are written atomically (temp file in the target directory, then
rename).

Dense matrices and vectors are exchanged either as little-endian binary (two
u64 dimensions followed by column-major float64 data) or as whitespace text,
one row per line.  Binary is detected by the file size matching the header;
output files ending in ``.txt`` are written as text.
"""

from __future__ import annotations

import argparse
import struct
import sys

import numpy as np

from . import bench as bench_mod
from . import serialize
from .hbs import HbsIdMatrix, HbsMatrix
from .hodlr import HodlrMatrix
from .operators import dense_oracle
from .serialize import ContainerError


def read_dense(path: str) -> np.ndarray:
    """Read a matrix from the binary interchange format or whitespace text."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) >= 16:
        rows, cols = struct.unpack_from("<QQ", raw, 0)
        if 16 + rows * cols * 8 == len(raw) and rows > 0 and cols > 0:
            flat = np.frombuffer(raw, dtype="<f8", offset=16)
            return flat.reshape((cols, rows)).T.copy()
    try:
        return np.loadtxt(path, dtype=float, ndmin=2)
    except ValueError as exc:
        raise ContainerError(f"cannot parse {path} as binary or text matrix: {exc}")


def write_dense(path: str, a: np.ndarray) -> None:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if path.endswith(".txt"):
        lines = "\n".join(" ".join(repr(float(v)) for v in row) for row in a)
        serialize._atomic_write(path, (lines + "\n").encode())
    else:
        buf = struct.pack("<QQ", *a.shape) + np.asfortranarray(a).tobytes(order="F")
        serialize._atomic_write(path, buf)


def cmd_compress(args) -> int:
    if args.eps <= 0.0:
        raise UsageError("--eps must be positive")
    if args.dense is None and args.kernel is None:
        raise UsageError("provide --dense FILE or --kernel NAME with --n")
    if args.dense is not None:
        a = read_dense(args.dense)
        if a.shape[0] != a.shape[1]:
            raise UsageError("input matrix must be square")
        oracle = dense_oracle(a)
    else:
        if args.n is None:
            raise UsageError("--kernel requires --n")
        oracle = bench_mod.make_kernel(args.kernel, args.n, seed=args.seed)
    mat = bench_mod.compress_as(oracle, args.format, args.leaf_size,
                                args.rank, args.eps, seed=args.seed)
    serialize.save_compressed(mat, args.out)
    line = (f"format={mat.format_tag} N={mat.tree.n} k={mat.max_rank()} "
            f"M={mat.storage_bytes()} bytes")
    if args.dense is not None:
        from .operators import CompressedOracle
        e = bench_mod.estimate_error(oracle, CompressedOracle(mat), seed=args.seed)
        line += f" E={e:.3e}"
    print(line)
    return 0


def cmd_apply(args) -> int:
    mat = serialize.load_compressed(args.compressed)
    x = read_dense(args.vector)
    if x.shape[0] != mat.tree.n:
        raise UsageError(f"vector has {x.shape[0]} rows, matrix is {mat.tree.n}")
    if args.level is not None:
        if args.level < 0 or args.level > mat.tree.depth:
            raise UsageError(f"--level must be in [0, {mat.tree.depth}]")
        y = mat.apply_truncated(x, args.level, adjoint=args.adjoint)
    else:
        y = mat.apply(x, adjoint=args.adjoint)
    write_dense(args.out, y)
    return 0


def cmd_info(args) -> int:
    mat = serialize.load_compressed(args.compressed)
    t = mat.tree
    print(f"format: {mat.format_tag}")
    print(f"n: {t.n}")
    print(f"leaf_size: {t.leaf_size}")
    print(f"tree_depth: {t.depth}")
    print(f"max_rank: {mat.max_rank()}")
    print(f"storage_bytes: {mat.storage_bytes()}")
    print(f"storage_per_dof: {mat.storage_bytes() / (8.0 * t.n):.2f}")
    if isinstance(mat, HodlrMatrix):
        print(f"eps: {mat.eps}  sample_width: {mat.sample_width}  seed: {mat.seed}")
    elif isinstance(mat, HbsMatrix):
        print(f"sample_rank: {mat.sample_rank}  seed: {mat.seed}")
    else:
        print(f"eps: {mat.eps}")
    return 0


ORTHO_TOL = 1e-12


def _defect_ortho(q) -> float:
    if q.shape[1] == 0:
        return 0.0
    g = q.T @ q
    return float(abs(g - np.eye(q.shape[1])).max())


def validate_matrix(mat) -> list[tuple[str, bool, float]]:
    """Invariant checks; returns (name, passed, measured defect) triples."""
    checks = []
    tree = mat.tree
    if isinstance(mat, HodlrMatrix):
        d = max((_defect_ortho(f.u_a) for f in mat.blocks.values()), default=0.0)
        d = max(d, max((_defect_ortho(f.u_b) for f in mat.blocks.values()), default=0.0))
        checks.append(("row_basis_orthonormal", d <= ORTHO_TOL, d))
        d = max((max(_defect_ortho(f.v_a), _defect_ortho(f.v_b))
                 for f in mat.blocks.values()), default=0.0)
        checks.append(("column_basis_orthonormal", d <= ORTHO_TOL, d))
        ok = all(f.b_ab.ndim == 1 and f.b_ba.ndim == 1 for f in mat.blocks.values())
        checks.append(("interaction_diagonal", ok, 0.0))
        ok = all(mat.diag[l].shape == (tree.size(l),) * 2 for l in tree.leaves())
        checks.append(("leaf_diagonal_shapes", ok, 0.0))
    elif isinstance(mat, HbsMatrix):
        d = max(max(_defect_ortho(u) for u in mat.u_leaf.values()),
                max(_defect_ortho(v) for v in mat.v_leaf.values()))
        checks.append(("leaf_basis_orthonormal", d <= ORTHO_TOL, d))
        d = 0.0
        for dct in (mat.u_short, mat.v_short):
            d = max(d, max((_defect_ortho(m) for m in dct.values()), default=0.0))
        checks.append(("transfer_orthonormal", d <= ORTHO_TOL, d))
        ok = all(mat.diag[l].shape == (tree.size(l),) * 2 for l in tree.leaves())
        checks.append(("leaf_diagonal_shapes", ok, 0.0))
    elif isinstance(mat, HbsIdMatrix):
        worst = 0.0
        ok_id = ok_nest = ok_sorted = True
        for skel_d, e_d in ((mat.skel_in, mat.e_in), (mat.skel_out, mat.e_out)):
            for tau, sel in skel_d.items():
                ok_sorted &= bool(np.all(np.diff(sel) > 0))
                if tree.is_leaf(tau):
                    union = np.arange(*tree.interval(tau))
                else:
                    a, b = tree.children(tau)
                    ok_nest &= set(sel.tolist()) <= (set(skel_d[a].tolist())
                                                     | set(skel_d[b].tolist()))
                    union = np.concatenate([skel_d[a], skel_d[b]])
                loc = np.searchsorted(union, sel)
                sub = e_d[tau][loc, :]
                ok_id &= np.array_equal(sub, np.eye(len(sel)))
                if sub.size:
                    worst = max(worst, float(abs(sub - np.eye(len(sel))).max()))
        checks.append(("skeletons_sorted", ok_sorted, 0.0))
        checks.append(("skeletons_nested", ok_nest, 0.0))
        checks.append(("identity_submatrix_exact", ok_id, worst))
        ok = all(mat.diag[l].shape == (tree.size(l),) * 2 for l in tree.leaves())
        checks.append(("leaf_diagonal_shapes", ok, 0.0))
    finite = True
    for arr in _all_arrays(mat):
        finite &= bool(np.all(np.isfinite(arr)))
    checks.append(("all_entries_finite", finite, 0.0))
    return checks


def _all_arrays(mat):
    _, _, arrays = serialize._flatten(mat)
    for _, arr in arrays:
        yield np.asarray(arr, dtype=float)


def cmd_validate(args) -> int:
    mat = serialize.load_compressed(args.compressed)
    checks = validate_matrix(mat)
    failed = False
    for name, ok, defect in checks:
        print(f"{name}: {'pass' if ok else 'FAIL'} (defect {defect:.3e})")
        failed |= not ok
    return 1 if failed else 0


def cmd_bench(args) -> int:
    config = bench_mod.load_config(args.config)
    reports = bench_mod.run_benchmark(config)
    text = bench_mod.emit_csv(reports)
    out = args.out or config.get("out")
    if out:
        serialize._atomic_write(out, text.encode())
    else:
        sys.stdout.write(text)
    return 0


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rscompress",
                                description="Compress, apply, and inspect "
                                            "rank-structured operators.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="compress an operator to a file")
    c.add_argument("--dense", help="square dense matrix file (binary or text)")
    c.add_argument("--kernel", choices=bench_mod.KERNELS,
                   help="built-in operator family (requires --n)")
    c.add_argument("--n", type=int, help="problem size for --kernel")
    c.add_argument("--format", required=True, choices=bench_mod.FORMATS)
    c.add_argument("--eps", type=float, default=1e-9)
    c.add_argument("--rank", type=int, default=45, help="sample width")
    c.add_argument("--leaf-size", type=int, default=64)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compress)

    a = sub.add_parser("apply", help="apply a compressed matrix to vectors")
    a.add_argument("compressed")
    a.add_argument("vector")
    a.add_argument("--adjoint", action="store_true")
    a.add_argument("--level", type=int, default=None,
                   help="apply only off-diagonal blocks at levels <= this")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_apply)

    i = sub.add_parser("info", help="print metadata of a compressed file")
    i.add_argument("compressed")
    i.set_defaults(func=cmd_info)

    v = sub.add_parser("validate", help="run structural invariant checks")
    v.add_argument("compressed")
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bench", help="run a configured benchmark sweep")
    b.add_argument("--config", required=True)
    b.add_argument("--out", default=None,
                   help="CSV path (default: the config's 'out', else stdout)")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
