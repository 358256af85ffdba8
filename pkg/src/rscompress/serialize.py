"""On-disk container for compressed matrices.

Binary layout (all integers little-endian):

    magic  b"RSCM"
    u32    container version (1)
    u16    format tag length, then ascii tag ("hodlr", "hbs", "hbsid")
    u64    n, u64 leaf_size
    f8     eps, u64 sample width (or rank), u64 seed
    u64    array count, then per array:
        u16 name length, utf-8 name
        u8  dtype code (0 = float64, 1 = int64)
        u8  ndim, u64 per dimension
        raw column-major data

The index tree is not stored; it is rebuilt deterministically from
(n, leaf_size).  The same arrays written in sorted name order make the file a
pure function of the matrix contents, so equal matrices give bit-identical
files.  A JSON-metadata plus raw-blob sidecar variant is provided for
debugging.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .hbs import HbsIdMatrix, HbsMatrix
from .hodlr import HodlrMatrix, PairFactors
from .tree import build_tree

MAGIC = b"RSCM"
VERSION = 1


class ContainerError(ValueError):
    """Raised when a compressed-matrix file cannot be parsed."""


def _leaf_size_of(tree):
    return tree.leaf_size


def _flatten(mat):
    """(tag, header scalars, sorted (name, array) list) for any format."""
    arrays = []
    if isinstance(mat, HodlrMatrix):
        scalars = (float(mat.eps), int(mat.sample_width), int(mat.seed))
        for p, f in mat.blocks.items():
            for part in ("u_a", "b_ab", "v_b", "u_b", "b_ba", "v_a"):
                arrays.append((f"blk/{p}/{part}", getattr(f, part)))
        for leaf, d in mat.diag.items():
            arrays.append((f"diag/{leaf}", d))
    elif isinstance(mat, HbsMatrix):
        scalars = (0.0, int(mat.sample_rank), int(mat.seed))
        for field in ("u_leaf", "v_leaf", "u_short", "v_short",
                      "y", "z", "b_ab", "b_ba", "diag"):
            for key, arr in getattr(mat, field).items():
                arrays.append((f"{field}/{key}", arr))
    elif isinstance(mat, HbsIdMatrix):
        scalars = (float(mat.eps), 0, 0)
        for field in ("skel_in", "skel_out", "e_in", "e_out",
                      "u_samp", "v_samp", "b_ab", "b_ba", "diag"):
            for key, arr in getattr(mat, field).items():
                arrays.append((f"{field}/{key}", arr))
    else:
        raise TypeError(f"cannot serialize {type(mat).__name__}")
    arrays.sort(key=lambda t: t[0])
    return mat.format_tag, scalars, arrays


def _build(tag, n, leaf_size, scalars, arrays):
    tree = build_tree(n, leaf_size)
    eps, width, seed = scalars
    if tag == "hodlr":
        mat = HodlrMatrix(tree=tree, eps=eps, sample_width=width, seed=seed)
        for name, arr in arrays.items():
            parts = name.split("/")
            if parts[0] == "diag":
                mat.diag[int(parts[1])] = arr
            else:
                p = int(parts[1])
                if p not in mat.blocks:
                    mat.blocks[p] = PairFactors(*(None,) * 6)
                setattr(mat.blocks[p], parts[2], arr)
        return mat
    if tag == "hbs":
        mat = HbsMatrix(tree=tree, sample_rank=width, seed=seed)
    elif tag == "hbsid":
        mat = HbsIdMatrix(tree=tree, eps=eps)
    else:
        raise ContainerError(f"unknown format tag {tag!r}")
    for name, arr in arrays.items():
        field, key = name.split("/")
        getattr(mat, field)[int(key)] = arr
    return mat


_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}


def _dtype_code(arr):
    if arr.dtype.kind == "f":
        return 0
    if arr.dtype.kind in "iu":
        return 1
    raise TypeError(f"unsupported dtype {arr.dtype}")


def save_compressed(mat, path: str) -> None:
    """Write a compressed matrix atomically (temp file, then rename)."""
    tag, scalars, arrays = _flatten(mat)
    chunks = [MAGIC, struct.pack("<I", VERSION),
              struct.pack("<H", len(tag)), tag.encode(),
              struct.pack("<QQ", mat.tree.n, _leaf_size_of(mat.tree)),
              struct.pack("<dQQ", *scalars),
              struct.pack("<Q", len(arrays))]
    for name, arr in arrays:
        arr = np.asarray(arr)
        code = _dtype_code(arr)
        nb = name.encode()
        chunks.append(struct.pack("<H", len(nb)) + nb)
        chunks.append(struct.pack("<BB", code, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
        chunks.append(np.ascontiguousarray(arr.T, dtype=_DTYPES[code]).tobytes())
    _atomic_write(path, b"".join(chunks))


def load_compressed(path: str):
    with open(path, "rb") as fh:
        buf = fh.read()
    try:
        return _parse(buf)
    except (struct.error, UnicodeDecodeError, IndexError) as exc:
        raise ContainerError(f"corrupt compressed file: {exc}") from exc


def _parse(buf):
    if buf[:4] != MAGIC:
        raise ContainerError("bad magic")
    pos = 4
    (version,) = struct.unpack_from("<I", buf, pos); pos += 4
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    (tlen,) = struct.unpack_from("<H", buf, pos); pos += 2
    tag = buf[pos:pos + tlen].decode(); pos += tlen
    n, leaf_size = struct.unpack_from("<QQ", buf, pos); pos += 16
    scalars = struct.unpack_from("<dQQ", buf, pos); pos += 24
    (count,) = struct.unpack_from("<Q", buf, pos); pos += 8
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, pos); pos += 2
        name = buf[pos:pos + nlen].decode(); pos += nlen
        code, ndim = struct.unpack_from("<BB", buf, pos); pos += 2
        shape = struct.unpack_from(f"<{ndim}Q", buf, pos); pos += 8 * ndim
        dt = _DTYPES[code]
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        raw = buf[pos:pos + size * dt.itemsize]
        if len(raw) != size * dt.itemsize:
            raise ContainerError("truncated array data")
        pos += size * dt.itemsize
        arrays[name] = np.frombuffer(raw, dtype=dt).reshape(shape[::-1]).T.copy()
    if pos != len(buf):
        raise ContainerError("trailing bytes after last array")
    return _build(tag, n, leaf_size, scalars, arrays)


def save_sidecar(mat, path: str) -> None:
    """Debug variant: JSON metadata at path.json, raw blob at path.bin."""
    tag, scalars, arrays = _flatten(mat)
    meta = {"format": tag, "version": VERSION, "n": mat.tree.n,
            "leaf_size": _leaf_size_of(mat.tree),
            "eps": scalars[0], "width": scalars[1], "seed": scalars[2],
            "arrays": []}
    blob = bytearray()
    for name, arr in arrays:
        arr = np.asarray(arr)
        code = _dtype_code(arr)
        meta["arrays"].append({"name": name, "dtype": int(code),
                               "shape": list(arr.shape), "offset": len(blob)})
        blob += np.ascontiguousarray(arr.T, dtype=_DTYPES[code]).tobytes()
    _atomic_write(path + ".json", json.dumps(meta, indent=1).encode())
    _atomic_write(path + ".bin", bytes(blob))


def load_sidecar(path: str):
    try:
        with open(path + ".json") as fh:
            meta = json.load(fh)
        with open(path + ".bin", "rb") as fh:
            blob = fh.read()
    except json.JSONDecodeError as exc:
        raise ContainerError(f"corrupt sidecar metadata: {exc}") from exc
    arrays = {}
    for ent in meta["arrays"]:
        dt = _DTYPES[ent["dtype"]]
        shape = tuple(ent["shape"])
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = blob[ent["offset"]:ent["offset"] + size * dt.itemsize]
        if len(raw) != size * dt.itemsize:
            raise ContainerError("truncated sidecar blob")
        arrays[ent["name"]] = np.frombuffer(raw, dtype=dt).reshape(shape[::-1]).T.copy()
    return _build(meta["format"], meta["n"], meta["leaf_size"],
                  (meta["eps"], meta["width"], meta["seed"]), arrays)


def _atomic_write(path: str, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
