"""Versioned model files.

Layout::

    magic      8 bytes   b"DIFFRFM\\n"
    version    uint32 LE
    hlen       uint64 LE length of the JSON header
    header     UTF-8 JSON: kind, config, fingerprint, metadata, array manifest,
               payload length and SHA-256
    payload    raw little-endian array bytes, in manifest order

Arrays are written byte-for-byte, so a reloaded model scores bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CorruptModelError, ModelFileError, ModelVersionError
from .forest import Forest, ForestConfig, Tree
from .iforest import IsoForest

MAGIC = b"DIFFRFM\n"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_MAX_HEADER = 1 << 24

_TOPOLOGY = ("feature", "threshold", "left", "right", "leaf_index", "leaf_count", "leaf_depth")
_DTYPES = {"feature": "<i4", "threshold": "<f8", "left": "<i4", "right": "<i4",
           "leaf_index": "<i4", "leaf_count": "<i8", "leaf_depth": "<i4",
           "centroid": "<f8", "sigma": "<f8", "node_offsets": "<i8", "leaf_offsets": "<i8"}


def fingerprint(X):
    """Row/column counts and SHA-256 of the float64 training matrix."""
    arr = np.ascontiguousarray(X, dtype="<f8")
    return {"rows": int(arr.shape[0]), "dims": int(arr.shape[1]),
            "sha256": hashlib.sha256(arr.tobytes()).hexdigest()}


@dataclass
class ModelFile:
    model: object
    fingerprint: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def kind(self):
        return self.model.kind

    @property
    def config(self):
        return self.model.config


def _config_dict(cfg):
    return {"tree_count": int(cfg.tree_count), "sample_size": int(cfg.sample_size),
            "alpha": float(cfg.alpha), "height_factor": float(cfg.height_factor),
            "seed": int(cfg.seed)}


def _arrays(model):
    trees = model.trees
    out = {}
    for name in _TOPOLOGY:
        out[name] = np.concatenate([getattr(t, name) for t in trees])
    out["node_offsets"] = np.cumsum([0] + [t.n_nodes for t in trees])
    out["leaf_offsets"] = np.cumsum([0] + [t.n_leaves for t in trees])
    if model.kind == "diff-rf":
        out["centroid"] = model.packed.centroid
        out["sigma"] = model.packed.sigma
    return {k: np.ascontiguousarray(v, dtype=_DTYPES[k]) for k, v in out.items()}


def save_model(model, path, *, fingerprint=None, metadata=None):
    """Write ``model`` (a Forest, IsoForest or ModelFile) to ``path`` atomically."""
    if isinstance(model, ModelFile):
        fingerprint = model.fingerprint if fingerprint is None else fingerprint
        metadata = model.metadata if metadata is None else metadata
        model = model.model
    if getattr(model, "kind", None) not in ("diff-rf", "iforest"):
        raise ModelFileError(f"cannot save object of type {type(model).__name__}")
    arrays = _arrays(model)
    manifest, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        raw = arr.tobytes()
        manifest.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                         "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "kind": model.kind,
        "config": _config_dict(model.config),
        "n_features": int(model.n_features),
        "fingerprint": dict(fingerprint or {}),
        "metadata": dict(metadata or {}),
        "arrays": manifest,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(hbytes)) + hbytes + payload
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(prefix=".diffrf-", dir=directory)
    except OSError as exc:
        raise ModelFileError(f"{path}: cannot write: {exc.strerror}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise ModelFileError(f"{path}: cannot write: {exc.strerror}") from exc


def load_model(path):
    """Read and validate a model file; returns a :class:`ModelFile`."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ModelFileError(f"{path}: cannot read: {exc.strerror}") from exc
    if len(blob) < _PREFIX.size:
        raise CorruptModelError(f"{path}: truncated (only {len(blob)} bytes)")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptModelError(f"{path}: not a model file (bad magic)")
    if version != FORMAT_VERSION:
        raise ModelVersionError(
            f"{path}: model format version {version}, this build reads version {FORMAT_VERSION}")
    if hlen > _MAX_HEADER or _PREFIX.size + hlen > len(blob):
        raise CorruptModelError(f"{path}: truncated header")
    try:
        header = json.loads(blob[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModelError(f"{path}: unreadable header: {exc}") from None
    payload = blob[_PREFIX.size + hlen:]
    try:
        expected = int(header["payload_bytes"])
        digest = header["payload_sha256"]
    except (KeyError, TypeError, ValueError):
        raise CorruptModelError(f"{path}: header lacks payload description") from None
    if len(payload) != expected:
        raise CorruptModelError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    if hashlib.sha256(payload).hexdigest() != digest:
        raise CorruptModelError(f"{path}: payload checksum mismatch")
    try:
        model = _rebuild(header, payload)
    except CorruptModelError as exc:
        raise CorruptModelError(f"{path}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelError(f"{path}: inconsistent model: {exc}") from None
    return ModelFile(model, header.get("fingerprint", {}), header.get("metadata", {}), version)


def _rebuild(header, payload):
    kind = header["kind"]
    if kind not in ("diff-rf", "iforest"):
        raise CorruptModelError(f"unknown detector kind {kind!r}")
    cfg = ForestConfig(**header["config"])
    d = int(header["n_features"])
    arrays = {}
    for item in header["arrays"]:
        name = item["name"]
        if name not in _DTYPES or np.dtype(item["dtype"]) != np.dtype(_DTYPES[name]):
            raise CorruptModelError(f"unexpected array {name!r} of dtype {item['dtype']}")
        lo, hi = int(item["offset"]), int(item["offset"]) + int(item["nbytes"])
        if hi > len(payload):
            raise CorruptModelError(f"array {name!r} runs past the payload")
        arr = np.frombuffer(payload[lo:hi], dtype=_DTYPES[name]).reshape(item["shape"])
        arrays[name] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    need = set(_TOPOLOGY) | {"node_offsets", "leaf_offsets"}
    if kind == "diff-rf":
        need |= {"centroid", "sigma"}
    missing = need - arrays.keys()
    if missing:
        raise CorruptModelError(f"missing arrays: {', '.join(sorted(missing))}")
    trees = _split_trees(arrays, cfg, d, with_stats=kind == "diff-rf")
    if kind == "diff-rf":
        return Forest(config=cfg, n_features=d, trees=trees)
    return IsoForest(cfg, d, trees)


def _split_trees(a, cfg, d, with_stats):
    nodes, leaves = a["node_offsets"], a["leaf_offsets"]
    t = cfg.tree_count
    if len(nodes) != t + 1 or len(leaves) != t + 1:
        raise CorruptModelError(f"offset tables do not describe {t} trees")
    if nodes[0] != 0 or leaves[0] != 0 or (np.diff(nodes) < 1).any() or (np.diff(leaves) < 1).any():
        raise CorruptModelError("offset tables are not increasing")
    if nodes[-1] != len(a["feature"]) or leaves[-1] != len(a["leaf_count"]):
        raise CorruptModelError("offset tables disagree with array lengths")
    if with_stats and (a["centroid"].shape != (leaves[-1], d) or a["sigma"].shape != (leaves[-1], d)):
        raise CorruptModelError("leaf statistics have the wrong shape")
    h_max = cfg.max_height
    trees = []
    for k in range(t):
        n0, n1, l0, l1 = nodes[k], nodes[k + 1], leaves[k], leaves[k + 1]
        tree = Tree(**{name: a[name][n0:n1] for name in ("feature", "threshold", "left", "right",
                                                         "leaf_index")},
                    leaf_count=a["leaf_count"][l0:l1], leaf_depth=a["leaf_depth"][l0:l1],
                    sample_size=cfg.sample_size)
        if with_stats:
            tree.centroid = a["centroid"][l0:l1]
            tree.sigma = a["sigma"][l0:l1]
        _verify_tree(tree, k, d, h_max)
        trees.append(tree)
    return trees


def _verify_tree(tree, k, d, h_max):
    n, m = tree.n_nodes, tree.n_leaves
    internal = tree.feature >= 0
    if (tree.feature >= d).any() or (tree.feature < -1).any():
        raise CorruptModelError(f"tree {k}: split feature out of range")
    if (internal == (tree.leaf_index >= 0)).any():
        raise CorruptModelError(f"tree {k}: node kinds disagree with leaf indices")
    if sorted(tree.leaf_index[~internal].tolist()) != list(range(m)):
        raise CorruptModelError(f"tree {k}: leaf indices are not a permutation")
    kids = np.concatenate([tree.left[internal], tree.right[internal]])
    if ((kids <= 0) | (kids >= n)).any() or len(np.unique(kids)) != len(kids) or len(kids) != n - 1:
        raise CorruptModelError(f"tree {k}: child links do not form a tree")
    if not np.isfinite(tree.threshold[internal]).all():
        raise CorruptModelError(f"tree {k}: non-finite split value")
    if int(tree.leaf_count.sum()) != tree.sample_size or (tree.leaf_count < 1).any():
        raise CorruptModelError(f"tree {k}: leaf counts do not sum to the sample size")
    if (tree.leaf_depth < 0).any() or (tree.leaf_depth > h_max).any():
        raise CorruptModelError(f"tree {k}: leaf depth outside [0, {h_max}]")
    if tree.centroid is not None:
        if not np.isfinite(tree.centroid).all() or not (tree.sigma > 0).all():
            raise CorruptModelError(f"tree {k}: invalid leaf statistics")
