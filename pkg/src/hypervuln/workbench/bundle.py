"""Versioned model bundle: everything ``detect`` needs, in one file.

Layout: the 8-byte magic ``HVBUNDLE``, a 2-byte big-endian format version,
then an uncompressed zip archive holding ``meta.json`` and one ``.npy`` file
per array. Zip timestamps are pinned so identical bundles are identical
bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..clustering import Hyperedge
from ..detector import FeatureScaler, HgnnParams
from ..embedding import EmbeddingTable, Vocabulary
from ..errors import VersionError
from ..ggnn import GgnnParams
from .config import PipelineConfig

MAGIC = b"HVBUNDLE"
BUNDLE_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class ModelBundle:
    config: PipelineConfig
    vocab: Vocabulary
    table: EmbeddingTable
    ggnn: GgnnParams
    centroids: np.ndarray
    hyperedges: list
    function_ids: list
    features: np.ndarray
    scaler: FeatureScaler
    hgnn: HgnnParams
    api_list: frozenset

    def to_bytes(self) -> bytes:
        meta = {
            "config": self.config.to_dict(),
            "vocab": self.vocab.tokens(),
            "steps": self.ggnn.steps,
            "hyperedges": [{"cluster": e.cluster, "members": list(e.members)} for e in self.hyperedges],
            "function_ids": list(self.function_ids),
            "hgnn_b": self.hgnn.b,
            "hgnn_layers": self.hgnn.layers,
            "api_list": sorted(self.api_list),
        }
        arrays = {"embedding": self.table.matrix, "centroids": self.centroids, "features": self.features,
                  "hgnn_w": self.hgnn.w, "scaler_mean": self.scaler.mean, "scaler_scale": self.scaler.scale}
        arrays.update({f"ggnn_{k}": v for k, v in self.ggnn.arrays().items()})
        arrays.update({f"hgnn_beta{i}": b for i, b in enumerate(self.hgnn.betas)})
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
            zf.writestr(zipfile.ZipInfo("meta.json", _EPOCH), json.dumps(meta, sort_keys=True))
            for name in sorted(arrays):
                arr_buf = io.BytesIO()
                np.lib.format.write_array(arr_buf, np.ascontiguousarray(arrays[name], dtype=np.float64),
                                          allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(f"{name}.npy", _EPOCH), arr_buf.getvalue())
        return MAGIC + struct.pack(">H", BUNDLE_VERSION) + buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ModelBundle":
        if data[:len(MAGIC)] != MAGIC:
            raise VersionError("not a model bundle (bad magic bytes)")
        (version,) = struct.unpack(">H", data[len(MAGIC):len(MAGIC) + 2])
        if version != BUNDLE_VERSION:
            raise VersionError(f"bundle format version {version} is not supported (expected {BUNDLE_VERSION})")
        try:
            zf = zipfile.ZipFile(io.BytesIO(data[len(MAGIC) + 2:]))
            meta = json.loads(zf.read("meta.json"))
            arrays = {
                name[:-4]: np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)
                for name in zf.namelist() if name.endswith(".npy")
            }
        except (zipfile.BadZipFile, KeyError, ValueError) as exc:
            raise VersionError(f"corrupted bundle: {exc}") from None
        ggnn = GgnnParams(**{k[5:]: v for k, v in arrays.items() if k.startswith("ggnn_")}, steps=meta["steps"])
        betas = [arrays[f"hgnn_beta{i}"] for i in range(meta["hgnn_layers"])]
        return cls(
            config=PipelineConfig.from_dict(meta["config"]),
            vocab=Vocabulary({tok: i for i, tok in enumerate(meta["vocab"])}),
            table=EmbeddingTable(arrays["embedding"]),
            ggnn=ggnn,
            centroids=arrays["centroids"],
            hyperedges=[Hyperedge(e["cluster"], tuple(e["members"])) for e in meta["hyperedges"]],
            function_ids=meta["function_ids"],
            features=arrays["features"],
            scaler=FeatureScaler(arrays["scaler_mean"], arrays["scaler_scale"]),
            hgnn=HgnnParams(betas, arrays["hgnn_w"], meta["hgnn_b"]),
            api_list=frozenset(meta["api_list"]),
        )

    def checksum(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def save_bundle(bundle: ModelBundle, path) -> Path:
    path = Path(path)
    try:
        path.write_bytes(bundle.to_bytes())
    except OSError as exc:
        raise OSError(f"cannot write bundle to {path}: {exc.strerror}") from exc
    return path


def load_bundle(path) -> ModelBundle:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read bundle {path}: {exc.strerror}") from exc
    return ModelBundle.from_bytes(data)
