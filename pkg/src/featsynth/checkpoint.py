"""Checkpoint archive: a zip of named .npy tensors plus a JSON manifest.

Key namespaces inside the archive:
  gan.*            mapping / g1 / g2 / disc weights
  cluster.centroids, cluster.tau, cluster.k
                   (+ cluster.feature_mean/feature_scale for whitened models)
  rearranger.*     attention + residual block weights
  segnet.*         one-shot segmentation head
  mapper.*         condition -> proxy-mask U-Net
The manifest records the full pipeline config, tensor dtypes/shapes, and a
content hash used as checkpoint id.  load(save(x)) is bitwise exact.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .cluster_proxy import ClusterModel
from .config import PipelineConfig
from .errors import ConfigMismatchError, CorruptArchiveError
from .gan_core import GanCore
from .rearranger import Rearranger
from .semantic_mapper import MapperUNet, SegNet, condition_channels, feature_stack_channels

FORMAT_VERSION = 1


@dataclass
class PipelineState:
    """Everything the inference paths need, bundled for (de)serialization."""

    cfg: PipelineConfig
    gan: GanCore | None = None
    cluster: ClusterModel | None = None
    rearranger: Rearranger | None = None
    segnet: SegNet | None = None
    mapper: MapperUNet | None = None
    checkpoint_id: str = ""
    extra: dict = field(default_factory=dict)


def _collect_tensors(state: PipelineState) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}

    def add_module(prefix: str, module: torch.nn.Module | None) -> None:
        if module is None:
            return
        for name, t in module.state_dict().items():
            tensors[f"{prefix}.{name}"] = t.detach().cpu().numpy()

    add_module("gan", state.gan)
    add_module("rearranger", state.rearranger)
    add_module("segnet", state.segnet)
    add_module("mapper", state.mapper)
    if state.cluster is not None:
        tensors["cluster.centroids"] = state.cluster.centroids
        tensors["cluster.tau"] = np.array(state.cluster.tau, dtype=np.float64)
        tensors["cluster.k"] = np.array(state.cluster.k, dtype=np.int64)
        if state.cluster.norm == "whiten":
            tensors["cluster.feature_mean"] = state.cluster.feature_mean
            tensors["cluster.feature_scale"] = state.cluster.feature_scale
    return tensors


def save_checkpoint(state: PipelineState, path: str | Path) -> str:
    """Write the archive; returns the checkpoint content hash."""
    tensors = _collect_tensors(state)
    digest = hashlib.sha256()
    entries: dict[str, bytes] = {}
    manifest_tensors = {}
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        buf = io.BytesIO()
        np.save(buf, arr)
        entries[name] = buf.getvalue()
        digest.update(name.encode())
        digest.update(entries[name])
        manifest_tensors[name] = {"dtype": str(arr.dtype), "shape": list(arr.shape)}
    checkpoint_id = digest.hexdigest()[:16]
    manifest = {
        "format_version": FORMAT_VERSION,
        "checkpoint_id": checkpoint_id,
        "config": state.cfg.to_dict(),
        "components": {
            "gan": state.gan is not None,
            "cluster": state.cluster is not None,
            "rearranger": state.rearranger is not None,
            "segnet": state.segnet is not None,
            "mapper": state.mapper is not None,
        },
        "tensors": manifest_tensors,
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=1))
        for name, data in entries.items():
            zf.writestr(name + ".npy", data)
    state.checkpoint_id = checkpoint_id
    return checkpoint_id


def _load_module(module: torch.nn.Module, prefix: str, tensors: dict[str, np.ndarray]) -> None:
    sd = {}
    for name, t in module.state_dict().items():
        key = f"{prefix}.{name}"
        if key not in tensors:
            raise CorruptArchiveError(f"missing tensor {key}")
        arr = tensors[key]
        if tuple(arr.shape) != tuple(t.shape):
            raise ConfigMismatchError(
                f"tensor {key} has shape {tuple(arr.shape)}, model expects {tuple(t.shape)}"
            )
        sd[name] = torch.from_numpy(arr.copy())
    module.load_state_dict(sd)


def _check_expected(stored: PipelineConfig, expected: PipelineConfig) -> None:
    checks = [
        ("cluster.k", stored.cluster.k, expected.cluster.k),
        ("gan.img_res", stored.gan.img_res, expected.gan.img_res),
        ("gan.proxy_res", stored.gan.proxy_res, expected.gan.proxy_res),
        ("gan.channels", stored.gan.channels, expected.gan.channels),
        ("gan.z_dim", stored.gan.z_dim, expected.gan.z_dim),
        ("mapper.seg_classes", stored.mapper.seg_classes, expected.mapper.seg_classes),
        ("mapper.condition_kind", stored.mapper.condition_kind, expected.mapper.condition_kind),
    ]
    for name, got, want in checks:
        if got != want:
            raise ConfigMismatchError(f"checkpoint {name}={got} but config expects {want}")


def load_checkpoint(path: str | Path, expected: PipelineConfig | None = None) -> PipelineState:
    """Read, validate, and rebuild every component present in the archive."""
    path = Path(path)
    if not path.is_file():
        raise CorruptArchiveError(f"checkpoint not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            tensors = {}
            for name, meta in manifest["tensors"].items():
                arr = np.load(io.BytesIO(zf.read(name + ".npy")))
                if list(arr.shape) != meta["shape"] or str(arr.dtype) != meta["dtype"]:
                    raise CorruptArchiveError(f"tensor {name} disagrees with manifest")
                tensors[name] = arr
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, ValueError, EOFError) as e:
        raise CorruptArchiveError(f"cannot read checkpoint {path}: {e}") from e

    if manifest.get("format_version") != FORMAT_VERSION:
        raise CorruptArchiveError(f"unsupported format version {manifest.get('format_version')}")
    cfg = PipelineConfig.from_dict(manifest["config"])
    if expected is not None:
        _check_expected(cfg, expected)

    comps = manifest["components"]
    state = PipelineState(cfg=cfg, checkpoint_id=manifest["checkpoint_id"])
    if comps["gan"]:
        state.gan = GanCore(cfg.gan)
        _load_module(state.gan, "gan", tensors)
        state.gan.eval()
    if comps["cluster"]:
        k = int(tensors["cluster.k"].item())
        cen = tensors["cluster.centroids"]
        if cen.shape[0] != k or k != cfg.cluster.k:
            raise ConfigMismatchError(
                f"cluster K mismatch: tensors say {cen.shape[0]}/{k}, config says {cfg.cluster.k}"
            )
        state.cluster = ClusterModel(
            centroids=cen, tau=float(tensors["cluster.tau"].item()),
            norm=cfg.cluster.feature_norm,
            feature_mean=tensors.get("cluster.feature_mean"),
            feature_scale=tensors.get("cluster.feature_scale"),
        )
    if comps["rearranger"]:
        state.rearranger = Rearranger(cfg.gan, cfg.rearranger, cfg.cluster.k)
        _load_module(state.rearranger, "rearranger", tensors)
        state.rearranger.eval()
    if comps["segnet"]:
        state.segnet = SegNet(feature_stack_channels(cfg.gan), cfg.mapper.seg_classes,
                              cfg.mapper.segnet_hidden)
        _load_module(state.segnet, "segnet", tensors)
        state.segnet.eval()
    if comps["mapper"]:
        in_ch = condition_channels(cfg.mapper.condition_kind, cfg.mapper.seg_classes)
        state.mapper = MapperUNet(in_ch, cfg.cluster.k, cfg.gan.img_res,
                                  cfg.gan.proxy_res, cfg.mapper.unet_width)
        _load_module(state.mapper, "mapper", tensors)
        state.mapper.eval()
    return state
