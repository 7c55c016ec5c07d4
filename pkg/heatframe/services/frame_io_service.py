"""
Versioned `.hkf` frame container: a numpy zip archive holding one JSON metadata
record plus every array needed to rebuild a FrameSystem bit-exactly.
"""
import json
import logging
import zipfile
from pathlib import Path
from typing import Union

import numpy as np

from .cutoff_service import make_cutoff
from .frame_service import FrameLevel, FrameSystem
from .model_space_service import build_model
from .net_service import NetLevel
from ..models.errors import FrameFormatError
from ..models.spectral_data import CubatureReport, CutoffKind, FrameVariant, SpaceDescriptor

logger = logging.getLogger(__name__)

FORMAT_NAME = "heatframe-hkf"
FORMAT_VERSION = "2"

NET_ARRAYS = ("centers", "assignment", "cells", "partner")

PathLike = Union[str, Path]


def save_frame(frame: FrameSystem, path: PathLike) -> Path:
    """Write the frame; the file name is kept as given (no .npz suffix is appended)."""
    path = Path(path)
    levels_meta, arrays = [], {}
    for level in frame.levels:
        net = level.net
        prefix = f"level{level.j}_"
        arrays[prefix + "centers"] = net.center_nodes
        arrays[prefix + "assignment"] = net.assignment
        arrays[prefix + "cells"] = net.cell_measures
        arrays[prefix + "partner"] = net.partner if net.partner is not None else np.full_like(net.assignment, -1)
        if net.weights is not None:
            arrays[prefix + "weights"] = net.weights
        if level.active is not None:
            arrays[prefix + "active"] = level.active
            arrays[prefix + "residual"] = level.residual
        levels_meta.append({
            "j": level.j,
            "gamma": level.gamma,
            "delta": net.delta,
            "offset": level.offset,
            "band": level.band,
            "residual_norm": level.residual_norm,
            "sampling_epsilon": level.sampling_epsilon,
            "cubature": net.cubature.model_dump() if net.cubature is not None else None,
        })

    meta = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "space": frame.model.descriptor.model_dump(mode="json"),
        "variant": frame.variant.value,
        "b": frame.b,
        "J": frame.J,
        "cutoff": {"epsilon": frame.phi.epsilon, "k_max": frame.phi.k_max},
        "levels": levels_meta,
    }
    arrays["primal"] = frame.primal
    if frame.dual is not None:
        arrays["dual"] = frame.dual
    arrays["element_weights"] = frame.element_weights

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        np.savez(handle, meta=np.array(json.dumps(meta)), **arrays)
    logger.info(f"Saved {frame.variant.value} frame ({frame.size} elements) to {path}")
    return path


def _read_archive(path: Path) -> dict:
    try:
        with np.load(path, allow_pickle=False) as archive:
            contents = {name: np.array(archive[name]) for name in archive.files}
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise FrameFormatError(f"{path} is not a readable frame file: {e}") from e
    if "meta" not in contents:
        raise FrameFormatError(f"{path} carries no metadata record")
    try:
        meta = json.loads(str(contents.pop("meta")))
    except json.JSONDecodeError as e:
        raise FrameFormatError(f"{path} has corrupt metadata: {e}") from e
    if meta.get("format") != FORMAT_NAME:
        raise FrameFormatError(f"{path} is not a heatframe file", found=meta.get("format"),
                               expected=FORMAT_NAME)
    if meta.get("format_version") != FORMAT_VERSION:
        raise FrameFormatError(f"unsupported frame format version {meta.get('format_version')}",
                               found=str(meta.get("format_version")), expected=FORMAT_VERSION)
    contents["meta"] = meta
    return contents


def load_frame(path: PathLike) -> FrameSystem:
    """Rebuild a FrameSystem; nothing is constructed until the whole file validates."""
    path = Path(path)
    contents = _read_archive(path)
    meta = contents["meta"]
    try:
        descriptor = SpaceDescriptor(**meta["space"])
        required = ["primal", "element_weights"] + [
            f"level{lv['j']}_{name}" for lv in meta["levels"] for name in NET_ARRAYS]
        variant = FrameVariant(meta["variant"])
        b, J = float(meta["b"]), int(meta["J"])
        epsilon, k_max = float(meta["cutoff"]["epsilon"]), int(meta["cutoff"]["k_max"])
    except (KeyError, TypeError, ValueError) as e:
        raise FrameFormatError(f"{path} has incomplete metadata: {e}") from e
    missing = [name for name in required if name not in contents]
    if missing:
        raise FrameFormatError(f"{path} is missing arrays {missing}")

    model = build_model(descriptor)
    levels = []
    for entry in meta["levels"]:
        prefix = f"level{entry['j']}_"
        cubature = CubatureReport(**entry["cubature"]) if entry.get("cubature") else None
        arrays = [contents[prefix + name] for name in NET_ARRAYS]
        for array in arrays:
            array.setflags(write=False)
        net = NetLevel(model=model, delta=float(entry["delta"]), center_nodes=arrays[0],
                       assignment=arrays[1], cell_measures=arrays[2], partner=arrays[3],
                       weights=contents.get(prefix + "weights"), cubature=cubature)
        levels.append(FrameLevel(j=int(entry["j"]), net=net, gamma=float(entry["gamma"]),
                                 offset=int(entry["offset"]), band=float(entry["band"]),
                                 residual_norm=entry.get("residual_norm"),
                                 sampling_epsilon=entry.get("sampling_epsilon"),
                                 active=contents.get(prefix + "active"),
                                 residual=contents.get(prefix + "residual")))

    phi = make_cutoff(CutoffKind.TYPE_A, b=b, epsilon=epsilon, k_max=k_max)
    frame = FrameSystem(model, variant, phi, b, J, levels, contents["primal"], contents.get("dual"),
                        element_weights=contents["element_weights"])
    logger.info(f"Loaded {variant.value} frame ({frame.size} elements) from {path}")
    return frame
