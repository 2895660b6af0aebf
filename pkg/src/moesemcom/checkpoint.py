"""Binary persistence for experts and the gate.

Layout: magic ``SMCK``, one version byte (0x01), a little-endian u32
manifest length, the UTF-8 JSON manifest (module names, tensor names,
shapes, byte offsets), then every tensor as little-endian float32 in
manifest order.

Parameters train in float64 and quantize to float32 exactly once, on
their first save. Loading widens back to float64 without changing any
value, so save -> load -> save reproduces the file byte-for-byte and
every later round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import CheckpointError
from .experts.models import D_SEM, ChannelPair, CompressorPair, PrivateMixers
from .experts.models import build_classifier, build_semantic_encoder
from .experts.pipeline import CodecBundle, CovertBundle, PrivateBundle
from .experts.registry import (
    COVERT,
    NORMAL,
    PRIVATE,
    ROBUST,
    ExpertRegistry,
    TrainedExpert,
)
from .gating import GATE_HIDDEN, GateModel, N_POOLED
from .nn import ParameterSet
from .prng import Stream

MAGIC = b"SMCK"
VERSION = 1
_GATE_MODULE = "gate"


@dataclass
class CheckpointModule:
    name: str
    manifest: dict
    arrays: dict  # tensor name -> float64 ndarray


@dataclass
class Checkpoint:
    k: int
    modules: dict  # module name -> CheckpointModule


def _module_name(expert: TrainedExpert) -> str:
    if expert.kind == COVERT:
        return f"covert:{expert.rho:g}"
    return expert.kind


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def save_checkpoint(registry: ExpertRegistry, gate: Optional[GateModel],
                    path) -> None:
    modules = []
    blobs = []
    offset = 0

    def pack(name: str, manifest: dict, params: ParameterSet):
        nonlocal offset
        tensors = []
        for tname, tensor in params.items():
            raw = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
            tensors.append({"name": tname, "shape": list(tensor.data.shape),
                            "offset": offset})
            blobs.append(raw)
            offset += len(raw)
        modules.append({"name": name, "manifest": manifest, "tensors": tensors})

    for expert in registry.all_experts():
        pack(_module_name(expert), expert.manifest, expert.params)
    if gate is not None:
        pack(_GATE_MODULE, gate.manifest, gate.params)

    manifest = json.dumps({"k": registry.k, "modules": modules},
                          sort_keys=True, separators=(",", ":"),
                          default=_json_default).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError:
        raise CheckpointError("truncated", f"checkpoint not found: {path}") \
            from None
    if len(data) < 9:
        raise CheckpointError("truncated", "file too short for the header")
    if data[:4] != MAGIC:
        raise CheckpointError("bad_magic", "not a checkpoint file")
    if data[4] != VERSION:
        raise CheckpointError("bad_version",
                              f"unsupported version {data[4]}, expected {VERSION}")
    (mlen,) = struct.unpack("<I", data[5:9])
    if len(data) < 9 + mlen:
        raise CheckpointError("truncated", "manifest is cut off")
    try:
        manifest = json.loads(data[9:9 + mlen].decode("utf-8"))
        k = int(manifest["k"])
        module_specs = manifest["modules"]
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise CheckpointError("integrity", f"manifest is damaged: {exc}") \
            from None

    blob = data[9 + mlen:]
    expected = 0
    for spec in module_specs:
        for t in spec["tensors"]:
            if t["offset"] != expected:
                raise CheckpointError(
                    "integrity", f"tensor {t['name']} at unexpected offset")
            expected += 4 * int(np.prod(t["shape"], dtype=np.int64))
    if len(blob) < expected:
        raise CheckpointError("truncated", "tensor blob is cut off")
    if len(blob) > expected:
        raise CheckpointError("integrity", "trailing bytes after tensor blob")

    modules = {}
    for spec in module_specs:
        arrays = {}
        for t in spec["tensors"]:
            n = int(np.prod(t["shape"], dtype=np.int64))
            arr = np.frombuffer(blob, dtype="<f4", count=n,
                                offset=t["offset"]).astype(np.float64)
            arrays[t["name"]] = arr.reshape(t["shape"])
        modules[spec["name"]] = CheckpointModule(spec["name"],
                                                 spec["manifest"], arrays)
    return Checkpoint(k=k, modules=modules)


def _fill(params: ParameterSet, arrays: dict, module: str) -> None:
    if set(params.names()) != set(arrays):
        raise CheckpointError(
            "integrity", f"module {module} tensor names do not match its kind")
    for name in params.names():
        if params[name].data.shape != arrays[name].shape:
            raise CheckpointError(
                "integrity", f"module {module} tensor {name} has a wrong shape")
        params[name].data[...] = arrays[name]
    params.freeze()


def _rebuild_expert(module: CheckpointModule, k: int) -> TrainedExpert:
    kind = module.manifest.get("kind", module.name)
    ps = ParameterSet()
    dummy = Stream.from_root(0, "rebuild")
    if kind in (NORMAL, ROBUST):
        model = CodecBundle(build_semantic_encoder(ps, dummy),
                            ChannelPair(ps, dummy, D_SEM),
                            build_classifier(ps, dummy, k))
    elif kind == COVERT:
        d_prime = int(module.manifest["d_prime"])
        model = CovertBundle(CompressorPair(ps, dummy, D_SEM, d_prime),
                             ChannelPair(ps, dummy, d_prime),
                             float(module.manifest["rho"]), d_prime)
    elif kind == PRIVATE:
        model = PrivateBundle(PrivateMixers(ps, dummy),
                              int(module.manifest["secret_seed"]),
                              int(module.manifest["key_len"]))
    else:
        # extension kinds round-trip parameters only; the live model is
        # whatever registered them
        for name, arr in module.arrays.items():
            ps.add(name, arr.copy())
        ps.freeze()
        return TrainedExpert(kind, ps, module.manifest, None)
    _fill(ps, module.arrays, module.name)
    return TrainedExpert(kind, ps, module.manifest, model)


def _rebuild_gate(module: CheckpointModule) -> GateModel:
    try:
        kinds = tuple(module.manifest["kinds"])
    except (KeyError, TypeError):
        raise CheckpointError("integrity", "gate module lacks its kind order") \
            from None
    ps = ParameterSet()
    for name, arr in module.arrays.items():
        ps.add(name, arr.copy())
    gate = GateModel(kinds, ps)
    d_in = 4 + N_POOLED + len(gate.extension_kinds)
    if ("gate.w1" not in ps or "gate.w2" not in ps
            or ps["gate.w1"].data.shape != (d_in, GATE_HIDDEN)
            or ps["gate.w2"].data.shape != (GATE_HIDDEN, len(kinds))):
        raise CheckpointError("integrity", "gate tensor shapes are inconsistent")
    ps.freeze()
    gate.manifest = module.manifest
    return gate


def restore(checkpoint: Checkpoint) -> Tuple[ExpertRegistry, Optional[GateModel]]:
    """Live registry and gate from loaded arrays."""
    registry = ExpertRegistry(k=checkpoint.k)
    gate = None
    for name, module in checkpoint.modules.items():
        if name == _GATE_MODULE:
            gate = _rebuild_gate(module)
        else:
            registry.register(_rebuild_expert(module, checkpoint.k))
    return registry, gate
