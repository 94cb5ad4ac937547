"""Versioned JSON checkpoints and byte-stable artifact serialization.

A checkpoint is one JSON document holding the network configuration and
weights (base64 little-endian float64 blobs in declared order), the noise
schedule parameters, the fitted encoder, and the training metadata. All JSON
written here is canonical -- sorted keys, compact separators, no timestamps --
so identical runs produce identical bytes.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .encoding import TabularEncoder
from .errors import ConfigError
from .network import DenoiserNet
from .schedule import NoiseSchedule, build_schedule

CHECKPOINT_VERSION = 1
CHECKPOINT_KIND = "tabguide-checkpoint"
INTERPOLATION = "linear"


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, compact, no NaN/Infinity."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(obj))
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def sha256_of_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_of_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype=np.float64).astype("<f8")
    return {"shape": list(arr.shape),
            "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _decode_array(doc: dict, name: str) -> np.ndarray:
    shape = tuple(int(s) for s in doc["shape"])
    raw = base64.b64decode(doc["data"])
    arr = np.frombuffer(raw, dtype="<f8")
    if arr.size != int(np.prod(shape)):
        raise ConfigError(
            f"checkpoint: blob {name!r} holds {arr.size} values, shape "
            f"{shape} needs {int(np.prod(shape))}")
    return arr.reshape(shape).astype(np.float64)


def schedule_to_json(sched: NoiseSchedule) -> dict:
    return {"steps": sched.steps,
            "alpha_first": float(sched.alpha[1]),
            "alpha_last": float(sched.alpha[sched.steps]),
            "interpolation": INTERPOLATION}


def schedule_from_json(doc: dict) -> NoiseSchedule:
    tag = doc.get("interpolation", INTERPOLATION)
    if tag != INTERPOLATION:
        raise ConfigError(
            f"unsupported schedule interpolation {tag!r}; this build only "
            f"knows {INTERPOLATION!r}")
    return build_schedule(int(doc["steps"]), float(doc["alpha_first"]),
                          float(doc["alpha_last"]))


@dataclass
class Checkpoint:
    """A loaded checkpoint: live objects plus the training metadata."""

    net: DenoiserNet
    sched: NoiseSchedule
    encoder: TabularEncoder
    train_meta: dict


def checkpoint_to_dict(net: DenoiserNet, sched: NoiseSchedule,
                       encoder: TabularEncoder, train_meta: dict) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "kind": CHECKPOINT_KIND,
        "network": {
            "config": net.config(),
            "param_order": list(net.param_names),
            "params": {name: _encode_array(net.params[name])
                       for name in net.param_names},
        },
        "schedule": schedule_to_json(sched),
        "encoder": encoder.to_json_dict(),
        "train": dict(train_meta),
    }


def checkpoint_from_dict(doc: dict) -> Checkpoint:
    if not isinstance(doc, dict) or doc.get("kind") != CHECKPOINT_KIND:
        raise ConfigError("not a model checkpoint document")
    version = doc.get("version")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(
            f"checkpoint version {version!r} is not supported; expected "
            f"{CHECKPOINT_VERSION}")
    net_doc = doc["network"]
    net = DenoiserNet(**net_doc["config"])
    order = list(net_doc["param_order"])
    if order != net.param_names:
        raise ConfigError(
            f"checkpoint parameter order {order} does not match the "
            f"declared network layout {net.param_names}")
    for name in order:
        blob = _decode_array(net_doc["params"][name], name)
        if blob.shape != net.params[name].shape:
            raise ConfigError(
                f"checkpoint: parameter {name!r} has shape {blob.shape}, "
                f"network expects {net.params[name].shape}")
        net.params[name] = blob
    return Checkpoint(
        net=net,
        sched=schedule_from_json(doc["schedule"]),
        encoder=TabularEncoder.from_json_dict(doc["encoder"]),
        train_meta=dict(doc.get("train", {})))


def save_checkpoint(path, net: DenoiserNet, sched: NoiseSchedule,
                    encoder: TabularEncoder, train_meta: dict) -> None:
    write_json(path, checkpoint_to_dict(net, sched, encoder, train_meta))


def load_checkpoint(path) -> Checkpoint:
    try:
        doc = read_json(path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"checkpoint {path} is not valid JSON: {exc}")
    return checkpoint_from_dict(doc)
