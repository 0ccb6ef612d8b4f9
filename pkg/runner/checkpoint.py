"""Binary head checkpoints.

Layout (little-endian):
    b"STCXCKPT" | u32 version | u64 step
    u32 len | config JSON (canonical)
    u32 count | count x tensor        parameters
    u32 count | count x tensor        optimizer velocities
tensor := u32 name_len | name | u32 ndim | ndim x u32 | float64 data
"""

import io
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, Union

import numpy as np

from core.errors import CheckpointError, ConfigurationError
from model.params import HeadParams, init_params, named_parameters
from runner.config_loader import RunConfig, config_from_dict

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"STCXCKPT"
CHECKPOINT_VERSION = 1

PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    config: RunConfig
    parameters: Dict[str, np.ndarray]
    velocities: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    version: int = CHECKPOINT_VERSION

    @classmethod
    def capture(cls, config: RunConfig, params: HeadParams, velocities: Dict[str, np.ndarray], step: int) -> "Checkpoint":
        return cls(
            config=config,
            parameters={name: t.data.copy() for name, t in named_parameters(params)},
            velocities={name: v.copy() for name, v in velocities.items()},
            step=step,
        )


def _write_u32(out: BinaryIO, value: int) -> None:
    out.write(struct.pack("<I", value))


def _read(stream: BinaryIO, size: int, what: str) -> bytes:
    chunk = stream.read(size)
    if len(chunk) != size:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return chunk


def _read_u32(stream: BinaryIO, what: str) -> int:
    return struct.unpack("<I", _read(stream, 4, what))[0]


def _write_tensors(out: BinaryIO, tensors: Dict[str, np.ndarray]) -> None:
    _write_u32(out, len(tensors))
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        _write_u32(out, len(encoded))
        out.write(encoded)
        _write_u32(out, array.ndim)
        for extent in array.shape:
            _write_u32(out, extent)
        out.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def _read_tensors(stream: BinaryIO) -> Dict[str, np.ndarray]:
    tensors = {}
    for _ in range(_read_u32(stream, "tensor count")):
        name = _read(stream, _read_u32(stream, "name length"), "tensor name").decode("utf-8")
        shape = tuple(_read_u32(stream, f"{name} shape") for _ in range(_read_u32(stream, f"{name} rank")))
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(_read(stream, 8 * count, f"{name} data"), dtype="<f8").astype(np.float64)
        if name in tensors:
            raise CheckpointError(f"duplicate tensor {name!r} in checkpoint")
        tensors[name] = data.reshape(shape)
    return tensors


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    out = io.BytesIO()
    out.write(CHECKPOINT_MAGIC)
    out.write(struct.pack("<IQ", ckpt.version, ckpt.step))
    config = ckpt.config.to_json().encode("utf-8")
    _write_u32(out, len(config))
    out.write(config)
    _write_tensors(out, ckpt.parameters)
    _write_tensors(out, ckpt.velocities)
    return out.getvalue()


def decode_checkpoint(payload: bytes) -> Checkpoint:
    stream = io.BytesIO(payload)
    if _read(stream, len(CHECKPOINT_MAGIC), "magic") != CHECKPOINT_MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version, step = struct.unpack("<IQ", _read(stream, 12, "header"))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    raw = _read(stream, _read_u32(stream, "config length"), "config")
    try:
        config = config_from_dict(json.loads(raw.decode("utf-8")))
    except (ValueError, ConfigurationError) as e:
        raise CheckpointError(f"checkpoint carries an invalid config snapshot: {e}") from e
    parameters = _read_tensors(stream)
    velocities = _read_tensors(stream)
    if stream.read(1):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return Checkpoint(config=config, parameters=parameters, velocities=velocities, step=step, version=version)


def save_checkpoint(path: PathLike, ckpt: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(ckpt))
    logger.info(f"checkpoint at step {ckpt.step} written to {path}")
    return path


def load_checkpoint(path: PathLike) -> Checkpoint:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except FileNotFoundError as e:
        raise CheckpointError(f"checkpoint not found: {path}") from e
    return decode_checkpoint(payload)


def restore_params(ckpt: Checkpoint, config: RunConfig) -> HeadParams:
    """Head parameters for `config`, filled from the checkpoint; any name or shape mismatch is an error."""
    dims = config.head_dims()
    if ckpt.config.head_dims() != dims:
        raise CheckpointError(f"checkpoint was trained with {ckpt.config.head_dims()}, config asks for {dims}")
    params = init_params(dims, config.run.seed)
    expected = dict(named_parameters(params))
    missing = sorted(set(expected) - set(ckpt.parameters))
    extra = sorted(set(ckpt.parameters) - set(expected))
    if missing or extra:
        raise CheckpointError(f"checkpoint parameters do not match the head: missing {missing}, unexpected {extra}")
    for name, target in expected.items():
        array = ckpt.parameters[name]
        if array.shape != target.shape:
            raise CheckpointError(f"{name}: checkpoint shape {array.shape} != head shape {target.shape}")
        target.data = array.copy()
    return params
