"""
Flight Stack - Network Checkpoints

Layout (all integers little-endian):
    magic       8 bytes   b"FSNNCKPT"
    version     u32
    header_len  u32
    header      YAML text: input_shape, layers, param_count, metadata
    params      param_count little-endian f32 values
"""

import hashlib
import struct
from pathlib import Path
from typing import Union

import numpy as np
import yaml

from ..utils import CheckpointError, NetworkShapeError, get_logger
from .layers import layer_from_spec
from .network import Network

MAGIC = b"FSNNCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sII")


def _plain(value):
    """Numpy scalars and arrays to YAML-safe Python values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def save_checkpoint(net: Network) -> bytes:
    """Serialize the network structure, metadata and f32 parameters"""
    header = dict(net.spec())
    header["param_count"] = net.param_count
    header["metadata"] = _plain(net.metadata)
    header_bytes = yaml.safe_dump(header, sort_keys=True, default_flow_style=None).encode("utf-8")
    blob = np.asarray(net.params, dtype="<f4").tobytes()
    return _PREFIX.pack(MAGIC, VERSION, len(header_bytes)) + header_bytes + blob


def load_checkpoint(data: bytes, source: str = "<bytes>") -> Network:
    """
    Rebuild a Network from checkpoint bytes

    Raises:
        CheckpointError: On bad magic, unsupported version, malformed header or truncation
    """
    if len(data) < _PREFIX.size:
        raise CheckpointError(f"Checkpoint truncated: {len(data)} bytes", path=source)
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"Not a flight-stack checkpoint (magic {magic!r})", path=source)
    if version != VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}, expected {VERSION}", path=source)

    header_end = _PREFIX.size + header_len
    if len(data) < header_end:
        raise CheckpointError("Checkpoint header truncated", path=source)
    try:
        header = yaml.safe_load(data[_PREFIX.size:header_end].decode("utf-8"))
        layers = [layer_from_spec(spec) for spec in header["layers"]]
        input_shape = tuple(header["input_shape"])
        param_count = int(header["param_count"])
    except (yaml.YAMLError, UnicodeDecodeError, KeyError, TypeError, NetworkShapeError) as e:
        raise CheckpointError(f"Malformed checkpoint header: {e}", path=source) from e

    expected = header_end + 4 * param_count
    if len(data) != expected:
        raise CheckpointError(f"Checkpoint parameter blob has {len(data) - header_end} bytes, "
                              f"expected {4 * param_count}", path=source)
    params = np.frombuffer(data, dtype="<f4", count=param_count, offset=header_end).astype(np.float32)
    try:
        return Network(layers, input_shape, params, metadata=header.get("metadata") or {})
    except NetworkShapeError as e:
        raise CheckpointError(f"Checkpoint layers are inconsistent: {e}", path=source) from e


def write_checkpoint(net: Network, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(save_checkpoint(net))
    get_logger().debug(f"💾 Checkpoint written: {path} ({net.param_count} params)")
    return path


def read_checkpoint(path: Union[str, Path]) -> Network:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}", path=str(path))
    return load_checkpoint(path.read_bytes(), source=str(path))


def parameter_checksum(net: Network) -> str:
    """Hex digest of the f32 parameter blob, for before/after comparisons"""
    return hashlib.sha256(np.asarray(net.params, dtype="<f4").tobytes()).hexdigest()
