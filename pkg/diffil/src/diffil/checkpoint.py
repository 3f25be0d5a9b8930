"""Per-network checkpoint files.

Layout of one `<name>.ckpt` file:

    diffil-ckpt-v1\\n                  magic line
    <u64 little-endian>               manifest length in bytes
    <TOML manifest>                   format, network, tensors[name, shape, offset]
    <raw little-endian float32>       tensors concatenated in manifest order

Every state-dict entry (parameters and BatchNorm statistics) is stored as
float32 and cast back to the module's dtype on load.
"""

import struct
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import tomlkit
import torch
from tomlkit.exceptions import TOMLKitError
from torch import nn

from diffil.errors import DataFormatError
from diffil.logging import get_logger

logger = get_logger("checkpoint")

CHECKPOINT_MAGIC = b"diffil-ckpt-v1\n"
CHECKPOINT_SUFFIX = ".ckpt"
_LENGTH = struct.Struct("<Q")


def save_network(module: nn.Module, path: Path, *, name: str = "") -> None:
  """Write a module's state dict to `path` in the checkpoint format."""
  tensors = tomlkit.aot()
  payload: list[npt.NDArray[np.float32]] = []
  offset = 0
  for key, value in module.state_dict().items():
    array = value.detach().cpu().to(torch.float32).numpy().astype("<f4")
    entry = tomlkit.table()
    entry["name"] = key
    entry["shape"] = list(array.shape)
    entry["offset"] = offset
    tensors.append(entry)
    payload.append(array.ravel())
    offset += array.size
  doc = tomlkit.document()
  doc["format"] = CHECKPOINT_MAGIC.decode().strip()
  doc["network"] = name or path.stem
  doc["num_values"] = offset
  doc["tensors"] = tensors
  manifest = tomlkit.dumps(doc).encode()

  path.parent.mkdir(parents=True, exist_ok=True)
  with path.open("wb") as f:
    f.write(CHECKPOINT_MAGIC)
    f.write(_LENGTH.pack(len(manifest)))
    f.write(manifest)
    for array in payload:
      f.write(array.tobytes())


def read_network(path: Path) -> dict[str, npt.NDArray[np.float32]]:
  """Read a checkpoint file into name -> float32 array.

  Raises:
      DataFormatError: If the file is missing or malformed; the error names
          the offending field.
  """
  if not path.is_file():
    raise DataFormatError(f"checkpoint not found: {path}", field="path")
  data = path.read_bytes()
  if not data.startswith(CHECKPOINT_MAGIC):
    raise DataFormatError(f"{path} is not a diffil checkpoint", field="magic")
  start = len(CHECKPOINT_MAGIC)
  if len(data) < start + _LENGTH.size:
    raise DataFormatError(f"{path} is truncated", field="manifest_length")
  (length,) = _LENGTH.unpack_from(data, start)
  start += _LENGTH.size
  try:
    manifest: dict[str, Any] = tomlkit.parse(
      data[start : start + length].decode()
    ).unwrap()
  except (TOMLKitError, UnicodeDecodeError) as e:
    raise DataFormatError(f"unreadable manifest: {e}", field="manifest") from None
  values = np.frombuffer(data, dtype="<f4", offset=start + length)
  if len(values) != manifest.get("num_values"):
    msg = f"payload holds {len(values)} values, manifest claims "
    msg += f"{manifest.get('num_values')}"
    raise DataFormatError(msg, field="num_values")

  result: dict[str, npt.NDArray[np.float32]] = {}
  for i, entry in enumerate(manifest.get("tensors", [])):
    try:
      shape = tuple(int(d) for d in entry["shape"])
      offset = int(entry["offset"])
      name = str(entry["name"])
    except (KeyError, TypeError, ValueError):
      raise DataFormatError("incomplete tensor entry", field=f"tensors[{i}]") from None
    count = int(np.prod(shape, dtype=np.int64))
    if offset < 0 or offset + count > len(values):
      raise DataFormatError("tensor exceeds the payload", field=f"tensors[{i}]")
    result[name] = values[offset : offset + count].reshape(shape).astype(np.float32)
  return result


def load_network(module: nn.Module, path: Path) -> None:
  """Restore a module saved with `save_network`.

  Raises:
      DataFormatError: If names or shapes do not match the module.
  """
  arrays = read_network(path)
  state = module.state_dict()
  if set(arrays) != set(state):
    missing = sorted(set(state) - set(arrays))
    unexpected = sorted(set(arrays) - set(state))
    msg = f"{path.name}: missing {missing}, unexpected {unexpected}"
    raise DataFormatError(msg, field="tensors")
  restored: dict[str, torch.Tensor] = {}
  for key, current in state.items():
    array = arrays[key]
    if tuple(array.shape) != tuple(current.shape):
      msg = f"shape {array.shape} != {tuple(current.shape)}"
      raise DataFormatError(msg, field=key)
    restored[key] = torch.from_numpy(array).to(current.dtype)
  module.load_state_dict(restored)


def save_checkpoint(directory: Path, networks: Mapping[str, nn.Module]) -> None:
  """Write one checkpoint file per named network into `directory`."""
  for name, module in networks.items():
    save_network(module, directory / f"{name}{CHECKPOINT_SUFFIX}", name=name)
  logger.debug("Saved %d networks to %s", len(networks), directory)


def load_checkpoint(directory: Path, networks: Mapping[str, nn.Module]) -> None:
  """Restore every named network from `directory`."""
  for name, module in networks.items():
    load_network(module, directory / f"{name}{CHECKPOINT_SUFFIX}")
