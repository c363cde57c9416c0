"""Named parameter collection and its binary checkpoint format.

Checkpoints are a flat record list: magic, format version, record count,
then per parameter (name, group, shape, little-endian float64 values).
Loading a file whose version tag is unknown is refused.
"""

from __future__ import annotations

import struct

import numpy as np

from .autodiff import Tensor
from .errors import ContractError, FormatError

MAGIC = b"ZPCK"
FORMAT_VERSION = 1


class ParameterStore:
    """Insertion-ordered mapping of parameter names to gradient-bearing tensors."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._groups: dict[str, str] = {}

    def add(self, name: str, data: np.ndarray, group: str = "theta") -> Tensor:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        self._groups[name] = group
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def group(self, name: str) -> str:
        return self._groups[name]

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grads(self):
        for t in self._params.values():
            t.zero_grad()

    def n_scalars(self, group: str | None = None) -> int:
        return sum(t.data.size for n, t in self._params.items()
                   if group is None or self._groups[n] == group)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._params.items()}

    def restore(self, snap: dict[str, np.ndarray]):
        for n, arr in snap.items():
            if n not in self._params:
                raise ContractError(f"snapshot has unknown parameter {n!r}")
            if self._params[n].data.shape != arr.shape:
                raise ContractError(
                    f"snapshot shape {arr.shape} does not match {self._params[n].data.shape} "
                    f"for {n!r}")
            self._params[n].data[...] = arr

    def content_hash(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for n, t in self._params.items():
            h.update(n.encode())
            h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()

    # -- checkpoint I/O -----------------------------------------------------

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", FORMAT_VERSION, len(self._params)))
            for name, t in self._params.items():
                nb = name.encode("utf-8")
                gb = self._groups[name].encode("utf-8")
                fh.write(struct.pack("<H", len(nb)))
                fh.write(nb)
                fh.write(struct.pack("<H", len(gb)))
                fh.write(gb)
                fh.write(struct.pack("<B", t.data.ndim))
                for d in t.data.shape:
                    fh.write(struct.pack("<I", d))
                fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())

    def load(self, path):
        """Load values into matching names; shapes and names must agree exactly."""
        loaded = load_checkpoint(path)
        names = [n for n, _, _ in loaded]
        if names != self.names():
            raise FormatError(
                f"checkpoint parameters do not match the model: "
                f"file has {len(names)}, model has {len(self._params)}")
        for name, group, arr in loaded:
            t = self._params[name]
            if t.data.shape != arr.shape:
                raise FormatError(
                    f"checkpoint shape {arr.shape} does not match {t.data.shape} for {name!r}")
            if self._groups[name] != group:
                raise FormatError(f"checkpoint group {group!r} differs for {name!r}")
            t.data[...] = arr


def load_checkpoint(path) -> list[tuple[str, str, np.ndarray]]:
    """Read the raw (name, group, array) records of a checkpoint file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint format version {version}")
    off = 12
    records = []
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off:off + nlen].decode("utf-8")
            off += nlen
            (glen,) = struct.unpack_from("<H", blob, off)
            off += 2
            group = blob[off:off + glen].decode("utf-8")
            off += glen
            (ndim,) = struct.unpack_from("<B", blob, off)
            off += 1
            shape = []
            for _ in range(ndim):
                (d,) = struct.unpack_from("<I", blob, off)
                off += 4
                shape.append(d)
            size = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(blob, dtype="<f8", count=size, offset=off).copy()
            off += size * 8
            records.append((name, group, arr.reshape(shape)))
    except struct.error as exc:
        raise FormatError(f"{path}: truncated checkpoint ({exc})") from exc
    return records


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))
