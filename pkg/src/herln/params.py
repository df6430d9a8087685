"""Named learnable tensors, Adam, and the binary checkpoint format."""
from __future__ import annotations

import hashlib
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .numerics import Tensor

MAGIC = b"HERLNCKP"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class ParameterStore:
    """Ordered name -> Tensor map with paired gradients and Adam moments."""

    def __init__(self, dtype=np.float32, seed=0):
        self.dtype = np.dtype(dtype)
        self.rng = np.random.default_rng(seed)
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def names(self):
        return list(self.params)

    def add(self, name, value):
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=self.dtype), requires_grad=True)
        self.params[name] = t
        return t

    def xavier(self, name, shape, fan_in=None, fan_out=None):
        """Uniform Glorot init; for >2-D shapes fan_in/fan_out default to the last two dims."""
        shape = tuple(shape)
        fan_in = fan_in if fan_in is not None else (shape[-2] if len(shape) > 1 else shape[0])
        fan_out = fan_out if fan_out is not None else shape[-1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, self.rng.uniform(-bound, bound, size=shape))

    def zeros(self, name, shape):
        return self.add(name, np.zeros(shape))

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    def state_arrays(self):
        return OrderedDict((k, t.data.copy()) for k, t in self.params.items())

    def load_arrays(self, arrays, strict=True):
        if strict and set(arrays) != set(self.params):
            missing = set(self.params) - set(arrays)
            extra = set(arrays) - set(self.params)
            raise CheckpointError(f"parameter mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, arr in arrays.items():
            if name not in self.params:
                continue
            t = self.params[name]
            if t.shape != arr.shape:
                raise CheckpointError(f"shape mismatch for {name}: {arr.shape} vs {t.shape}")
            t.data = np.array(arr, dtype=self.dtype)

    def grad_norm(self):
        return float(np.sqrt(sum(float(np.sum(t.grad.astype(np.float64) ** 2)) for t in self.params.values())))


def adam_step(store, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update on every parameter, then zero the gradients."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    store.step_count += 1
    k = store.step_count
    c1 = 1.0 - beta1 ** k
    c2 = 1.0 - beta2 ** k
    for name, t in store.params.items():
        g = t.grad
        m = store._m.get(name)
        if m is None:
            m = store._m[name] = np.zeros_like(t.data)
            store._v[name] = np.zeros_like(t.data)
        v = store._v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        t.data = (t.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(store.dtype)
    store.zero_grad()
    return store


# ------------------------------------------------------------------ checkpoint

def _checksum(payload: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def encode_checkpoint(arrays) -> bytes:
    header = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(arrays))]
    payloads = []
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        header.append(struct.pack("<I", len(raw)) + raw)
        header.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        header.append(arr.tobytes())
        payloads.append(arr.tobytes())
    body = b"".join(header)
    return body + struct.pack("<Q", _checksum(b"".join(payloads)))


def decode_checkpoint(blob: bytes):
    if len(blob) < len(MAGIC) + 16 or not blob.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic or truncated)")
    pos = len(MAGIC)
    version, count = struct.unpack_from("<II", blob, pos)
    pos += 8
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    arrays = OrderedDict()
    payloads = []
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}Q", blob, pos)
            pos += 8 * rank
            nbytes = 4 * int(np.prod(dims, dtype=np.int64))
            if pos + nbytes > len(blob) - 8:
                raise CheckpointError(f"truncated payload for {name!r}")
            raw = blob[pos:pos + nbytes]
            pos += nbytes
            payloads.append(raw)
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
        (stored,) = struct.unpack_from("<Q", blob, pos)
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    except (UnicodeDecodeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint header: {exc}") from None
    if pos + 8 != len(blob):
        raise CheckpointError("trailing bytes after checksum")
    if stored != _checksum(b"".join(payloads)):
        raise CheckpointError("checksum mismatch: checkpoint is corrupted")
    return arrays


def save_checkpoint(store, path):
    Path(path).write_bytes(encode_checkpoint(store.state_arrays()))


def load_checkpoint(path):
    return decode_checkpoint(Path(path).read_bytes())
