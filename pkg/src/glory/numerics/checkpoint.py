"""The ``GCKP`` checkpoint format: header, named parameters, optional Adam state."""
from __future__ import annotations

import json

import numpy as np

from ..binio import BlockReader, BlockWriter, FormatError
from .optim import OptimizerState

MAGIC = b"GCKP"
VERSION = 1


def checkpoint_bytes(header: dict, params: dict[str, np.ndarray],
                     state: OptimizerState | None = None) -> bytes:
    w = BlockWriter(MAGIC, VERSION)
    w.string(json.dumps(header, sort_keys=True))
    names = sorted(params)
    w.u32(len(names))
    for name in names:
        w.string(name)
        w.array(np.asarray(params[name], dtype=np.float32))
    w.u32(int(state is not None))
    if state is not None:
        w.string(json.dumps({k: getattr(state, k) for k in
                             ("base_lr", "warmup_frac", "total_steps", "beta1", "beta2", "eps", "step")},
                            sort_keys=True))
        for name in names:
            w.array(np.asarray(state.m.get(name, np.zeros_like(params[name])), dtype=np.float32))
            w.array(np.asarray(state.v.get(name, np.zeros_like(params[name])), dtype=np.float32))
    return w.getvalue()


def read_checkpoint(data: bytes) -> tuple[dict, dict[str, np.ndarray], OptimizerState | None]:
    r = BlockReader(data, MAGIC, (VERSION,))
    header = json.loads(r.string())
    names = []
    params = {}
    for _ in range(r.u32()):
        name = r.string()
        names.append(name)
        params[name] = r.array()
    state = None
    if r.u32():
        state = OptimizerState(**json.loads(r.string()))
        for name in names:
            state.m[name] = r.array()
            state.v[name] = r.array()
    if not r.at_end():
        raise FormatError("trailing bytes after GCKP payload")
    return header, params, state


def save_checkpoint(path, header, params, state=None) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(header, params, state))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return read_checkpoint(fh.read())
