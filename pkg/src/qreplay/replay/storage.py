"""Little-endian binary buffer files.

Layout::

    b"RPBF" | u32 version | u8 strategy | u32 state_dim | u32 action_count
    | u64 capacity | u32 goal_dim | u64 count | u16 len + utf-8 env id
    | count records

A record is ``f32[state_dim] state, u32 action, f32 reward,
f32[state_dim] next_state, u8 done, u32 episode_id, u32 step`` followed by
``f32[goal_dim] goal`` when the buffer keeps goals.  Records are written
oldest first, so loading restores the logical order.
"""
from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .buffer import ReplayBuffer, transfer_buffer
from .priorities import OmegaSchedule, PrioritySpec, Strategy

MAGIC = b"RPBF"
VERSION = 1
_STRATEGIES = list(Strategy)
_HEAD = struct.Struct("<4sIBIIQIQ")


class BufferFormatError(ValueError):
    pass


class DimensionMismatch(BufferFormatError):
    pass


def record_dtype(state_dim: int, goal_dim: int = 0) -> np.dtype:
    fields = [
        ("state", "<f4", (state_dim,)),
        ("action", "<u4"),
        ("reward", "<f4"),
        ("next_state", "<f4", (state_dim,)),
        ("done", "u1"),
        ("episode_id", "<u4"),
        ("step", "<u4"),
    ]
    if goal_dim:
        fields.append(("goal", "<f4", (goal_dim,)))
    return np.dtype(fields)  # unaligned: no padding between fields


def _records(buf: ReplayBuffer) -> np.ndarray:
    order = buf.logical_order()
    rec = np.zeros(order.size, dtype=record_dtype(buf.state_dim, buf.goal_dim))
    rec["state"] = buf.states[order]
    rec["action"] = buf.actions[order]
    rec["reward"] = buf.rewards[order]
    rec["next_state"] = buf.next_states[order]
    rec["done"] = buf.dones[order]
    rec["episode_id"] = buf.episode_ids[order]
    rec["step"] = buf.steps[order]
    if buf.goal_dim:
        rec["goal"] = buf.goals[order]
    return rec


def transition_section(buf: ReplayBuffer) -> bytes:
    """Raw bytes of the record section, for byte-level comparisons."""
    return _records(buf).tobytes()


def dump_buffer(buf: ReplayBuffer, sink) -> None:
    env = buf.env_id.encode("utf-8")
    sink.write(_HEAD.pack(MAGIC, VERSION, _STRATEGIES.index(buf.strategy), buf.state_dim,
                          buf.action_count, buf.capacity, buf.goal_dim, buf.size))
    sink.write(struct.pack("<H", len(env)) + env)
    sink.write(transition_section(buf))


def save_buffer(buf: ReplayBuffer, path) -> None:
    with open(path, "wb") as fh:
        dump_buffer(buf, fh)


def _read_exact(source, n: int) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise BufferFormatError(f"truncated stream: wanted {n} bytes, got {len(data)}")
    return data


def parse_buffer(source, state_dim: int | None = None, action_count: int | None = None,
                 spec: PrioritySpec | None = None, schedule: OmegaSchedule | None = None,
                 strategy=None) -> ReplayBuffer:
    """Read a buffer; optional ``state_dim``/``action_count`` guard against the wrong env."""
    magic, version, tag, sdim, acount, cap, gdim, count = _HEAD.unpack(
        _read_exact(source, _HEAD.size))
    if magic != MAGIC:
        raise BufferFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise BufferFormatError(f"unsupported version {version} (expected {VERSION})")
    if tag >= len(_STRATEGIES):
        raise BufferFormatError(f"unknown strategy tag {tag}")
    if state_dim is not None and sdim != state_dim:
        raise DimensionMismatch(f"file state_dim {sdim} != environment {state_dim}")
    if action_count is not None and acount != action_count:
        raise DimensionMismatch(f"file action_count {acount} != environment {action_count}")
    if count > cap:
        raise BufferFormatError("record count exceeds capacity")
    (env_len,) = struct.unpack("<H", _read_exact(source, 2))
    env_id = _read_exact(source, env_len).decode("utf-8")
    dtype = record_dtype(sdim, gdim)
    rec = np.frombuffer(_read_exact(source, dtype.itemsize * count), dtype=dtype)

    staging = ReplayBuffer(max(cap, 1), sdim, strategy="uniform", action_count=acount,
                           goal_dim=gdim, env_id=env_id)
    staging.states[:count] = rec["state"]
    staging.next_states[:count] = rec["next_state"]
    staging.actions[:count] = rec["action"]
    staging.rewards[:count] = rec["reward"]
    staging.dones[:count] = rec["done"]
    staging.episode_ids[:count] = rec["episode_id"]
    staging.steps[:count] = rec["step"]
    if gdim:
        staging.goals[:count] = rec["goal"]
    staging.size = int(count)
    staging.cursor = int(count) % staging.capacity
    # priorities are not persisted: the loaded buffer starts like a transferred one
    return transfer_buffer(staging, strategy=_STRATEGIES[tag] if strategy is None else strategy,
                           spec=spec, schedule=schedule)


def load_buffer(path, **kwargs) -> ReplayBuffer:
    data = Path(path).read_bytes()
    return parse_buffer(io.BytesIO(data), **kwargs)
