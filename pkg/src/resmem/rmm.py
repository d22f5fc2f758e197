"""Reservoir memory machine forward pass.

An echo state network whose readout also sees one row of an external memory.
A write head copies the current input into the memory (ring buffer of ``K``
slots) whenever its scalar control is positive; a read head picks one of
three pointer movements (stay, increment, reset) by argmax of a 3-vector
control. Slot indices are 0-based throughout: slot 0 is the first slot.

Two code paths are provided. :func:`rmm_step` / :func:`rmm_run` follow the
per-step state transition literally and return full traces;
:func:`rollout_writes`, :func:`rollout_reads` and :func:`rmm_predict` compute
the same quantities with vectorized numpy and are what training uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .reservoir import ReservoirWeights, esn_run


class ReadAction(IntEnum):
    STAY = 0
    INCREMENT = 1
    RESET = 2


@dataclass
class RmmParams:
    write_input: np.ndarray  # u^w, (n,)
    write_state: np.ndarray  # v^w, (m,)
    read_input: np.ndarray  # U^r, (3, n)
    read_state: np.ndarray  # V^r, (3, m)
    readout_state: np.ndarray  # V, (L, m)
    readout_memory: np.ndarray  # R, (L, n)
    memory_size: int

    def __post_init__(self):
        n = self.write_input.shape[0]
        m = self.write_state.shape[0]
        L = self.readout_state.shape[0]
        expected = {
            "write_input": (n,),
            "write_state": (m,),
            "read_input": (3, n),
            "read_state": (3, m),
            "readout_state": (L, m),
            "readout_memory": (L, n),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ValueError(f"{name} has shape {actual}, expected {shape}")
        if self.memory_size < 1:
            raise ValueError("memory_size must be positive")

    @property
    def input_dim(self) -> int:
        return self.write_input.shape[0]

    @property
    def reservoir_size(self) -> int:
        return self.write_state.shape[0]

    @property
    def output_dim(self) -> int:
        return self.readout_state.shape[0]

    @classmethod
    def zeros(cls, n: int, m: int, L: int, K: int) -> "RmmParams":
        return cls(
            np.zeros(n), np.zeros(m), np.zeros((3, n)), np.zeros((3, m)),
            np.zeros((L, m)), np.zeros((L, n)), K,
        )

    def to_dict(self) -> dict:
        return {
            "memory_size": self.memory_size,
            "write_input": self.write_input.tolist(),
            "write_state": self.write_state.tolist(),
            "read_input": self.read_input.tolist(),
            "read_state": self.read_state.tolist(),
            "readout_state": self.readout_state.tolist(),
            "readout_memory": self.readout_memory.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RmmParams":
        arr = lambda key: np.asarray(d[key], dtype=float)  # noqa: E731
        return cls(
            arr("write_input"), arr("write_state"), arr("read_input"),
            arr("read_state"), arr("readout_state"), arr("readout_memory"),
            int(d["memory_size"]),
        )


@dataclass
class RmmState:
    h: np.ndarray
    memory: np.ndarray
    write_pos: int
    read_pos: int

    @classmethod
    def initial(cls, m: int, K: int, n: int) -> "RmmState":
        return cls(np.zeros(m), np.zeros((K, n)), 0, 0)


@dataclass
class StepTrace:
    write_control: float
    read_control: np.ndarray
    wrote: bool
    read_action: ReadAction
    read_vector: np.ndarray
    output: np.ndarray


def rmm_step(
    state: RmmState, x: np.ndarray, h_new: np.ndarray, params: RmmParams
) -> tuple[RmmState, StepTrace]:
    """Advance memory and heads by one step given the new reservoir state."""
    x = np.asarray(x, dtype=float)
    h_new = np.asarray(h_new, dtype=float)
    if x.shape != (params.input_dim,) or h_new.shape != (params.reservoir_size,):
        raise ValueError(
            f"expected x of shape ({params.input_dim},) and h of shape "
            f"({params.reservoir_size},), got {x.shape} and {h_new.shape}"
        )
    K = params.memory_size
    memory = state.memory.copy()

    write_control = float(params.write_input @ x + params.write_state @ h_new)
    wrote = write_control > 0.0
    write_pos = state.write_pos
    if wrote:
        memory[write_pos] = x
        write_pos = (write_pos + 1) % K

    read_control = params.read_input @ x + params.read_state @ h_new
    # np.argmax keeps the first maximum: stay > increment > reset on ties
    action = ReadAction(int(np.argmax(read_control)))
    if action is ReadAction.STAY:
        read_pos = state.read_pos
    elif action is ReadAction.INCREMENT:
        read_pos = (state.read_pos + 1) % K
    else:
        read_pos = 0

    r = memory[read_pos].copy()
    y = params.readout_state @ h_new + params.readout_memory @ r
    new_state = RmmState(h_new, memory, write_pos, read_pos)
    trace = StepTrace(write_control, read_control, wrote, action, r, y)
    return new_state, trace


def rmm_run(
    weights: ReservoirWeights, params: RmmParams, X
) -> tuple[np.ndarray, list[StepTrace], list[RmmState]]:
    """Literal step-by-step rollout from ``h = 0, M = 0, k = l = 0``."""
    H = esn_run(weights, X)
    X = np.asarray(X, dtype=float).reshape(H.shape[0], weights.input_dim)
    state = RmmState.initial(weights.size, params.memory_size, weights.input_dim)
    traces, states = [], []
    for x, h in zip(X, H):
        state, trace = rmm_step(state, x, h, params)
        traces.append(trace)
        states.append(state)
    Y_hat = np.array([tr.output for tr in traces]).reshape(len(traces), params.output_dim)
    return Y_hat, traces, states


@dataclass
class WriteRollout:
    wrote: np.ndarray  # (T,) bool
    slot: np.ndarray  # (T,) slot that was (or would have been) written
    memory: np.ndarray  # (T, K, n) memory after each step


@dataclass
class ReadRollout:
    actions: np.ndarray  # (T,) ReadAction values
    positions: np.ndarray  # (T,) read slot after each step
    reads: np.ndarray  # (T, n)


def write_controls(X: np.ndarray, H: np.ndarray, params: RmmParams) -> np.ndarray:
    return X @ params.write_input + H @ params.write_state


def read_controls(X: np.ndarray, H: np.ndarray, params: RmmParams) -> np.ndarray:
    return X @ params.read_input.T + H @ params.read_state.T


def memory_from_writes(X: np.ndarray, wrote: np.ndarray, K: int) -> WriteRollout:
    """Memory tensor produced by writing ``x_t`` wherever ``wrote[t]``."""
    T, n = X.shape
    wrote = np.asarray(wrote, dtype=bool)
    count = np.cumsum(wrote)
    slot = (count - wrote) % K
    # last_write[t, j]: time of the most recent write into slot j up to t, or -1
    marks = np.full((T, K), -1)
    times = np.flatnonzero(wrote)
    marks[times, slot[times]] = times
    last_write = np.maximum.accumulate(marks, axis=0) if T else marks
    memory = np.where(
        (last_write >= 0)[..., None], X[np.maximum(last_write, 0)], 0.0
    )
    return WriteRollout(wrote, slot, memory.reshape(T, K, n))


def positions_from_actions(actions: np.ndarray, K: int) -> np.ndarray:
    """Read-head slots after each action, starting from slot 0."""
    actions = np.asarray(actions)
    T = actions.shape[0]
    incs = np.cumsum(actions == ReadAction.INCREMENT)
    reset_at = np.where(actions == ReadAction.RESET, np.arange(T), -1)
    last_reset = np.maximum.accumulate(reset_at) if T else reset_at
    base = np.where(last_reset >= 0, incs[np.maximum(last_reset, 0)], 0)
    return (incs - base) % K


def rollout_writes(X: np.ndarray, H: np.ndarray, params: RmmParams) -> WriteRollout:
    return memory_from_writes(X, write_controls(X, H, params) > 0.0, params.memory_size)


def rollout_reads(
    memory: np.ndarray, X: np.ndarray, H: np.ndarray, params: RmmParams
) -> ReadRollout:
    actions = np.argmax(read_controls(X, H, params), axis=1)
    positions = positions_from_actions(actions, params.memory_size)
    reads = memory[np.arange(len(positions)), positions]
    return ReadRollout(actions, positions, reads)


def rmm_predict(
    weights: ReservoirWeights, params: RmmParams, X, H: np.ndarray | None = None
) -> np.ndarray:
    """Vectorized equivalent of ``rmm_run(...)[0]``."""
    if H is None:
        H = esn_run(weights, X)
    X = np.asarray(X, dtype=float).reshape(H.shape[0], weights.input_dim)
    written = rollout_writes(X, H, params)
    read = rollout_reads(written.memory, X, H, params)
    return H @ params.readout_state.T + read.reads @ params.readout_memory.T
