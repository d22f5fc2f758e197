"""Seeded generators for the latch, copy and repeat-copy benchmarks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TASKS = ("latch", "copy", "repeat_copy", "shift")


@dataclass
class TaskSample:
    X: np.ndarray
    Y: np.ndarray
    task: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("inputs and targets must have the same length")

    @property
    def length(self) -> int:
        return self.X.shape[0]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "n": int(self.X.shape[1]),
            "L": int(self.Y.shape[1]),
            "X": self.X.tolist(),
            "Y": self.Y.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSample":
        X = np.asarray(d["X"], dtype=float).reshape(-1, int(d["n"]))
        Y = np.asarray(d["Y"], dtype=float).reshape(-1, int(d["L"]))
        return cls(X, Y, d.get("task", ""), dict(d.get("meta", {})))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def latch_targets(T: int, spikes) -> np.ndarray:
    """0/1 output that toggles at every spike, starting at 0."""
    toggles = np.zeros(T)
    toggles[np.asarray(spikes, dtype=int)] = 1.0
    return np.cumsum(toggles) % 2


def gen_latch(seed, max_len: int = 200, n_spikes: int = 3, length: int | None = None) -> TaskSample:
    """Latch sequence with ``n_spikes`` unit spikes at distinct steps 1..T-1.

    The length is drawn uniformly from ``[min(20, max_len), max_len]`` unless
    ``length`` fixes it. The output toggles at the spike step itself.
    """
    rng = _rng(seed)
    if length is None:
        if max_len < 2 * n_spikes or max_len < 2:
            raise ValueError(f"max_len={max_len} is too short for {n_spikes} spikes")
        T = int(rng.integers(min(20, max_len), max_len + 1))
    else:
        T = int(length)
    if n_spikes > T - 1:
        raise ValueError(f"cannot place {n_spikes} spikes in a sequence of length {T}")
    spikes = np.sort(rng.choice(np.arange(1, T), size=n_spikes, replace=False))
    X = np.zeros((T, 1))
    X[spikes, 0] = 1.0
    Y = latch_targets(T, spikes)[:, None]
    return TaskSample(X, Y, "latch", {"spikes": spikes.tolist()})


def _payload(rng: np.random.Generator, max_payload: int, bits: int) -> np.ndarray:
    if max_payload < 1:
        raise ValueError("max_payload must be at least 1")
    P = int(rng.integers(1, max_payload + 1))
    return rng.integers(0, 2, size=(P, bits)).astype(float)


def copy_sample(
    payload: np.ndarray,
    repeats: int = 1,
    cue: float = 1.0,
    task: str = "copy",
    markers: bool = False,
) -> TaskSample:
    """Payload, then an end token of value ``cue``, then ``repeats`` copies.

    With ``markers`` the end-token channel also carries ``cue`` on the last
    step of every copy except the final one.
    """
    P, bits = payload.shape
    T = P + 1 + repeats * P
    X = np.zeros((T, bits + 1))
    X[:P, :bits] = payload
    X[P, bits] = cue
    if markers:
        X[P + P * np.arange(1, repeats), bits] = cue
    Y = np.zeros((T, bits))
    Y[P + 1:] = np.tile(payload, (repeats, 1))
    meta = {"payload_length": P}
    if task == "repeat_copy":
        meta["repeats"] = repeats
    return TaskSample(X, Y, task, meta)


def gen_copy(seed, max_payload: int = 20, bits: int = 8) -> TaskSample:
    return copy_sample(_payload(_rng(seed), max_payload, bits))


def gen_repeat_copy(
    seed, max_payload: int = 20, bits: int = 8, max_repeats: int = 3, markers: bool = True
) -> TaskSample:
    """Copy task repeated 1..max_repeats times.

    The repeat count is announced on the end-token channel as
    ``repeats / max_repeats``. By default the same value is repeated on that
    channel at the last step of each non-final copy, which tells the read
    head when to jump back to the start; ``markers=False`` gives the bare
    encoding with a single cue.
    """
    if max_repeats < 1:
        raise ValueError("max_repeats must be at least 1")
    rng = _rng(seed)
    payload = _payload(rng, max_payload, bits)
    repeats = int(rng.integers(1, max_repeats + 1))
    return copy_sample(payload, repeats, repeats / max_repeats, "repeat_copy", markers)


def gen_shift_benchmark(seed, length: int, bits: int = 8) -> TaskSample:
    """Random bits with the target delayed by one step (timing benchmark)."""
    if length < 2:
        raise ValueError("length must be at least 2")
    X = _rng(seed).integers(0, 2, size=(length, bits)).astype(float)
    Y = np.zeros_like(X)
    Y[1:] = X[:-1]
    return TaskSample(X, Y, "shift", {})


_GENERATORS = {
    "latch": gen_latch,
    "copy": gen_copy,
    "repeat_copy": gen_repeat_copy,
}


def generate_dataset(task: str, count: int, seed: int, **kwargs) -> list[TaskSample]:
    """``count`` independent samples; sample ``i`` uses its own child seed."""
    if task == "shift":
        length = kwargs.pop("length", 100)
        gen = lambda s: gen_shift_benchmark(s, length, **kwargs)  # noqa: E731
    elif task in _GENERATORS:
        gen = lambda s: _GENERATORS[task](s, **kwargs)  # noqa: E731
    else:
        raise ValueError(f"unknown task {task!r}; valid tasks: {', '.join(TASKS)}")
    children = np.random.SeedSequence(seed).spawn(count)
    return [gen(np.random.default_rng(child)) for child in children]


def save_dataset(samples: list[TaskSample], path) -> None:
    text = json.dumps([s.to_dict() for s in samples], separators=(",", ":"))
    Path(path).write_text(text + "\n")


def load_dataset(path) -> list[TaskSample]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return [TaskSample.from_dict(d) for d in data]
