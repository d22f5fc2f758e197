"""Cycle reservoir with jumps (CRJ) and the fixed-weight ESN / ESGRU dynamics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

_PI_FILE = "pi_digits.txt"


@lru_cache(maxsize=1)
def _pi_digits() -> np.ndarray:
    text = resources.files("resmem").joinpath("data", _PI_FILE).read_text().strip()
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def pi_signs(count: int) -> np.ndarray:
    """Signs from the decimal digits of pi after the point (3.|14159...).

    Digits 0-4 map to -1, digits 5-9 to +1.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    digits = _pi_digits()
    if count > digits.size:
        raise ValueError(f"only {digits.size} digits of pi are available")
    return np.where(digits[:count] <= 4, -1.0, 1.0)


@dataclass(frozen=True)
class CrjHyperparams:
    input_weight: float
    cycle_weight: float
    jump_weight: float
    jump_length: int
    reservoir_size: int
    input_dim: int

    def __post_init__(self):
        if not -1.0 < self.input_weight < 1.0:
            raise ValueError(f"input_weight must lie in (-1, 1), got {self.input_weight}")
        if not 0.0 <= self.cycle_weight < 1.0:
            raise ValueError(f"cycle_weight must lie in [0, 1), got {self.cycle_weight}")
        if not 0.0 <= self.jump_weight < 1.0:
            raise ValueError(f"jump_weight must lie in [0, 1), got {self.jump_weight}")
        if self.reservoir_size < 1 or self.input_dim < 1:
            raise ValueError("reservoir_size and input_dim must be positive")
        # l = m - 1 would put the first jump on top of the cycle edge m -> 1
        if not 1 < self.jump_length < self.reservoir_size - 1:
            raise ValueError(
                f"jump_length must satisfy 1 < l < m - 1, got l={self.jump_length}, "
                f"m={self.reservoir_size}"
            )

    def to_dict(self) -> dict:
        return {
            "input_weight": self.input_weight,
            "cycle_weight": self.cycle_weight,
            "jump_weight": self.jump_weight,
            "jump_length": self.jump_length,
            "reservoir_size": self.reservoir_size,
            "input_dim": self.input_dim,
        }


@dataclass(frozen=True)
class ReservoirWeights:
    """Fixed input matrix ``U`` (m x n) and recurrent matrix ``W`` (m x m)."""

    U: np.ndarray
    W: np.ndarray

    @property
    def size(self) -> int:
        return self.W.shape[0]

    @property
    def input_dim(self) -> int:
        return self.U.shape[1]


def spectral_radius(W: np.ndarray, steps: int = 100) -> float:
    """Power-iteration estimate of the spectral radius of ``W``.

    The CRJ cycle makes the dominant eigenvalues come in complex pairs, so the
    estimate is the geometric mean growth rate over the last half of the run
    rather than a single Rayleigh quotient.
    """
    v = np.ones(W.shape[0]) / np.sqrt(W.shape[0])
    log_growth = []
    for _ in range(steps):
        w = W @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        log_growth.append(np.log(norm))
        v = w / norm
    return float(np.exp(np.mean(log_growth[steps // 2:])))


def build_crj(hp: CrjHyperparams) -> ReservoirWeights:
    m, n = hp.reservoir_size, hp.input_dim
    U = hp.input_weight * pi_signs(m * n).reshape(m, n)

    W = np.zeros((m, m))
    idx = np.arange(m)
    # neuron i+1 receives from neuron i
    W[(idx + 1) % m, idx] = hp.cycle_weight
    for i in range(0, m - hp.jump_length, hp.jump_length):
        W[i, i + hp.jump_length] = hp.jump_weight
        W[i + hp.jump_length, i] = hp.jump_weight

    U.setflags(write=False)
    W.setflags(write=False)
    rho = spectral_radius(W)
    if rho >= 1.0:
        warnings.warn(
            f"CRJ recurrent matrix has spectral radius {rho:.3f} >= 1; "
            "the echo state property is not guaranteed",
            RuntimeWarning,
            stacklevel=2,
        )
    return ReservoirWeights(U=U, W=W)


def _check_inputs(weights: ReservoirWeights, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, weights.input_dim)
    if X.ndim != 2 or X.shape[1] != weights.input_dim:
        raise ValueError(
            f"inputs must have shape (T, {weights.input_dim}), got {X.shape}"
        )
    return X


def esn_run(weights: ReservoirWeights, X, h0: np.ndarray | None = None) -> np.ndarray:
    """Run ``h_t = tanh(U x_t + W h_{t-1})`` and return the T x m activations."""
    X = _check_inputs(weights, X)
    T, m = X.shape[0], weights.size
    H = np.empty((T, m))
    drive = X @ weights.U.T
    h = np.zeros(m) if h0 is None else np.array(h0, dtype=float)
    W = weights.W
    for t in range(T):
        h = np.tanh(drive[t] + W @ h)
        H[t] = h
    return H


def _sigmoid(a: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def esgru_run(weights: ReservoirWeights, X, h0: np.ndarray | None = None) -> np.ndarray:
    """GRU dynamics with every pre-activation built from the same CRJ pair.

    Update and reset gates share ``sigma(U x_t + W h_{t-1})``; the candidate is
    ``tanh(U x_t + W (r_t * h_{t-1}))``. No biases.
    """
    X = _check_inputs(weights, X)
    T, m = X.shape[0], weights.size
    H = np.empty((T, m))
    drive = X @ weights.U.T
    h = np.zeros(m) if h0 is None else np.array(h0, dtype=float)
    W = weights.W
    for t in range(T):
        gate = _sigmoid(drive[t] + W @ h)
        candidate = np.tanh(drive[t] + W @ (gate * h))
        h = (1.0 - gate) * h + gate * candidate
        H[t] = h
    return H


DYNAMICS = {"esn": esn_run, "esgru": esgru_run}
