"""Training by alignment and linear regression.

The write head is regressed onto an ideal +/-1 write signal, the read head
onto the actions of an optimal alignment between memory contents and target
outputs, and the readout onto the targets given reservoir states and memory
reads. The three fits alternate until the training error stops improving.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .reservoir import DYNAMICS, ReservoirWeights, esn_run
from .rmm import (
    ReadAction,
    RmmParams,
    rollout_reads,
    rollout_writes,
)

log = logging.getLogger(__name__)

CONVERGENCE_TOL = 1e-6
DEFAULT_MAX_ITERS = 10


class SingularProblemError(np.linalg.LinAlgError):
    pass


def ridge_fit(F: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``Theta = Y F^T (F F^T + lam I)^-1``.

    ``F`` is d x N and ``Y`` is L x N; columns are samples.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if F.shape[1] != Y.shape[1]:
        raise ValueError(f"F and Y must have the same number of columns, got {F.shape} and {Y.shape}")
    if F.shape[1] < 1:
        raise ValueError("need at least one sample")
    if lam < 0:
        raise ValueError("regularization must be nonnegative")
    A = F @ F.T
    if lam > 0:
        A[np.diag_indices_from(A)] += lam
    elif np.linalg.cond(A) > 1.0 / np.finfo(float).eps:
        raise SingularProblemError(
            "normal matrix F F^T is singular; use a regularization lam > 0"
        )
    B = Y @ F.T
    try:
        return np.linalg.solve(A, B.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularProblemError(
            "normal matrix F F^T is singular; use a regularization lam > 0"
        ) from exc


@dataclass
class WriteTargets:
    tau: np.ndarray  # sorted unique write times
    control: np.ndarray  # (T,) of +1 / -1
    source: np.ndarray  # (T,) chosen input index for every output


def derive_write_targets(X, Y, R, chunk: int = 256) -> WriteTargets:
    """Ideal write signal: write every input that is the best source of some output.

    For each ``t`` the source is the earliest ``tau <= t`` minimizing
    ``||R x_tau - y_t||``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must have the same length")
    T = X.shape[0]
    RX = X @ np.asarray(R, dtype=float).T
    source = np.empty(T, dtype=int)
    for start in range(0, T, chunk):
        stop = min(start + chunk, T)
        diff = Y[start:stop, None, :] - RX[None, :stop, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        ts = np.arange(start, stop)
        dist[np.arange(stop)[None, :] > ts[:, None]] = np.inf
        source[start:stop] = np.argmin(dist, axis=1)
    tau = np.unique(source)
    control = -np.ones(T)
    control[tau] = 1.0
    return WriteTargets(tau, control, source)


@dataclass
class AlignmentResult:
    table: np.ndarray  # (K, T + 1) cost-to-go
    optimal_cost: float
    actions: np.ndarray  # (T,) ReadAction values
    positions: np.ndarray  # (T,) slots, 0-based


def align_costs(cost: np.ndarray) -> AlignmentResult:
    """Optimal read-head path through a K x T matrix of per-slot costs.

    ``d[l, t] = cost[l, t] + min(d[l, t+1], d[l+1 mod K, t+1], d[0, t+1])``
    with ``d[:, T] = 0``. The head starts at slot 0 before the first step, so
    the first position is slot 0 (stay) or slot 1 (increment). Ties prefer
    stay, then increment, then reset.
    """
    cost = np.asarray(cost, dtype=float)
    K, T = cost.shape
    if K < 2:
        raise ValueError("alignment needs a memory of at least 2 slots")
    d = np.zeros((K, T + 1))
    for t in range(T - 1, -1, -1):
        nxt = d[:, t + 1]
        d[:, t] = cost[:, t] + np.minimum(np.minimum(nxt, np.roll(nxt, -1)), nxt[0])

    actions = np.empty(T, dtype=int)
    positions = np.empty(T, dtype=int)
    if T == 0:
        return AlignmentResult(d, 0.0, actions, positions)
    pos = 0 if d[0, 0] <= d[1, 0] else 1
    actions[0] = ReadAction.STAY if pos == 0 else ReadAction.INCREMENT
    positions[0] = pos
    for t in range(1, T):
        col = d[:, t]
        options = (col[pos], col[(pos + 1) % K], col[0])
        action = int(np.argmin(options))
        pos = (pos, (pos + 1) % K, 0)[action]
        actions[t] = action
        positions[t] = pos
    return AlignmentResult(d, float(min(d[0, 0], d[1, 0])), actions, positions)


def memory_costs(memory: np.ndarray, Y, R) -> np.ndarray:
    """``cost[l, t] = ||R m_{t,l} - y_t||`` for a T x K x n memory tensor."""
    pred = np.einsum("tkn,ln->tkl", memory, np.asarray(R, dtype=float))
    diff = pred - np.asarray(Y, dtype=float)[:, None, :]
    return np.sqrt(np.einsum("tkl,tkl->kt", diff, diff))


def align_memory(memory, Y, R) -> AlignmentResult:
    memory = np.asarray(memory, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if memory.shape[0] != Y.shape[0]:
        raise ValueError("memory tensor and outputs must have the same length")
    if memory.ndim != 3 or memory.shape[1] < 2:
        raise ValueError("alignment needs a T x K x n memory tensor with K >= 2")
    return align_costs(memory_costs(memory, Y, R))


def padded_identity(L: int, n: int) -> np.ndarray:
    return np.eye(L, n)


@dataclass
class FitReport:
    iterations: int
    loss_history: list[float]
    converged: bool
    final_params: RmmParams
    rejected_loss: float | None = None


def _rmse(Y_list, Y_hat_list) -> float:
    sq = sum(float(np.sum((y - yh) ** 2)) for y, yh in zip(Y_list, Y_hat_list))
    count = sum(y.size for y in Y_list)
    return float(np.sqrt(sq / count)) if count else 0.0


def _stack(blocks) -> np.ndarray:
    return np.concatenate(blocks, axis=0).T


def fit_rmm(
    weights: ReservoirWeights,
    dataset,
    lam: float,
    K: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    states: list[np.ndarray] | None = None,
) -> FitReport:
    """Alternating optimization of write head, read head and readout.

    ``dataset`` is a sequence of objects with ``X`` (T x n) and ``Y`` (T x L)
    arrays. ``states`` optionally supplies precomputed reservoir activations
    for each sample.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if K < 2:
        raise ValueError("memory size K must be at least 2")
    Xs = [np.asarray(s.X, dtype=float) for s in dataset]
    Ys = [np.asarray(s.Y, dtype=float) for s in dataset]
    Hs = states if states is not None else [esn_run(weights, X) for X in Xs]
    n, m, L = Xs[0].shape[1], weights.size, Ys[0].shape[1]
    Z = _stack([np.hstack([X, H]) for X, H in zip(Xs, Hs)])  # (n + m) x N

    params = RmmParams.zeros(n, m, L, K)
    params.readout_memory = padded_identity(L, n)
    best: RmmParams | None = None
    history: list[float] = []
    rejected = None
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        R = params.readout_memory

        control = np.concatenate([derive_write_targets(X, Y, R).control for X, Y in zip(Xs, Ys)])
        theta_w = ridge_fit(Z, control[None, :], lam)[0]
        params = RmmParams(
            theta_w[:n], theta_w[n:], params.read_input, params.read_state,
            params.readout_state, R, K,
        )
        memories = [rollout_writes(X, H, params).memory for X, H in zip(Xs, Hs)]

        one_hot = []
        for mem, Y in zip(memories, Ys):
            actions = align_memory(mem, Y, R).actions
            one_hot.append(np.eye(3)[actions])
        theta_r = ridge_fit(Z, _stack(one_hot), lam)
        params.read_input, params.read_state = theta_r[:, :n], theta_r[:, n:]

        reads = [rollout_reads(mem, X, H, params).reads for mem, X, H in zip(memories, Xs, Hs)]
        G = _stack([np.hstack([H, r]) for H, r in zip(Hs, reads)])
        theta_o = ridge_fit(G, _stack(Ys), lam)
        params.readout_state, params.readout_memory = theta_o[:, :m], theta_o[:, m:]

        preds = [H @ params.readout_state.T + r @ params.readout_memory.T for H, r in zip(Hs, reads)]
        loss = _rmse(Ys, preds)
        log.debug("alternation %d: training RMSE %.6g", it, loss)
        if not np.isfinite(loss) or (history and loss > history[-1]):
            rejected = loss
            converged = True
            break
        improvement = history[-1] - loss if history else np.inf
        history.append(loss)
        best = params
        if improvement < CONVERGENCE_TOL:
            converged = True
            break

    if best is None:
        raise np.linalg.LinAlgError("training diverged in the first alternation")
    return FitReport(
        iterations=it, loss_history=history, converged=converged,
        final_params=best, rejected_loss=rejected,
    )


def fit_readout(
    weights: ReservoirWeights,
    dataset,
    lam: float,
    dynamics: str = "esn",
    states: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Readout ``V`` (L x m) of a fixed-weight ESN or ESGRU."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if states is None:
        run = DYNAMICS[dynamics]
        states = [run(weights, s.X) for s in dataset]
    F = _stack(states)
    Y = _stack([np.asarray(s.Y, dtype=float) for s in dataset])
    return ridge_fit(F, Y, lam)


__all__ = [
    "AlignmentResult",
    "FitReport",
    "SingularProblemError",
    "WriteTargets",
    "align_costs",
    "align_memory",
    "derive_write_targets",
    "fit_readout",
    "fit_rmm",
    "memory_costs",
    "padded_identity",
    "ridge_fit",
]
