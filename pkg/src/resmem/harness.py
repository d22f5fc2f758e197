"""Crossvalidation with nested random search, runtime benchmarks and reports."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import warnings
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .reservoir import DYNAMICS, CrjHyperparams, ReservoirWeights, build_crj
from .rmm import RmmParams, rmm_predict
from .tasks import gen_shift_benchmark
from .training import derive_write_targets, fit_readout, fit_rmm, padded_identity

log = logging.getLogger(__name__)

MODELS = ("esn", "esgru", "rmm")
RESULT_FIELDS = ("model", "task", "fold", "rmse", "seconds")
RUNTIME_FIELDS = ("length", "model", "train_mean", "train_std", "pred_mean", "pred_std")


def substream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Independent generator for the named purpose, derived from one seed."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode()), *map(int, index)])


def rmse(Y, Y_hat) -> float:
    """Root mean squared error pooled over every entry.

    Accepts single arrays or lists of per-sequence arrays.
    """
    if isinstance(Y, np.ndarray) or isinstance(Y_hat, np.ndarray):
        Y, Y_hat = [Y], [Y_hat]
    if len(Y) != len(Y_hat):
        raise ValueError(f"got {len(Y)} target sequences but {len(Y_hat)} predictions")
    sq, count = 0.0, 0
    for y, y_hat in zip(Y, Y_hat):
        y = np.asarray(y, dtype=float)
        y_hat = np.asarray(y_hat, dtype=float)
        if y.shape != y_hat.shape:
            raise ValueError(f"shape mismatch: targets {y.shape}, predictions {y_hat.shape}")
        sq += float(np.sum((y - y_hat) ** 2))
        count += y.size
    if count == 0:
        raise ValueError("no entries to score")
    return math.sqrt(sq / count)


def auto_memory_size(dataset) -> int:
    """Smallest power of two (at least 2) that holds every ideal write of the data."""
    need = 1
    for s in dataset:
        R = padded_identity(s.Y.shape[1], s.X.shape[1])
        need = max(need, derive_write_targets(s.X, s.Y, R).tau.size)
    return max(2, 1 << (need - 1).bit_length())


@dataclass(frozen=True)
class Trial:
    """One point of the hyperparameter search."""

    input_weight: float
    cycle_weight: float
    jump_weight: float
    jump_length: int
    lam: float
    memory_size: int | None = None  # None: sized from the training data

    def crj(self, reservoir_size: int, input_dim: int) -> CrjHyperparams:
        return CrjHyperparams(
            self.input_weight, self.cycle_weight, self.jump_weight,
            self.jump_length, reservoir_size, input_dim,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _interval(value, name: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in value)
    if not lo <= hi:
        raise ValueError(f"empty search range for {name}: [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class HyperSpace:
    """Box for random search.

    ``jump_length`` bounds are inclusive; ``None`` means ``2..m // 2``.
    ``memory_sizes`` is a tuple to draw from or ``"auto"``.
    """

    input_weight: tuple[float, float] = (0.05, 0.95)
    cycle_weight: tuple[float, float] = (0.0, 0.99)
    jump_weight: tuple[float, float] = (0.0, 0.99)
    jump_length: tuple[int, int] | None = None
    log10_lam: tuple[float, float] = (-8.0, 0.0)
    memory_sizes: tuple[int, ...] | str = (8, 16, 32)

    def __post_init__(self):
        u = _interval(self.input_weight, "input_weight")
        if u[0] <= -1.0 or u[1] >= 1.0:
            raise ValueError("input_weight range must lie inside (-1, 1)")
        for name in ("cycle_weight", "jump_weight"):
            lo, hi = _interval(getattr(self, name), name)
            if lo < 0.0 or hi >= 1.0:
                raise ValueError(f"{name} range must lie inside [0, 1)")
        _interval(self.log10_lam, "log10_lam")
        if self.jump_length is not None:
            _interval(self.jump_length, "jump_length")
        if self.memory_sizes != "auto":
            if len(self.memory_sizes) == 0:
                raise ValueError("memory_sizes is empty")
            if min(self.memory_sizes) < 2:
                raise ValueError("memory sizes must be at least 2")

    def jump_bounds(self, m: int) -> tuple[int, int]:
        lo, hi = self.jump_length if self.jump_length is not None else (2, m // 2)
        lo, hi = max(int(lo), 2), min(int(hi), m - 2)
        if lo > hi:
            raise ValueError(f"no admissible jump length for reservoir size {m}")
        return lo, hi

    def sample(self, rng: np.random.Generator, reservoir_size: int) -> Trial:
        lo, hi = self.jump_bounds(reservoir_size)
        trial = Trial(
            input_weight=float(rng.uniform(*self.input_weight)),
            cycle_weight=float(rng.uniform(*self.cycle_weight)),
            jump_weight=float(rng.uniform(*self.jump_weight)),
            jump_length=int(rng.integers(lo, hi + 1)),
            lam=float(10.0 ** rng.uniform(*self.log10_lam)),
        )
        if self.memory_sizes != "auto":
            trial = replace(trial, memory_size=int(rng.choice(self.memory_sizes)))
        return trial

    @classmethod
    def for_task(cls, task: str) -> "HyperSpace":
        """Tuned defaults per task; the generic box for anything else."""
        return _PRESETS.get(task, cls())

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "HyperSpace":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown search-space keys: {sorted(unknown)}")
        for k, v in d.items():
            if isinstance(v, list):
                d[k] = tuple(v)
        return cls(**d)

    def updated(self, overrides: dict) -> "HyperSpace":
        return HyperSpace.from_dict({**self.to_dict(), **overrides})


# Latch needs a bistable reservoir: short jumps with strong weights push the
# spectral radius above one so that "a spike has occurred" persists.
# The copy tasks work best with a strong cycle.
_PRESETS = {
    "latch": HyperSpace(
        input_weight=(0.5, 0.95), cycle_weight=(0.0, 0.2), jump_weight=(0.7, 0.99),
        jump_length=(2, 8), log10_lam=(-8.0, -3.0), memory_sizes="auto",
    ),
    "copy": HyperSpace(
        input_weight=(0.05, 0.4), cycle_weight=(0.7, 0.99), jump_weight=(0.5, 0.99),
        log10_lam=(-8.0, -2.0), memory_sizes="auto",
    ),
}
_PRESETS["repeat_copy"] = HyperSpace(
    cycle_weight=(0.75, 0.99), jump_length=(2, 28), memory_sizes="auto",
)


@dataclass(frozen=True)
class ModelSpec:
    name: str = "rmm"
    reservoir_size: int = 128
    max_iters: int = 10

    def __post_init__(self):
        if self.name not in MODELS:
            raise ValueError(f"unknown model {self.name!r}; valid models: {', '.join(MODELS)}")
        if self.reservoir_size < 4:
            raise ValueError("reservoir_size must be at least 4")

    @property
    def dynamics(self) -> str:
        return "esgru" if self.name == "esgru" else "esn"


@dataclass
class FittedModel:
    """A trained model; the reservoir is rebuilt from its hyperparameters."""

    name: str
    crj: CrjHyperparams
    lam: float
    readout: np.ndarray | None = None  # esn / esgru
    rmm: RmmParams | None = None
    _weights: ReservoirWeights | None = field(default=None, repr=False, compare=False)

    @property
    def weights(self) -> ReservoirWeights:
        if self._weights is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                self._weights = build_crj(self.crj)
        return self._weights

    def states(self, X) -> np.ndarray:
        return DYNAMICS["esgru" if self.name == "esgru" else "esn"](self.weights, X)

    def predict(self, X, H: np.ndarray | None = None) -> np.ndarray:
        if H is None:
            H = self.states(X)
        if self.name == "rmm":
            return rmm_predict(self.weights, self.rmm, X, H)
        return H @ self.readout.T

    def to_dict(self) -> dict:
        d = {"model": self.name, "crj": self.crj.to_dict(), "lam": self.lam}
        if self.name == "rmm":
            d["rmm"] = self.rmm.to_dict()
        else:
            d["readout"] = self.readout.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        name = d["model"]
        if name not in MODELS:
            raise ValueError(f"unknown model {name!r} in model file")
        crj = CrjHyperparams(**d["crj"])
        if name == "rmm":
            return cls(name, crj, float(d["lam"]), rmm=RmmParams.from_dict(d["rmm"]))
        readout = np.asarray(d["readout"], dtype=float).reshape(-1, crj.reservoir_size)
        return cls(name, crj, float(d["lam"]), readout=readout)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "FittedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_model(
    spec: ModelSpec,
    trial: Trial,
    train,
    states: list[np.ndarray] | None = None,
    weights: ReservoirWeights | None = None,
) -> FittedModel:
    """Fit one model with fixed hyperparameters."""
    crj = trial.crj(spec.reservoir_size, train[0].X.shape[1])
    if weights is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            weights = build_crj(crj)
    if spec.name == "rmm":
        K = trial.memory_size or auto_memory_size(train)
        report = fit_rmm(weights, train, trial.lam, K, spec.max_iters, states)
        return FittedModel("rmm", crj, trial.lam, rmm=report.final_params, _weights=weights)
    V = fit_readout(weights, train, trial.lam, spec.dynamics, states)
    return FittedModel(spec.name, crj, trial.lam, readout=V, _weights=weights)


def _score(model: FittedModel, samples, states=None) -> float:
    if states is None:
        states = [None] * len(samples)
    return rmse([s.Y for s in samples], [model.predict(s.X, H) for s, H in zip(samples, states)])


@dataclass
class SearchResult:
    best: Trial
    scores: list[float]
    trials: list[Trial]
    model: FittedModel


def select_and_fit(
    train, spec: ModelSpec, space: HyperSpace, trials: int, inner_folds: int,
    rng: np.random.Generator,
) -> SearchResult:
    """Random search scored by inner crossvalidation, then a refit on ``train``.

    The first trial wins ties. Fits that fail numerically score ``inf``.
    """
    if trials < 1:
        raise ValueError("need at least one search trial")
    if not 2 <= inner_folds <= len(train):
        raise ValueError(f"inner_folds must lie in [2, {len(train)}], got {inner_folds}")
    K = None if space.memory_sizes != "auto" else auto_memory_size(train)
    drawn = []
    for _ in range(trials):
        t = space.sample(rng, spec.reservoir_size)
        drawn.append(t if t.memory_size is not None else replace(t, memory_size=K))
    blocks = np.array_split(np.arange(len(train)), inner_folds)
    run = DYNAMICS[spec.dynamics]

    scores = []
    best_i, best_cache = 0, None
    for i, t in enumerate(drawn):
        crj = t.crj(spec.reservoir_size, train[0].X.shape[1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            weights = build_crj(crj)
        H = [run(weights, s.X) for s in train]
        fold_scores = []
        try:
            for held in blocks:
                keep = np.setdiff1d(np.arange(len(train)), held)
                model = fit_model(spec, t, [train[i] for i in keep], [H[i] for i in keep], weights)
                fold_scores.append(_score(model, [train[i] for i in held], [H[i] for i in held]))
            score = float(np.mean(fold_scores))
        except np.linalg.LinAlgError as exc:
            log.debug("trial %s failed: %s", t, exc)
            score = math.inf
        scores.append(score if np.isfinite(score) else math.inf)
        if best_cache is None or scores[i] < scores[best_i]:
            best_i, best_cache = i, (weights, H)

    best = drawn[best_i]
    weights, H = best_cache
    model = fit_model(spec, best, train, H, weights)
    return SearchResult(best, scores, drawn, model)


@dataclass
class CvReport:
    model: str
    task: str
    fold_rmse: list[float]
    chosen: list[dict]
    seconds: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_rmse))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_rmse))

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "task": self.task,
            "folds": len(self.fold_rmse),
            "mean": self.mean,
            "std": self.std,
            "fold_rmse": list(self.fold_rmse),
            "chosen": list(self.chosen),
            "seconds": list(self.seconds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CvReport":
        return cls(d["model"], d["task"], list(d["fold_rmse"]), list(d["chosen"]), list(d["seconds"]))

    def rows(self) -> list[dict]:
        return [
            {"model": self.model, "task": self.task, "fold": i, "rmse": r, "seconds": s}
            for i, (r, s) in enumerate(zip(self.fold_rmse, self.seconds))
        ]


def fold_indices(N: int, folds: int) -> list[np.ndarray]:
    """Contiguous equal blocks of sample indices."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if N % folds:
        raise ValueError(f"{N} samples cannot be split into {folds} equal folds")
    return np.split(np.arange(N), folds)


def crossvalidate(
    dataset,
    folds: int,
    spec: ModelSpec,
    space: HyperSpace | None = None,
    trials: int = 10,
    inner_folds: int = 3,
    seed: int = 0,
) -> CvReport:
    """Outer crossvalidation around :func:`select_and_fit`."""
    dataset = list(dataset)
    blocks = fold_indices(len(dataset), folds)
    task = dataset[0].task if dataset else ""
    if space is None:
        space = HyperSpace.for_task(task)
    report = CvReport(spec.name, task, [], [], [])
    for i, test_idx in enumerate(blocks):
        start = time.perf_counter()
        held = set(test_idx.tolist())
        train = [s for j, s in enumerate(dataset) if j not in held]
        test = [dataset[j] for j in test_idx]
        result = select_and_fit(train, spec, space, trials, inner_folds, substream(seed, "search", i))
        err = _score(result.model, test)
        report.fold_rmse.append(err)
        report.chosen.append(result.best.to_dict())
        report.seconds.append(time.perf_counter() - start)
        log.info("%s fold %d: test RMSE %.4g", spec.name, i, err)
    return report


BENCH_TRIAL = Trial(0.5, 0.7, 0.5, 8, 1e-6, 16)


def bench_runtime(
    lengths,
    spec: ModelSpec,
    repeats: int = 3,
    seed: int = 0,
    trial: Trial = BENCH_TRIAL,
) -> list[dict]:
    """Fit and predict wall-clock times on the shift sequence, per length."""
    lengths = [int(T) for T in lengths]
    if not lengths:
        raise ValueError("need at least one length")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    rows = []
    for T in lengths:
        train_t, pred_t = [], []
        for r in range(repeats):
            sample = gen_shift_benchmark(substream(seed, "bench", T, r), T)
            start = time.perf_counter()
            model = fit_model(spec, trial, [sample])
            mid = time.perf_counter()
            model.predict(sample.X)
            stop = time.perf_counter()
            train_t.append(mid - start)
            pred_t.append(stop - mid)
        rows.append({
            "length": T,
            "model": spec.name,
            "train_mean": float(np.mean(train_t)),
            "train_std": float(np.std(train_t)),
            "pred_mean": float(np.mean(pred_t)),
            "pred_std": float(np.std(pred_t)),
        })
    return rows


def write_csv(rows, fields, stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in fields})


def write_results_csv(reports, stream) -> None:
    write_csv([row for rep in reports for row in rep.rows()], RESULT_FIELDS, stream)


def write_runtimes_csv(rows, stream) -> None:
    write_csv(rows, RUNTIME_FIELDS, stream)


def write_summary_json(report: CvReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


__all__ = [
    "BENCH_TRIAL",
    "CvReport",
    "FittedModel",
    "HyperSpace",
    "MODELS",
    "ModelSpec",
    "SearchResult",
    "Trial",
    "auto_memory_size",
    "bench_runtime",
    "crossvalidate",
    "fit_model",
    "fold_indices",
    "rmse",
    "select_and_fit",
    "substream",
    "write_results_csv",
    "write_runtimes_csv",
    "write_summary_json",
]
