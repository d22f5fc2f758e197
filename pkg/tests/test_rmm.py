import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import rmm_reference
from resmem.reservoir import CrjHyperparams, build_crj, esn_run
from resmem.rmm import (
    ReadAction,
    RmmParams,
    RmmState,
    memory_from_writes,
    positions_from_actions,
    rmm_predict,
    rmm_run,
    rmm_step,
)


def make_weights(m=12, n=3, seed=0):
    rng = np.random.default_rng(seed)
    hp = CrjHyperparams(
        float(rng.uniform(0.1, 0.9)), float(rng.uniform(0, 0.9)), float(rng.uniform(0, 0.9)),
        int(rng.integers(2, m - 2)), m, n,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return build_crj(hp)


def random_params(n, m, L, K, rng, scale=1.0):
    return RmmParams(
        rng.normal(size=n) * scale, rng.normal(size=m) * scale,
        rng.normal(size=(3, n)), rng.normal(size=(3, m)),
        rng.normal(size=(L, m)), rng.normal(size=(L, n)), K,
    )


def test_param_shape_validation():
    p = RmmParams.zeros(3, 5, 2, 4)
    assert (p.input_dim, p.reservoir_size, p.output_dim) == (3, 5, 2)
    with pytest.raises(ValueError):
        RmmParams(np.zeros(3), np.zeros(5), np.zeros((2, 3)), np.zeros((3, 5)),
                  np.zeros((2, 5)), np.zeros((2, 3)), 4)
    with pytest.raises(ValueError):
        RmmParams(np.zeros(3), np.zeros(5), np.zeros((3, 3)), np.zeros((3, 5)),
                  np.zeros((2, 5)), np.zeros((2, 4)), 4)
    with pytest.raises(ValueError):
        RmmParams.zeros(3, 5, 2, 0)


def test_param_dict_round_trip():
    p = random_params(3, 5, 2, 4, np.random.default_rng(1))
    q = RmmParams.from_dict(p.to_dict())
    for name in ("write_input", "write_state", "read_input", "read_state",
                 "readout_state", "readout_memory"):
        assert np.array_equal(getattr(p, name), getattr(q, name))
    assert q.memory_size == 4


def _step_params(n=2, m=3, K=2, write=1.0, read=(0.0, 0.0, 0.0)):
    p = RmmParams.zeros(n, m, 1, K)
    p.write_input = np.full(n, write)
    p.read_input = np.tile(np.asarray(read, dtype=float)[:, None], (1, n)) / n
    return p


def test_write_wraps_at_last_slot():
    p = _step_params(K=2)
    state = RmmState(np.zeros(3), np.zeros((2, 2)), 1, 0)
    x = np.array([1.0, 2.0])
    new, trace = rmm_step(state, x, np.zeros(3), p)
    assert trace.wrote
    assert np.array_equal(new.memory[1], x)
    assert new.write_pos == 0


def test_zero_write_control_does_not_write():
    p = _step_params(write=0.0)
    state = RmmState.initial(3, 2, 2)
    new, trace = rmm_step(state, np.ones(2), np.zeros(3), p)
    assert trace.write_control == 0.0 and not trace.wrote
    assert not new.memory.any() and new.write_pos == 0


def test_read_ties_prefer_stay():
    p = _step_params(read=(0.2, 0.2, 0.1))
    _, trace = rmm_step(RmmState.initial(3, 2, 2), np.ones(2), np.zeros(3), p)
    assert trace.read_action is ReadAction.STAY
    p = _step_params(read=(0.1, 0.2, 0.2))
    _, trace = rmm_step(RmmState.initial(3, 2, 2), np.ones(2), np.zeros(3), p)
    assert trace.read_action is ReadAction.INCREMENT


def test_increment_wraps_and_reset_returns_to_first_slot():
    p = _step_params(K=3, write=-1.0, read=(0.0, 1.0, 0.0))
    state = RmmState(np.zeros(3), np.zeros((3, 2)), 0, 2)
    new, trace = rmm_step(state, np.ones(2), np.zeros(3), p)
    assert new.read_pos == 0
    p = _step_params(K=3, write=-1.0, read=(0.0, 0.0, 1.0))
    state = RmmState(np.zeros(3), np.zeros((3, 2)), 0, 1)
    new, trace = rmm_step(state, np.ones(2), np.zeros(3), p)
    assert trace.read_action is ReadAction.RESET and new.read_pos == 0


def test_step_rejects_bad_dimensions():
    p = _step_params()
    with pytest.raises(ValueError):
        rmm_step(RmmState.initial(3, 2, 2), np.ones(3), np.zeros(3), p)


def test_always_writing_keeps_last_inputs_in_ring_order():
    n, m, K, T = 2, 8, 3, 7
    w = make_weights(m, n)
    X = np.random.default_rng(2).uniform(0.5, 1.0, size=(T, n))
    p = RmmParams.zeros(n, m, 1, K)
    p.write_input = np.ones(n)  # c^w > 0 for positive inputs
    _, traces, states = rmm_run(w, p, X)
    assert all(tr.wrote for tr in traces)
    final = states[-1].memory
    for t in range(T - K, T):
        assert np.array_equal(final[t % K], X[t])
    assert states[-1].write_pos == T % K


def test_empty_sequence():
    w = make_weights()
    p = RmmParams.zeros(3, 12, 2, 4)
    Y, traces, states = rmm_run(w, p, np.zeros((0, 3)))
    assert Y.shape == (0, 2) and traces == [] and states == []
    assert rmm_predict(w, p, np.zeros((0, 3))).shape == (0, 2)


rmm_case = st.tuples(
    st.integers(0, 2**32 - 1),  # seed
    st.integers(1, 4),  # n
    st.integers(5, 16),  # m
    st.integers(1, 3),  # L
    st.integers(1, 6),  # K
    st.integers(1, 25),  # T
)


def _draw(case):
    seed, n, m, L, K, T = case
    rng = np.random.default_rng(seed)
    w = make_weights(m, n, seed)
    p = random_params(n, m, L, K, rng)
    X = rng.integers(-2, 3, size=(T, n)).astype(float)
    return w, p, X


@given(rmm_case)
@settings(max_examples=60, deadline=None)
def test_run_matches_reference_simulation(case):
    w, p, X = _draw(case)
    Y, traces, _ = rmm_run(w, p, X)
    params = dict(uw=p.write_input, vw=p.write_state, Ur=p.read_input, Vr=p.read_state,
                  V=p.readout_state, R=p.readout_memory, K=p.memory_size)
    Y_ref, writes, reads = rmm_reference(w.U, w.W, params, X)
    np.testing.assert_allclose(Y, Y_ref, atol=1e-10)
    assert [tr.wrote for tr in traces] == writes


@given(rmm_case)
@settings(max_examples=60, deadline=None)
def test_vectorized_rollout_matches_stepwise(case):
    w, p, X = _draw(case)
    Y, _, _ = rmm_run(w, p, X)
    np.testing.assert_allclose(rmm_predict(w, p, X), Y, atol=1e-12)


@given(rmm_case)
@settings(max_examples=60, deadline=None)
def test_state_invariants(case):
    w, p, X = _draw(case)
    K = p.memory_size
    _, traces, states = rmm_run(w, p, X)
    prev = np.zeros((K, X.shape[1]))
    for x, tr, st_ in zip(X, traces, states):
        assert 0 <= st_.write_pos < K and 0 <= st_.read_pos < K
        changed = np.flatnonzero(np.any(st_.memory != prev, axis=1))
        assert len(changed) <= 1
        if len(changed):
            assert tr.write_control > 0
        if tr.wrote:
            assert any(np.array_equal(row, x) for row in st_.memory)
        # each row is zero or a past input
        for row in st_.memory:
            assert not row.any() or any(np.array_equal(row, past) for past in X)
        # the read vector is literally the selected row
        assert np.array_equal(tr.read_vector, st_.memory[st_.read_pos])
        assert tr.read_action == int(np.argmax(tr.read_control))
        prev = st_.memory


@given(rmm_case, st.floats(-100, 100))
@settings(max_examples=40, deadline=None)
def test_read_action_ignores_common_offset(case, offset):
    w, p, X = _draw(case)
    _, traces, _ = rmm_run(w, p, X)
    shifted = [ReadAction(int(np.argmax(tr.read_control + offset))) for tr in traces]
    assert shifted == [tr.read_action for tr in traces]


@given(rmm_case)
@settings(max_examples=40, deadline=None)
def test_zero_memory_readout_is_plain_esn(case):
    w, p, X = _draw(case)
    p.readout_memory = np.zeros_like(p.readout_memory)
    Y, _, _ = rmm_run(w, p, X)
    np.testing.assert_allclose(Y, esn_run(w, X) @ p.readout_state.T, atol=1e-12, rtol=0)


def test_positions_from_actions():
    actions = np.array([1, 1, 1, 0, 2, 1, 0, 1])
    assert positions_from_actions(actions, 3).tolist() == [1, 2, 0, 0, 0, 1, 1, 2]


def test_memory_from_writes_ring_buffer():
    X = np.arange(10, dtype=float).reshape(5, 2)
    out = memory_from_writes(X, np.array([1, 0, 1, 1, 1], dtype=bool), 2)
    assert out.slot.tolist() == [0, 1, 1, 0, 1]
    assert out.memory[-1].tolist() == [[6.0, 7.0], [8.0, 9.0]]
    assert out.memory[1].tolist() == [[0.0, 1.0], [0.0, 0.0]]
