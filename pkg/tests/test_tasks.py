import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resmem.tasks import (
    TaskSample,
    copy_sample,
    gen_copy,
    gen_latch,
    gen_repeat_copy,
    gen_shift_benchmark,
    generate_dataset,
    latch_targets,
    load_dataset,
    save_dataset,
)


def test_latch_toggle_example():
    # spikes at steps 2, 5, 8 counting from one
    y = latch_targets(10, [1, 4, 7])
    assert y.tolist() == [0, 1, 1, 1, 0, 0, 0, 1, 1, 1]


def test_latch_without_spikes():
    assert not latch_targets(7, []).any()


@given(st.integers(0, 2**32 - 1), st.integers(6, 300), st.integers(0, 3))
@settings(max_examples=80, deadline=None)
def test_latch_properties(seed, max_len, n_spikes):
    s = gen_latch(seed, max_len=max_len, n_spikes=n_spikes)
    T = s.length
    assert min(20, max_len) <= T <= max_len
    assert s.X.shape == (T, 1) and s.Y.shape == (T, 1)
    spikes = np.flatnonzero(s.X[:, 0])
    assert len(spikes) == n_spikes and s.meta["spikes"] == spikes.tolist()
    assert np.all(spikes >= 1) and set(np.unique(s.X)) <= {0.0, 1.0}
    assert s.Y[0, 0] == 0
    changes = np.flatnonzero(np.diff(s.Y[:, 0])) + 1
    assert changes.tolist() == spikes.tolist()


def test_latch_errors_and_determinism():
    with pytest.raises(ValueError):
        gen_latch(0, max_len=5, n_spikes=3)
    with pytest.raises(ValueError):
        gen_latch(0, length=3, n_spikes=3)
    a, b = gen_latch(7), gen_latch(7)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    assert gen_latch(0, length=1700, n_spikes=8).length == 1700


def test_copy_example():
    payload = np.zeros((2, 8))
    payload[0, 0] = payload[1, 1] = 1
    s = copy_sample(payload)
    assert s.X.shape == (5, 9) and s.Y.shape == (5, 8)
    assert np.array_equal(s.Y[3:], payload)
    assert not s.Y[:3].any()
    assert s.X[2, 8] == 1 and not s.X[3:].any()
    assert copy_sample(np.ones((1, 8))).length == 3


@given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.integers(1, 8))
@settings(max_examples=60, deadline=None)
def test_copy_properties(seed, max_payload, bits):
    s = gen_copy(seed, max_payload=max_payload, bits=bits)
    P = s.meta["payload_length"]
    assert 1 <= P <= max_payload and s.length == 2 * P + 1
    assert s.X.shape[1] == bits + 1 and s.Y.shape[1] == bits
    payload = s.X[:P, :bits]
    assert set(np.unique(payload)) <= {0.0, 1.0}
    assert np.array_equal(s.Y[P + 1:], payload)
    assert not s.X[:P, bits].any() and s.X[P, bits] == 1


def test_copy_full_scale_shape():
    s = gen_copy(3)
    assert s.X.shape[1] == 9 and s.Y.shape[1] == 8 and s.length <= 41


def test_repeat_copy_example():
    payload = np.eye(2, 8)
    s = copy_sample(payload, repeats=2, cue=2 / 3, task="repeat_copy")
    assert s.length == 7
    assert np.array_equal(s.Y[3:5], payload) and np.array_equal(s.Y[5:7], payload)
    assert s.X[:, 8].tolist() == [0, 0, 2 / 3, 0, 0, 0, 0]
    marked = copy_sample(payload, repeats=2, cue=2 / 3, task="repeat_copy", markers=True)
    assert marked.X[:, 8].tolist() == [0, 0, 2 / 3, 0, 2 / 3, 0, 0]
    assert np.array_equal(marked.Y, s.Y)


@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 4), st.booleans())
@settings(max_examples=60, deadline=None)
def test_repeat_copy_properties(seed, max_payload, max_repeats, markers):
    s = gen_repeat_copy(seed, max_payload=max_payload, max_repeats=max_repeats, markers=markers)
    P, rho = s.meta["payload_length"], s.meta["repeats"]
    assert 1 <= rho <= max_repeats and s.length == P + 1 + rho * P
    cue = rho / max_repeats
    assert s.X[P, 8] == pytest.approx(cue)
    for j in range(rho):
        assert np.array_equal(s.Y[P + 1 + j * P: P + 1 + (j + 1) * P], s.X[:P, :8])
    end_channel = np.flatnonzero(s.X[:, 8])
    expected = [P] + ([P + j * P for j in range(1, rho)] if markers else [])
    assert end_channel.tolist() == expected


def test_single_repeat_matches_copy_shape():
    rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
    s = gen_repeat_copy(rng_a, max_repeats=1)
    c = gen_copy(rng_b)
    assert s.X.shape == c.X.shape and np.array_equal(s.Y, c.Y)


def test_shift_examples():
    s = gen_shift_benchmark(0, 3)
    assert np.array_equal(s.Y[1:], s.X[:-1]) and not s.Y[0].any()
    assert gen_shift_benchmark(0, 2).Y[1].tolist() == gen_shift_benchmark(0, 2).X[0].tolist()
    assert gen_shift_benchmark(1, 10).X.shape == (10, 8)
    with pytest.raises(ValueError):
        gen_shift_benchmark(0, 1)


def test_dataset_generation():
    a = generate_dataset("copy", 5, 11, max_payload=6)
    b = generate_dataset("copy", 5, 11, max_payload=6)
    assert all(np.array_equal(x.X, y.X) for x, y in zip(a, b))
    c = generate_dataset("copy", 5, 12, max_payload=6)
    assert any(not np.array_equal(x.X, y.X) for x, y in zip(a, c))
    assert len(generate_dataset("shift", 3, 0, length=7)) == 3
    with pytest.raises(ValueError, match="latch"):
        generate_dataset("sort", 2, 0)


def test_json_round_trip(tmp_path):
    data = generate_dataset("repeat_copy", 3, 1, max_payload=4) + generate_dataset("latch", 2, 1)
    path = tmp_path / "d.json"
    save_dataset(data, path)
    back = load_dataset(path)
    assert len(back) == 5
    for s, t in zip(data, back):
        assert np.array_equal(s.X, t.X) and np.array_equal(s.Y, t.Y)
        assert s.task == t.task and s.meta == t.meta
    single = TaskSample.from_dict(data[0].to_dict())
    assert set(data[0].to_dict()) == {"task", "n", "L", "X", "Y", "meta"}
    assert single.length == data[0].length


def test_sample_length_mismatch():
    with pytest.raises(ValueError):
        TaskSample(np.zeros((3, 1)), np.zeros((4, 1)))
