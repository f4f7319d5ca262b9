import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leastpriv.dist import Alphabet, JointPmf
from leastpriv.empirical import (
    AuditMatrix,
    Dataset,
    audit_matrix,
    audit_repeated,
    estimate_gains,
    fit_plugin,
    pearson_matrix,
    predict_map,
    sample_dataset,
    split_dataset,
    split_sizes,
)
from leastpriv.errors import LeakageError, NotBinary, TooSmall
from leastpriv.measures import i_inf, i_inf_cond


def _toy(n=100, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    return Dataset({"y": y, "s": rng.integers(0, 3, n), "z": y})


# splits -------------------------------------------------------------------------

def test_split_sizes():
    assert split_sizes(100) == (20, 64, 16)
    assert split_sizes(10) == (2, 6, 2)
    sp = split_dataset(_toy(100), 3)
    assert (sp.adv_idx.size, sp.train_idx.size, sp.eval_idx.size) == (20, 64, 16)
    with pytest.raises(TooSmall):
        split_dataset(_toy(9), 0)


def test_split_determinism():
    ds = _toy(100)
    a, b = split_dataset(ds, 5), split_dataset(ds, 5)
    for x, y in zip((a.adv_idx, a.train_idx, a.eval_idx), (b.adv_idx, b.train_idx, b.eval_idx)):
        assert np.array_equal(x, y)
    assert not np.array_equal(a.adv_idx, split_dataset(ds, 6).adv_idx)


@settings(max_examples=100, deadline=None)
@given(st.integers(10, 400), st.integers(0, 2**32 - 1))
def test_split_partitions_rows(n, seed):
    sp = split_dataset(_toy(n), seed)
    allrows = np.concatenate([sp.adv_idx, sp.train_idx, sp.eval_idx])
    assert np.array_equal(np.sort(allrows), np.arange(n))
    assert sp.adv_idx.size == math.floor(0.2 * n + 0.5)


# plug-in tables -------------------------------------------------------------------

def test_plugin_degenerate_column():
    ds = Dataset({"s": ["a"] * 5, "g": ["0", "1", "0", "1", "1"]})
    t = fit_plugin(ds, np.arange(5), "s", ["g"])
    assert np.array_equal(t.conditional(np.array([[0], [1]])), [[1.0], [1.0]])


def test_plugin_frequency_and_smoothing():
    ds = Dataset({"s": [0, 0, 0, 1], "g": ["a"] * 4})
    t = fit_plugin(ds, np.arange(4), "s", ["g"])
    assert np.allclose(t.conditional(np.array([0])), [[0.75, 0.25]])
    t1 = fit_plugin(ds, np.arange(4), "s", ["g"], smoothing=1.0)
    assert np.allclose(t1.conditional(np.array([0])), [[4 / 6, 2 / 6]])
    with pytest.raises(LeakageError):
        fit_plugin(ds, np.arange(0), "s", ["g"])


def test_predict_map_rules():
    ds = Dataset({"s": [0, 0, 0, 1, 0, 1, 1, 1, 1], "g": ["a"] * 4 + ["b"] * 2 + ["c"] * 3})
    t = fit_plugin(ds, np.arange(9), "s", ["g"])
    assert predict_map(t, ["a"]) == "0"
    assert predict_map(t, ["b"]) == "0"  # exact tie goes to the lowest index
    assert predict_map(t, ["c"]) == "1"
    # fitted on rows without "c": the cell is unseen and the marginal decides
    t2 = fit_plugin(ds, np.arange(6), "s", ["g"])
    assert np.allclose(t2.conditional(np.array([2])), t2.marginal)
    assert predict_map(t2, ["c"]) == "0"
    assert predict_map(t2, ["never"]) == "0"


def test_plugin_recovers_known_conditional():
    rng = np.random.default_rng(11)
    p = rng.dirichlet(np.ones(12)).reshape(4, 3)
    j = JointPmf((Alphabet.range("G", 4), Alphabet.range("S", 3)), p)
    ds = sample_dataset(j, 100_000, 11)
    t = fit_plugin(ds, np.arange(ds.n), "S", ["G"])
    est = t.conditional(np.arange(4).reshape(-1, 1))
    true = p / p.sum(axis=1, keepdims=True)
    tv = 0.5 * np.abs(est - true).sum(axis=1)
    assert tv.max() <= 0.02


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_predict_invariant_to_row_order(seed):
    rng = np.random.default_rng(seed)
    n = 60
    ds = Dataset({"s": rng.integers(0, 3, n), "a": rng.integers(0, 2, n), "b": rng.integers(0, 3, n)})
    rows = rng.choice(n, size=40, replace=False)
    t1 = fit_plugin(ds, rows, "s", ["a", "b"])
    t2 = fit_plugin(ds, rng.permutation(rows), "s", ["a", "b"])
    q = np.stack([ds.column("a").codes, ds.column("b").codes], axis=1)
    assert np.array_equal(t1.predict_codes(q), t2.predict_codes(q))


# gains and matrices ---------------------------------------------------------------

def test_constant_representation():
    rng = np.random.default_rng(1)
    n = 20_000
    y = rng.integers(0, 2, n)
    s = np.where(rng.random(n) < 0.8, y, 1 - y)
    ds = Dataset({"y": y, "s": s, "z": np.zeros(n, dtype=int)})
    c = estimate_gains(ds, split_dataset(ds, 1), "y", "s", ["z"])
    assert abs(c.adv_gain) < 0.01 and abs(c.utility) < 0.01 and abs(c.delta_adv) < 0.02
    assert c.delta_adv == c.adv_gain - c.utility


def test_sensitive_equals_task():
    rng = np.random.default_rng(2)
    n = 20_000
    y = rng.choice(3, size=n, p=[0.5, 0.3, 0.2])
    ds = Dataset({"y": y, "z": rng.integers(0, 4, n)})
    sp = split_dataset(ds, 2)
    c = estimate_gains(ds, sp, "y", "y", ["z"])
    top = np.bincount(ds.column("y").codes[sp.eval_idx]).max() / sp.eval_idx.size
    assert c.fundamental == pytest.approx(math.log2(1 / top), abs=1e-12)
    assert c.adv_gain == pytest.approx(0.0, abs=1e-12)


def test_negative_estimates_not_clamped():
    rng = np.random.default_rng(3)
    n = 200
    ds = Dataset({"y": rng.integers(0, 2, n), "s": rng.integers(0, 2, n), "z": rng.integers(0, 8, n)})
    vals = []
    for seed in range(20):
        c = estimate_gains(ds, split_dataset(ds, seed), "y", "s", ["z"])
        vals.append(min(c.fundamental, c.adv_gain, c.utility))
        if min(c.fundamental, c.adv_gain, c.utility) < 0:
            assert c.noisy
    assert min(vals) < 0


def test_audit_matrix_shape_and_diagonal():
    rng = np.random.default_rng(4)
    n = 500
    ds = Dataset({k: rng.integers(0, 2, n) for k in ("a", "b", "c", "z")})
    m = audit_matrix(ds, split_dataset(ds, 0), ["a", "b"], ["a", "b", "c"], ["z"])
    assert m.values().shape == (2, 3)
    assert m.cell("a", "a").diagonal and not m.cell("a", "b").diagonal
    assert m.top_attribute("a") in ("b", "c")
    for row in m.cells:
        for c in row:
            assert c.delta_adv == c.adv_gain - c.utility


def test_all_constant_dataset():
    ds = Dataset({k: ["0"] * 50 for k in ("a", "b", "z")})
    m = audit_matrix(ds, split_dataset(ds, 0), ["a"], ["b"], ["z"])
    c = m.cell("a", "b")
    assert (c.fundamental, c.adv_gain, c.utility) == (0.0, 0.0, 0.0)


def test_z_provider_forms_agree():
    rng = np.random.default_rng(5)
    n = 400
    ds = Dataset({k: rng.integers(0, 3, n) for k in ("y", "s", "z1", "z2")})
    sp = split_dataset(ds, 0)
    a = audit_matrix(ds, sp, ["y"], ["s"], ["z1", "z2"])
    b = audit_matrix(ds, sp, ["y"], ["s"], {"y": ["z1", "z2"]})
    c = audit_matrix(ds, sp, ["y"], ["s"], lambda task, split: (ds, ["z1", "z2"]))
    assert a.to_json() == b.to_json() == c.to_json()


def test_matrix_serialization_round_trip():
    rng = np.random.default_rng(6)
    ds = Dataset({k: rng.integers(0, 2, 300) for k in ("y", "s", "z")})
    m = audit_repeated(ds, ["y"], ["s", "y"], ["z"], repeats=3, seed=1)
    doc = json.loads(m.to_json())
    assert doc["meta"] == {"repeats": 3, "seed": 1}
    back = AuditMatrix.from_dict(doc)
    assert back.to_csv() == m.to_csv()
    assert m.to_csv().splitlines()[0] == "task,sensitive,fundamental,adv_gain,utility,delta_adv"


def test_repeated_audit_independent_of_jobs():
    rng = np.random.default_rng(7)
    ds = Dataset({k: rng.integers(0, 3, 1000) for k in ("y", "s", "z")})
    a = audit_repeated(ds, ["y"], ["s"], ["z"], repeats=4, seed=2, jobs=1)
    b = audit_repeated(ds, ["y"], ["s"], ["z"], repeats=4, seed=2, jobs=3)
    assert a.to_json() == b.to_json()


@pytest.mark.parametrize("seed", range(3))
def test_estimates_close_to_exact(seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(2 * 2 * 3)).reshape(2, 2, 3)
    j = JointPmf((Alphabet.range("S", 2), Alphabet.range("Y", 2), Alphabet.range("Z", 3)), p)
    ds = sample_dataset(j, 100_000, seed)
    c = audit_repeated(ds, ["Y"], ["S"], ["Z"], repeats=5, seed=seed).cell("Y", "S")
    assert abs(c.fundamental - i_inf(j.marginal("S", "Y"))) <= 0.02
    assert abs(c.adv_gain - i_inf_cond(j, "S", "Z", "Y")) <= 0.02
    assert abs(c.utility - i_inf(j.marginal("Y", "Z"))) <= 0.02


# correlation ------------------------------------------------------------------------

def test_pearson_examples():
    rng = np.random.default_rng(8)
    a = rng.integers(0, 2, 100_000)
    ds = Dataset({"a": a, "same": a, "flip": 1 - a, "coin": rng.integers(0, 2, 100_000)})
    m = pearson_matrix(ds, ["a", "same", "flip", "coin"])
    assert m[0, 1] == pytest.approx(1.0) and m[0, 2] == pytest.approx(1.0)
    assert m[0, 3] <= 0.02
    assert np.allclose(m, m.T) and np.all(np.diag(m) == 1.0)
    assert np.all((m >= 0) & (m <= 1))


def test_pearson_constant_and_non_binary():
    ds = Dataset({"a": [0, 1, 0, 1], "c": [1, 1, 1, 1], "t": [0, 1, 2, 0]})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = pearson_matrix(ds, ["a", "c"])
    assert m[0, 1] == 0.0 and caught
    with pytest.raises(NotBinary):
        pearson_matrix(ds, ["a", "t"])


def test_dataset_csv_round_trip(tmp_path):
    ds = Dataset({"a": ["x", "y", "x"], "b": [1, 2, 3]})
    path = tmp_path / "d.csv"
    path.write_text(ds.to_csv())
    back = Dataset.from_csv(path)
    assert back.names == ["a", "b"] and list(back.values("b")) == ["1", "2", "3"]
    with pytest.raises(LeakageError):
        Dataset.from_csv("a,b\n1\n", is_text=True)
    with pytest.raises(LeakageError):
        Dataset({"a": [1, 2], "b": [1]})
