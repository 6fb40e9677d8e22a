import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covsteer.encode import (
    CorpusEncoding,
    FeatureSchema,
    Standardizer,
    encode_txn,
    fit_standardizer,
    sample_windows,
    window_offsets,
)
from covsteer.errors import ConfigError, EncodingError
from covsteer.params import DuvParams
from covsteer.stimgen import NUMERIC_FIELDS, Test, gen_corpus

from oracles import txn

SCHEMA = FeatureSchema.for_params()


def identity():
    k = len(NUMERIC_FIELDS)
    return Standardizer(np.zeros(k), np.ones(k), np.zeros(k, dtype=bool))


def test_schema_width():
    # one-hot widths 2 + 4 + 4 + 3 + 2 plus 10 numeric attributes
    assert SCHEMA.onehot_dim == 15
    assert SCHEMA.dim == 25


def test_population_std_by_hand():
    t = Test(0, (txn(gap=0), txn(gap=2)))
    std = fit_standardizer([t])
    i = NUMERIC_FIELDS.index("gap")
    assert std.mean[i] == 1.0 and std.std[i] == 1.0


def test_constant_attribute():
    t = Test(0, (txn(gap=0, burst_len=3, kind="INCR"), txn(gap=2, burst_len=3, kind="INCR")))
    std = fit_standardizer([t])
    i = NUMERIC_FIELDS.index("burst_len")
    assert std.constant[i] and std.scale[i] == 1.0
    assert encode_txn(t.txns[0], SCHEMA, std)[SCHEMA.onehot_dim + i] == 0.0


def test_empty_fit():
    with pytest.raises(ConfigError):
        fit_standardizer([])


def test_read_block():
    v = encode_txn(txn(ttype="READ"), SCHEMA, identity())
    assert list(v[:2]) == [1.0, 0.0]


def test_value_at_mean_is_zero():
    std = fit_standardizer([Test(0, (txn(gap=1), txn(gap=3)))])
    v = encode_txn(txn(gap=2), SCHEMA, std)
    assert v[SCHEMA.onehot_dim + NUMERIC_FIELDS.index("gap")] == 0.0


def test_default_txn_has_five_ones():
    v = encode_txn(txn(), SCHEMA, identity())
    assert v.shape == (25,)
    assert np.count_nonzero(v[: SCHEMA.onehot_dim]) == 5 and v[: SCHEMA.onehot_dim].sum() == 5


def test_unknown_category():
    with pytest.raises(EncodingError):
        encode_txn(txn(slave=5), SCHEMA, identity())


def test_six_transaction_window_example():
    t = Test(0, tuple(txn(gap=i) for i in range(6)))
    ws = sample_windows(t, 3, 3)
    assert [w.offset for w in ws] == [0, 3]
    gap = SCHEMA.onehot_dim + NUMERIC_FIELDS.index("gap")
    assert [list(w.vectors[:, gap]) for w in ws] == [[0, 1, 2], [3, 4, 5]]


def test_tail_window():
    assert window_offsets(7, 3, 3) == [0, 3, 4]
    assert window_offsets(6, 3, 1) == [0, 1, 2, 3]


def test_step_longer_than_window_rejected():
    with pytest.raises(ConfigError, match="must not exceed"):
        window_offsets(10, 3, 4)


def test_short_test_is_left_padded():
    t = Test(0, (txn(gap=1), txn(gap=2)))
    (w,) = sample_windows(t, 3, 3)
    assert w.offset == -1
    assert np.all(w.vectors[0] == 0)
    assert np.array_equal(w.vectors[1], encode_txn(t.txns[0], SCHEMA, identity()))
    assert np.array_equal(w.vectors[2], encode_txn(t.txns[1], SCHEMA, identity()))


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 60), L=st.integers(1, 8), data=st.data())
def test_every_transaction_covered(n, L, data):
    step = data.draw(st.integers(1, L))
    offs = window_offsets(n, L, step)
    covered = {o + p for o in offs for p in range(L) if 0 <= o + p < n}
    assert covered == set(range(n))
    assert offs == sorted(set(offs))
    if n >= L:
        assert all(0 <= o <= n - L for o in offs)


def test_corpus_encoding_matches_per_test_windows():
    corpus = gen_corpus(3, 12, len_range=(1, 9))
    enc = CorpusEncoding(corpus)
    std = enc.fit_standardizer(range(12))
    assert np.allclose(std.mean, fit_standardizer(corpus).mean)
    X, owner = enc.windows(range(12), 3, 2, std)
    ref = [w.vectors for t in corpus for w in sample_windows(t, 3, 2, SCHEMA, std)]
    assert np.allclose(X, np.array(ref))
    assert list(owner) == [i for i, t in enumerate(corpus) for _ in window_offsets(len(t), 3, 2)]


def test_schema_follows_params():
    s = FeatureSchema.for_params(DuvParams(M=2, S=3))
    assert s.dim == 2 + 2 + 3 + 3 + 2 + 10
