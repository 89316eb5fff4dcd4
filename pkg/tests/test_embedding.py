import numpy as np
import pytest

from qin.config import HyperParams
from qin.embedding import (EmbeddingStore, embedding_grad_accumulate, load_embeddings,
                           lookup_sequence, lookup_target, save_embeddings)
from qin.errors import BadMagicError, ConfigError, DataError, TruncatedFileError
from qin.linalg import make_rng
from qin.params import init_params, zero_gradients


def make_store(count=10, dim=4, seed=0):
    data = make_rng(seed).standard_normal((count, dim)).astype(np.float32).astype(np.float64)
    return EmbeddingStore(data=data)


def test_embedding_file_roundtrip_bit_exact(tmp_path):
    store = make_store()
    path = tmp_path / "emb.qemb"
    save_embeddings(store.data, str(path))
    loaded = load_embeddings(str(path))
    assert np.array_equal(loaded.data, store.data)


def test_embedding_file_bad_magic(tmp_path):
    path = tmp_path / "bad.qemb"
    path.write_bytes(b"NOTEMB1" + b"\x00" * 16)
    with pytest.raises(BadMagicError):
        load_embeddings(str(path))


def test_embedding_file_truncated(tmp_path):
    store = make_store()
    path = tmp_path / "emb.qemb"
    save_embeddings(store.data, str(path))
    data = path.read_bytes()
    cut = tmp_path / "cut.qemb"
    cut.write_bytes(data[:-8])
    with pytest.raises(TruncatedFileError):
        load_embeddings(str(cut))


def test_lookup_target_concat_layout():
    store = make_store()
    table = make_rng(1).standard_normal((10, 3))
    x_t = lookup_target(store, table, np.array([2, 5]))
    assert x_t.shape == (2, 7)
    assert np.array_equal(x_t[0, :4], store.data[2])
    assert np.array_equal(x_t[0, 4:], table[2])


def test_lookup_zero_rows_give_zero_vector():
    store = EmbeddingStore(data=np.zeros((4, 3)))
    table = np.zeros((4, 2))
    x_t = lookup_target(store, table, np.array([1]))
    assert np.array_equal(x_t, np.zeros((1, 5)))


def test_lookup_purity():
    store = make_store()
    table = make_rng(2).standard_normal((10, 3))
    a = lookup_target(store, table, np.array([7]))
    b = lookup_target(store, table, np.array([7]))
    assert np.array_equal(a, b)


def test_lookup_out_of_range():
    store = make_store(count=5)
    table = np.zeros((5, 2))
    with pytest.raises(DataError, match="out of range"):
        lookup_target(store, table, np.array([5]))
    with pytest.raises(DataError, match="out of range"):
        lookup_sequence(store, table, np.array([[99]]), np.ones((1, 1)))


def test_store_dim_config_error():
    # d_t smaller than the frozen dim leaves no room for the id table.
    with pytest.raises(ConfigError):
        HyperParams(d_t=4, d_b=4, d_a=4, vocab=10, d_frozen=4)


def test_sequence_padding_zeroed():
    store = make_store()
    table = make_rng(3).standard_normal((10, 3))
    seq_ids = np.array([[1, 2, 0, 0]])
    mask = np.array([[1.0, 1.0, 0.0, 0.0]])
    x_b = lookup_sequence(store, table, seq_ids, mask)
    assert np.array_equal(x_b[0, 2], np.zeros(7))
    assert np.array_equal(x_b[0, 3], np.zeros(7))
    assert np.array_equal(x_b[0, 0, :4], store.data[1])


def test_sequence_empty_history():
    store = make_store()
    table = np.zeros((10, 3))
    x_b = lookup_sequence(store, table, np.zeros((1, 4), dtype=np.int64), np.zeros((1, 4)))
    assert np.array_equal(x_b, np.zeros((1, 4, 7)))


def test_sequence_positionwise_permutation():
    store = make_store()
    table = make_rng(4).standard_normal((10, 3))
    mask = np.ones((1, 3))
    a = lookup_sequence(store, table, np.array([[1, 2, 3]]), mask)
    b = lookup_sequence(store, table, np.array([[2, 1, 3]]), mask)
    assert np.array_equal(a[0, 0], b[0, 1])
    assert np.array_equal(a[0, 1], b[0, 0])
    assert np.array_equal(a[0, 2], b[0, 2])


def grads_for(vocab=10, d_id=3):
    hp = HyperParams(d_t=6, d_b=6, d_a=6, seq_len=4, vocab=vocab, d_frozen=3)
    return zero_gradients(init_params(hp, make_rng(0)))


def test_scatter_add_zero_upstream_noop():
    grads = grads_for()
    before = grads.id_embedding.copy()
    embedding_grad_accumulate(grads, 3, np.array([1]), np.zeros((1, 6)),
                              np.array([[2, 3]]), np.ones((1, 2)), np.zeros((1, 2, 6)))
    assert np.array_equal(grads.id_embedding, before)


def test_scatter_add_repeated_id_sums():
    grads = grads_for()
    up = np.zeros((1, 2, 6))
    up[0, 0] = np.arange(6)
    up[0, 1] = np.arange(6) * 10
    embedding_grad_accumulate(grads, 3, np.array([0]), np.zeros((1, 6)),
                              np.array([[4, 4]]), np.ones((1, 2)), up)
    # id part is the last 3 coordinates of each upstream row
    assert np.array_equal(grads.id_embedding[4], np.array([3.0, 4.0, 5.0]) * 11)


def test_scatter_add_drops_frozen_part():
    grads = grads_for()
    d_x_t = np.ones((1, 6))
    embedding_grad_accumulate(grads, 3, np.array([2]), d_x_t,
                              np.zeros((1, 2), dtype=np.int64), np.zeros((1, 2)),
                              np.zeros((1, 2, 6)))
    assert np.array_equal(grads.id_embedding[2], np.ones(3))
    # no slot for the frozen store exists at all in Gradients
    assert not hasattr(grads, "store")


def test_scatter_add_ignores_padded_positions():
    grads = grads_for()
    up = np.ones((1, 2, 6))
    embedding_grad_accumulate(grads, 3, np.array([0]), np.zeros((1, 6)),
                              np.array([[5, 6]]), np.array([[1.0, 0.0]]), up)
    assert np.array_equal(grads.id_embedding[5], np.ones(3))
    assert np.array_equal(grads.id_embedding[6], np.zeros(3))
