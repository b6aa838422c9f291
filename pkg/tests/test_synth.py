import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uosc import synth
from uosc.exceptions import GenerationError, ParameterError
from uosc.synth import RngSpec, decompose_point, generate_bases, generate_dataset, make_dataset


def _orth_checks(b):
    if b.s:
        assert np.abs(b.S.T @ b.S - np.eye(b.s)).max() <= 1e-10
    for Ud, U in zip(b.Udot, b.U):
        assert np.abs(Ud.T @ Ud - np.eye(b.r - b.s)).max() <= 1e-10
        if b.s:
            assert np.abs(b.S.T @ Ud).max() <= 1e-10
        assert np.abs(U.T @ U - np.eye(b.r)).max() <= 1e-10
        assert np.array_equal(U, np.hstack([b.S, Ud]))


def test_small_bases_orthogonal():
    b = generate_bases(4, 2, 2, 1, RngSpec(0))
    _orth_checks(b)
    for Ud in b.Udot:
        assert np.abs(b.S.T @ Ud).max() <= 1e-10


def test_fig1_geometry():
    b = generate_bases(400, 10, 10, 8, RngSpec(3))
    _orth_checks(b)
    assert b.S.shape == (400, 8)
    assert all(Ud.shape == (400, 2) for Ud in b.Udot)


def test_combined_rank_oracle():
    b = generate_bases(40, 5, 10, 9, RngSpec(4))
    sv = np.linalg.svd(np.hstack([b.S, *b.Udot]), compute_uv=False)
    assert np.count_nonzero(sv > 1e-8 * sv[0]) == 14


def test_columns_in_own_span():
    b = generate_bases(5, 2, 2, 0, RngSpec(1))
    ds = generate_dataset(b, 1, RngSpec(1))
    assert ds.M2 == 2
    for i in range(2):
        U = b.U[ds.labels[i]]
        d = ds.D[:, i]
        assert np.linalg.norm(d - U @ (U.T @ d)) <= 1e-12


def test_fig1_rank():
    ds = make_dataset(400, 10, 10, 8, 200, RngSpec(5))
    assert ds.M2 == 2000
    sv = np.linalg.svd(ds.D, compute_uv=False)
    assert np.count_nonzero(sv > 1e-8 * sv[0]) == 28


def test_expected_squared_norm():
    ds = make_dataset(30, 4, 6, 2, 2500, RngSpec(6))
    assert abs(np.mean(np.sum(ds.D ** 2, axis=0)) - 1.0) < 0.05


def test_decompose_point_pure_parts():
    b = generate_bases(10, 2, 3, 1, RngSpec(2))
    ds = generate_dataset(b, 4, RngSpec(2))
    ds.D[:, 0] = b.S[:, 0] * 0.7
    alpha, beta = decompose_point(ds, 0)
    assert np.allclose(beta, 0, atol=1e-12)
    ds.D[:, 1] = b.Udot[0] @ np.array([0.3, -0.4])
    alpha, beta = decompose_point(ds, 1)
    assert np.allclose(alpha, 0, atol=1e-12)


def test_decompose_point_energy(small_ds):
    for i in (0, 17, 59):
        a, b = decompose_point(small_ds, i)
        d = small_ds.D[:, i]
        assert abs(a @ a + b @ b - d @ d) <= 1e-10
        U = small_ds.bases
        rec = U.S @ a + U.Udot[small_ds.labels[i]] @ b
        assert np.linalg.norm(rec - d) <= 1e-10


def test_decompose_point_index_error(small_ds):
    with pytest.raises(IndexError):
        decompose_point(small_ds, small_ds.M2)


def test_recorded_coefficients_reconstruct(small_ds):
    b = small_ds.bases
    for i in range(small_ds.M2):
        rec = b.S @ small_ds.alpha[i] + b.Udot[small_ds.labels[i]] @ small_ds.beta[i]
        assert np.linalg.norm(rec - small_ds.D[:, i]) <= 1e-10


def test_normalized_with_scale():
    ds = make_dataset(20, 3, 4, 2, 10, RngSpec(7), normalize=True)
    assert np.allclose(np.linalg.norm(ds.D, axis=0), 1.0)
    raw = ds.without_normalization()
    b = ds.bases
    for i in range(ds.M2):
        rec = b.S @ ds.alpha[i] + b.Udot[ds.labels[i]] @ ds.beta[i]
        assert np.linalg.norm(rec - raw.D[:, i]) <= 1e-10


def test_labels_contiguous_and_balanced(small_ds):
    assert np.array_equal(small_ds.labels, np.repeat(np.arange(3), 20))


@pytest.mark.parametrize("args", [(4, 1, 2, 0), (4, 2, 2, 2), (4, 2, 3, -1), (3, 2, 4, 1), (4.5, 2, 2, 0)])
def test_bad_dimensions(args):
    with pytest.raises(ParameterError):
        generate_bases(*args, RngSpec(0))


def test_bad_n():
    b = generate_bases(6, 2, 2, 0, RngSpec(0))
    with pytest.raises(ParameterError):
        generate_dataset(b, 0, RngSpec(0))


def test_warns_when_innovations_cannot_be_independent():
    with pytest.warns(UserWarning):
        generate_bases(10, 4, 4, 1, RngSpec(0))


def test_rank_deficient_orthonormalization():
    with pytest.raises(GenerationError):
        synth._orthonormalize(np.ones((5, 2)), "test")


def test_determinism():
    a = make_dataset(25, 3, 5, 2, 10, RngSpec(99, 4))
    b = make_dataset(25, 3, 5, 2, 10, RngSpec(99, 4))
    c = make_dataset(25, 3, 5, 2, 10, RngSpec(99, 5))
    assert np.array_equal(a.D, b.D)
    assert not np.array_equal(a.D, c.D)


def test_independent_subspaces_when_s_zero():
    b = generate_bases(30, 4, 5, 0, RngSpec(8))
    sv = np.linalg.svd(np.hstack(b.U), compute_uv=False)
    assert np.count_nonzero(sv > 1e-8 * sv[0]) == 20


def test_save_load_roundtrip(tmp_path):
    ds = make_dataset(12, 3, 4, 1, 5, RngSpec(10), normalize=True)
    synth.save_dataset(ds, tmp_path)
    assert {p.name for p in tmp_path.iterdir()} >= {"D.mat", "labels.csv", "bases.mat", "meta.txt"}
    back = synth.load_dataset(tmp_path)
    assert np.array_equal(back.D, ds.D)
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.bases.S, ds.bases.S)
    assert all(np.array_equal(x, y) for x, y in zip(back.bases.Udot, ds.bases.Udot))
    assert np.array_equal(back.scale, ds.scale)
    assert back.normalized and back.seed == 10
    assert (back.M1, back.m, back.r, back.s, back.n) == (12, 3, 4, 1, 5)


def test_matrix_file_header(tmp_path):
    ds = make_dataset(6, 2, 2, 1, 3, RngSpec(1))
    synth.save_dataset(ds, tmp_path)
    raw = (tmp_path / "D.mat").read_bytes()
    assert raw[:4] == b"UOSM"
    assert np.frombuffer(raw[4:12], "<u4").tolist() == [6, 6]
    assert np.array_equal(np.frombuffer(raw[12:], "<f8").reshape(6, 6), ds.D)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(1, 5), st.data(), st.integers(0, 2**32))
def test_model_invariants(m, r, data, seed):
    s = data.draw(st.integers(0, r - 1))
    n = data.draw(st.integers(r, r + 4))
    M1 = s + (r - s) * m + data.draw(st.integers(0, 4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ds = make_dataset(M1, m, r, s, n, RngSpec(seed))
    _orth_checks(ds.bases)
    sv = np.linalg.svd(ds.D, compute_uv=False)
    assert np.count_nonzero(sv > 1e-9 * sv[0]) == min(ds.M2, s + (r - s) * m)
    assert np.all(np.bincount(ds.labels) == n)
    b = ds.bases
    rec = np.column_stack([b.S @ ds.alpha[i] + b.Udot[ds.labels[i]] @ ds.beta[i]
                           for i in range(ds.M2)])
    assert np.abs(rec - ds.D).max() <= 1e-10
