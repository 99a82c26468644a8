import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fracplasma import build_domain, eigendecompose, l2_norm, laplacian_matrix


def test_interval_nodes_and_masks():
    dom = build_domain("interval", 9, bounds=(0.0, 2.0))
    assert dom.dim == 1
    assert dom.h == pytest.approx(0.25)
    assert dom.n_interior == 7
    assert dom.interior.sum() == 7
    assert dom.boundary.sum() == 2
    np.testing.assert_allclose(dom.axes[0], np.linspace(0.0, 2.0, 9))


def test_rectangle_grid_shape_and_spacing():
    dom = build_domain("rectangle", (9, 17),
                       bounds=((0.0, 1.0), (0.0, 2.0)))
    assert dom.dim == 2
    assert dom.grid_shape == (9, 17)
    assert dom.h == pytest.approx(0.125)
    assert dom.n_interior == 7 * 15


def test_rectangle_rejects_mismatched_spacing():
    with pytest.raises(ValueError):
        build_domain("rectangle", (9, 9), bounds=((0.0, 1.0), (0.0, 2.0)))


def test_disk_interior_is_strictly_inside():
    dom = build_domain("disk", 33, bounds=((-1.1, 1.1), (-1.1, 1.1)),
                       radius=1.0, center=(0.0, 0.0))
    xs, ys = np.meshgrid(*dom.axes, indexing="ij")
    r2 = xs**2 + ys**2
    assert np.all(r2[dom.interior] < 1.0)
    assert not np.any(dom.interior & (r2 >= 1.0))


def test_interval_eigenpairs_match_closed_form():
    dom = build_domain("interval", 41, bounds=(0.0, np.pi))
    basis = eigendecompose(dom, 12)
    lam_ref, V_ref = oracles.interval_eigenpairs(0.0, np.pi, 41, 12)
    np.testing.assert_allclose(basis.eigenvalues, lam_ref, rtol=1e-12)
    np.testing.assert_allclose(basis.vectors, V_ref, atol=1e-10)


def test_eigenvectors_discretely_orthonormal():
    dom = build_domain("rectangle", 13, bounds=((0.0, 1.0), (0.0, 1.0)))
    basis = eigendecompose(dom, 30)
    G = dom.h**2 * basis.vectors.T @ basis.vectors
    np.testing.assert_allclose(G, np.eye(30), atol=1e-11)


def test_eigenpairs_satisfy_stencil_equation():
    dom = build_domain("rectangle", 13, bounds=((0.0, 1.0), (0.0, 1.0)))
    basis = eigendecompose(dom, 20)
    A = laplacian_matrix(dom)
    resid = A @ basis.vectors - basis.vectors * basis.eigenvalues
    assert np.abs(resid).max() < 1e-9


def test_rectangle_eigenvalues_are_tensor_sums():
    dom = build_domain("rectangle", (11, 21),
                       bounds=((0.0, 1.0), (0.0, 2.0)))
    basis = eigendecompose(dom, 25)
    ref = oracles.rectangle_eigenvalues(((0.0, 1.0), (0.0, 2.0)), 11, 21, 25)
    np.testing.assert_allclose(basis.eigenvalues, ref, rtol=1e-12)


def test_disk_eigenvalues_match_dense_oracle():
    dom = build_domain("disk", 21, bounds=((-1.2, 1.2), (-1.2, 1.2)),
                       radius=1.0, center=(0.0, 0.0))
    basis = eigendecompose(dom, 8)
    A = laplacian_matrix(dom)
    lam_ref = np.sort(np.linalg.eigvalsh(A))[:8]
    np.testing.assert_allclose(basis.eigenvalues, lam_ref, rtol=1e-11)


def test_sparse_and_dense_laplacian_agree():
    dom = build_domain("rectangle", 9, bounds=((0.0, 1.0), (0.0, 1.0)))
    A = laplacian_matrix(dom)
    S = laplacian_matrix(dom, sparse=True)
    np.testing.assert_allclose(S.toarray(), A, atol=0.0)


def test_stencil_application_matches_oracle():
    rng = np.random.default_rng(3)
    dom = build_domain("rectangle", 15, bounds=((0.0, 1.0), (0.0, 1.0)))
    A = laplacian_matrix(dom)
    v = rng.standard_normal(dom.n_interior)
    U = np.zeros(dom.grid_shape)
    U[dom.interior] = v
    ref = oracles.neg_laplacian_full(U, dom.h)[dom.interior]
    np.testing.assert_allclose(A @ v, ref, rtol=1e-12, atol=1e-12)


def test_l2_norm_of_unit_eigenvector_is_one():
    dom = build_domain("interval", 33, bounds=(0.0, np.pi))
    basis = eigendecompose(dom, 5)
    for k in range(5):
        assert l2_norm(dom, basis.vectors[:, k]) == pytest.approx(1.0, abs=1e-12)


def test_first_eigenvector_positive():
    for dom in (
        build_domain("interval", 33, bounds=(0.0, np.pi)),
        build_domain("rectangle", 11, bounds=((0.0, 1.0), (0.0, 1.0))),
    ):
        basis = eigendecompose(dom, 1)
        assert basis.vectors[:, 0].min() > 0


@given(st.integers(min_value=5, max_value=60))
def test_interval_eigenvalue_count_and_order(m):
    dom = build_domain("interval", m + 2, bounds=(0.0, 1.0))
    basis = eigendecompose(dom, m)
    assert basis.size == m
    assert np.all(np.diff(basis.eigenvalues) > 0)
    assert basis.eigenvalues[0] > 0


def test_pack_unpack_roundtrip():
    dom = build_domain("rectangle", 9, bounds=((0.0, 1.0), (0.0, 1.0)))
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dom.n_interior)
    U = np.zeros(dom.grid_shape)
    U[dom.interior] = v
    np.testing.assert_array_equal(U[dom.interior], v)
    assert np.all(U[dom.boundary] == 0.0)
