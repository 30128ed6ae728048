import numpy as np
import pytest
from hypothesis import given, strategies as st

from qvolterra.algebra import (
    OperatorPoly,
    basis_sort_key,
    commutator,
    create,
    destroy,
    heisenberg_generator,
    identity,
    input_couplings,
    key_label,
    ladder_matrices,
    normal_order_product,
    to_matrix,
)

a, ad = destroy(0), create(0)


def mono(p, q, c=1.0):
    return OperatorPoly.monomial(((p, q),), c)


def lindblad_adjoint(X, H, Ls):
    """Heisenberg-picture generator on dense matrices."""
    out = 1j * (H @ X - X @ H)
    for L in Ls:
        Ld = L.conj().T
        out += Ld @ X @ L - 0.5 * (Ld @ L @ X + X @ Ld @ L)
    return out


def test_annihilate_then_create_rewrites_to_number_plus_one():
    assert (a * ad).is_close(ad * a + 1)
    assert (a * ad).coeff(((1, 1),)) == 1
    assert (a * ad).coeff(()) == 1


def test_lowering_times_number():
    assert (a * (ad * a)).is_close(mono(1, 2) + a)


def test_number_squared_matches_fock_matrices():
    n = ad * a
    prod = n * n
    assert prod.is_close(mono(2, 2) + mono(1, 1))
    N = 10
    Mn = to_matrix(n, N)
    lhs = to_matrix(prod, N)
    np.testing.assert_allclose(lhs, Mn @ Mn, atol=1e-12)


def test_canonical_commutator():
    assert commutator(a, ad).is_close(identity())


def test_lowering_commutes_into_kerr_term():
    kerr = mono(2, 2)
    c = commutator(a, kerr)
    assert c.is_close(mono(1, 2, 2.0))
    # brute force on the Fock space, away from the truncation edge
    N = 10
    A, Ad = ladder_matrices(N)
    K = Ad @ Ad @ A @ A
    dense = A @ K - K @ A
    np.testing.assert_allclose(to_matrix(c, N)[:7, :7], dense[:7, :7], atol=1e-12)


def test_number_lowers():
    assert commutator(ad * a, a).is_close(-1.0 * a)


def test_kerr_drift_of_lowering_operator():
    w, chi, g = 1.0, 0.01, 0.2
    H = w * (ad * a) + chi * mono(2, 2)
    drift = heisenberg_generator(a, H, [np.sqrt(g) * a])
    expected = -(g / 2 + 1j * w) * a + (-2j * chi) * mono(1, 2)
    assert drift.is_close(expected)


def test_linear_drift_matches_dense_adjoint():
    w, g = 1.0, 0.2
    H = w * (ad * a)
    drift = heisenberg_generator(a, H, [np.sqrt(g) * a])
    assert drift.is_close(-(g / 2 + 1j * w) * a)
    N = 10
    dense = lindblad_adjoint(to_matrix(a, N), to_matrix(H, N), [np.sqrt(g) * to_matrix(a, N)])
    np.testing.assert_allclose(to_matrix(drift, N), dense, atol=1e-12)


@pytest.mark.parametrize("key", [(0, 1), (1, 1), (0, 2), (1, 2), (2, 1), (2, 2)])
def test_untruncated_drift_matches_dense_adjoint(key):
    w, chi, g = 1.0, 0.01, 0.2
    H = w * (ad * a) + chi * mono(2, 2)
    Ls = [np.sqrt(g) * a]
    X = OperatorPoly.monomial((key,))
    N = 14
    drift = heisenberg_generator(X, H, Ls)
    dense = lindblad_adjoint(to_matrix(X, N), to_matrix(H, N), [to_matrix(L, N) for L in Ls])
    np.testing.assert_allclose(to_matrix(drift, N)[:8, :8], dense[:8, :8], atol=1e-11)


def test_identity_is_stationary():
    H = ad * a + 0.3 * mono(2, 2)
    assert not heisenberg_generator(identity(), H, [a])


def test_input_couplings_of_lowering_operator():
    (minus, plus), = input_couplings(a, [np.sqrt(0.2) * a])
    assert minus.is_close(-np.sqrt(0.2) * identity())
    assert not plus


def test_tiny_coefficients_are_pruned():
    p = OperatorPoly({((1, 0),): 1e-15, ((0, 1),): 1.0})
    assert list(p.terms) == [((0, 1),)]


def test_basis_order_for_one_mode():
    keys = [((0, 1),), ((1, 0),), (), ((1, 1),), ((0, 2),), ((2, 0),), ((1, 2),), ((2, 1),)]
    labels = [key_label(k) for k in sorted(keys, key=basis_sort_key)]
    assert labels == ["1", "a", "a+", "a+*a", "a^2", "a+^2", "a+*a^2", "a+^2*a"]


def test_two_mode_labels_and_independence():
    b = destroy(1)
    assert key_label(((0, 1), (1, 0))) == "a*b+"
    assert commutator(a, create(1)).is_close(OperatorPoly())
    assert (a * b).n_modes == 2


def test_dagger_and_hermiticity():
    H = ad * a + 0.5 * mono(2, 2) + (0.3 + 0.1j) * mono(0, 2) + (0.3 - 0.1j) * mono(2, 0)
    assert H.is_hermitian()
    assert not (1j * H).is_hermitian()
    assert (a * ad).dagger().is_close(a * ad)


# --- properties -----------------------------------------------------------

coeffs = st.complex_numbers(min_magnitude=0.0, max_magnitude=3.0, allow_nan=False, allow_infinity=False)


def one_mode_poly(max_degree):
    pairs = [(p, q) for p in range(max_degree + 1) for q in range(max_degree + 1) if p + q <= max_degree]
    return st.dictionaries(st.sampled_from(pairs), coeffs, max_size=5).map(
        lambda d: OperatorPoly({(k,): v for k, v in d.items()})
    )


def two_mode_poly(max_degree):
    keys = [
        ((p1, q1), (p2, q2))
        for p1 in range(3) for q1 in range(3) for p2 in range(3) for q2 in range(3)
        if p1 + q1 + p2 + q2 <= max_degree
    ]
    return st.dictionaries(st.sampled_from(keys), coeffs, max_size=4).map(OperatorPoly)


@given(two_mode_poly(4))
def test_identity_is_neutral(p):
    assert normal_order_product(p, identity()) == p
    assert normal_order_product(identity(), p) == p


@given(one_mode_poly(4), one_mode_poly(4))
def test_product_is_matrix_homomorphism(p, q):
    N = 13  # levels 0..12
    lhs = to_matrix(normal_order_product(p, q), N)[:9, :9]
    rhs = (to_matrix(p, N) @ to_matrix(q, N))[:9, :9]
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.max(np.abs(rhs))))


@given(two_mode_poly(3), two_mode_poly(3))
def test_commutator_antisymmetry(p, q):
    assert commutator(p, q) == -commutator(q, p)


@given(one_mode_poly(3), one_mode_poly(3), one_mode_poly(3))
def test_jacobi_identity(p, q, r):
    parts = [commutator(p, commutator(q, r)), commutator(q, commutator(r, p)), commutator(r, commutator(p, q))]
    scale = max([1.0] + [abs(c) for part in parts for _, c in part])
    total = parts[0] + parts[1] + parts[2]
    assert all(abs(c) <= 1e-12 * scale for _, c in total)
