import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qvolterra.errors import DefectiveDrift, ExpmOverflow
from qvolterra.kernels import (
    ExpSumKernel,
    KernelSignature,
    all_signatures,
    closed_form_kerr,
    closed_form_optomech,
    eval_kernel,
    expm_action,
    kernel_series,
    kernel_table,
    structurally_zero,
    symbolic_kernel,
)
from qvolterra.model import BilinearSystem, build_bilinear, kerr_cavity, optomech

W, CHI, G = 1.0, 0.01, 0.2


def taylor_expm(M):
    """Plain power series; only used on matrices of modest norm."""
    out = np.eye(len(M), dtype=complex)
    term = out.copy()
    k = 0
    while True:
        k += 1
        term = term @ M / k
        out = out + term
        if np.max(np.abs(term)) < 1e-18 * max(1.0, np.max(np.abs(out))):
            return out


def chain_oracle(sys_, sig, taus):
    s = sig.conjugate() if sig.out_sign == "+" else sig
    v = sys_.x0.astype(complex)
    for (port, sign), tau in zip(reversed(s.inputs), reversed(taus)):
        v = taylor_expm(sys_.A * tau) @ (sys_.B(port, sign) @ v)
    val = sys_.readout[s.out_port] @ v
    return np.conj(val) if sig.out_sign == "+" else val


def random_system(rng, n, ports=1):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = A / np.linalg.norm(A, 2) - 1.2 * np.eye(n)
    mk = lambda: tuple(0.5 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) for _ in range(ports))
    return BilinearSystem(
        basis=tuple(range(n)),
        A=A,
        B_minus=mk(),
        B_plus=mk(),
        readout=rng.normal(size=(ports, n)) + 1j * rng.normal(size=(ports, n)),
        S=np.eye(ports, dtype=complex),
        x0=rng.normal(size=n) + 1j * rng.normal(size=n),
    )


# --- signatures -------------------------------------------------------------

def test_signature_parse_and_str_round_trip():
    sig = KernelSignature.parse("-:-,+,-")
    assert sig == KernelSignature.simple("-", "-", "+", "-")
    assert str(sig) == "0-:0-,0+,0-"
    assert KernelSignature.parse(str(sig)) == sig
    assert KernelSignature.parse("1+:0-,1+").ports() == {0, 1}


def test_signature_conjugate_flips_every_sign():
    sig = KernelSignature.simple("-", "-", "+", "-")
    assert sig.conjugate() == KernelSignature.simple("+", "+", "-", "+")
    assert sig.conjugate().conjugate() == sig


@pytest.mark.parametrize("text", ["", "-", "-:", "-:x", "*:-", "-:-,,+"])
def test_signature_parse_rejects_garbage(text):
    with pytest.raises(ValueError):
        KernelSignature.parse(text)


def test_all_signatures_count():
    assert len(all_signatures(1, 3)) == 2 * 8
    assert len(all_signatures(2, 2)) == 2 * 2 * 16


# --- matrix exponential ----------------------------------------------------

def test_expm_action_examples():
    v = np.array([1.0, 2.0])
    np.testing.assert_allclose(expm_action(np.zeros((2, 2)), 3.0, v), v)
    D = np.diag([-1.0, -2.0 + 1j])
    np.testing.assert_allclose(expm_action(D, 0.7, v), np.exp(np.diag(D) * 0.7) * v, rtol=1e-14)
    np.testing.assert_allclose(expm_action(D, 0.0, v), v)


def test_expm_action_guards():
    with pytest.raises(ValueError):
        expm_action(np.eye(2), -1.0, np.ones(2))
    with pytest.raises(ExpmOverflow):
        expm_action(np.eye(2), 2e4, np.ones(2))


@pytest.mark.parametrize("n", [1, 3, 5, 8])
def test_expm_action_matches_power_series(rng, n):
    for _ in range(5):
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        t = rng.uniform(0, 2.0)
        v = rng.normal(size=n) + 0j
        ref = taylor_expm(A * t) @ v
        np.testing.assert_allclose(expm_action(A, t, v), ref, atol=1e-10 * (1 + np.max(np.abs(ref))))


# --- pointwise kernels -----------------------------------------------------

def test_first_order_kernel_at_zero_lag(kerr_sys):
    assert eval_kernel(kerr_sys, KernelSignature.simple("-", "-"), [0.0]) == pytest.approx(-G, abs=1e-14)


def test_first_order_kernel_is_decaying_exponential(kerr_sys):
    sig = KernelSignature.simple("-", "-")
    for tau in np.linspace(0, 30, 13):
        ref = -G * np.exp(-(G / 2 + 1j * W) * tau)
        assert abs(eval_kernel(kerr_sys, sig, [tau]) - ref) <= 1e-10 * abs(ref)


def test_third_order_kerr_kernel_frozen_value(kerr_sys):
    # independent power-series chain for (-; -, +, -) at unit lags
    sig = KernelSignature.simple("-", "-", "+", "-")
    frozen = 0.0008799319259820271 - 0.00041304136321865573j
    assert abs(eval_kernel(kerr_sys, sig, [1.0, 1.0, 1.0]) - frozen) <= 1e-12


def test_conjugate_output_kernel(kerr_sys):
    sig = KernelSignature.simple("-", "-", "+", "-")
    taus = [0.3, 1.1, 2.0]
    assert eval_kernel(kerr_sys, sig.conjugate(), taus) == pytest.approx(np.conj(eval_kernel(kerr_sys, sig, taus)))


def test_eval_kernel_argument_checks(kerr_sys):
    with pytest.raises(ValueError):
        eval_kernel(kerr_sys, KernelSignature.simple("-", "-"), [1.0, 2.0])
    with pytest.raises(ValueError):
        eval_kernel(kerr_sys, KernelSignature(1, "-", ((0, "-"),)), [1.0])


@pytest.mark.parametrize("n,ports", [(2, 1), (4, 1), (6, 2), (8, 1)])
def test_eval_kernel_matches_power_series_chain(rng, n, ports):
    sys_ = random_system(rng, n, ports)
    for order in (1, 2, 3):
        for sig in rng.choice(all_signatures(ports, order), size=3):
            taus = list(rng.uniform(0, 1.5, size=order))
            ref = chain_oracle(sys_, sig, taus)
            assert abs(eval_kernel(sys_, sig, taus) - ref) <= 1e-10 * (1 + abs(ref))


def test_kernel_table_matches_pointwise(kerr_sys):
    sig = KernelSignature.simple("+", "-", "+", "+")
    taus = [0.0, 0.5, 2.0]
    pts, vals = kernel_table(kerr_sys, sig, taus)
    assert pts.shape == (27, 3)
    for p, v in zip(pts, vals):
        assert v == pytest.approx(eval_kernel(kerr_sys, sig, p), abs=1e-14)


# --- symbolic kernels -----------------------------------------------------

def test_symbolic_first_order_is_single_term(kerr_sys):
    k = symbolic_kernel(kerr_sys, KernelSignature.simple("-", "-"))
    assert len(k) == 1
    c, (lam,) = k.terms[0]
    assert c == pytest.approx(-G)
    assert lam == pytest.approx(G / 2 + 1j * W)


def nonzero_signatures(sys_, order):
    return [s for s in all_signatures(sys_.ports, order) if not structurally_zero(sys_, s)]


def test_kerr_nonzero_third_order_signatures(kerr_sys):
    minus = {str(s) for s in nonzero_signatures(kerr_sys, 3) if s.out_sign == "-"}
    assert minus == {"0-:0-,0-,0+", "0-:0-,0+,0-", "0-:0+,0-,0-"}


@pytest.mark.parametrize("which", ["kerr", "opto"])
def test_symbolic_matches_pointwise_on_grid(kerr_sys, opto_sys, which):
    sys_ = kerr_sys if which == "kerr" else opto_sys
    grid = np.linspace(0, 10 / G, 5)
    for order in (1, 2, 3):
        for sig in nonzero_signatures(sys_, order):
            k = symbolic_kernel(sys_, sig)
            pts, vals = kernel_table(sys_, sig, grid)
            sym = k(*pts.T)
            scale = 1 + np.max(np.abs(vals))
            assert np.max(np.abs(sym - vals)) <= 1e-9 * scale, str(sig)


def test_kernels_decay(kerr_sys):
    far = 50 / G
    for order in (1, 3):
        for sig in nonzero_signatures(kerr_sys, order):
            k = symbolic_kernel(kerr_sys, sig)
            assert np.all(k.rates.real > 0)
            assert abs(k(*[far] * order)) <= 1e-8


@pytest.mark.parametrize("spec", [
    kerr_cavity(W, 0.0, G),
    optomech(1.0, 0.01, 0.0, 0.2, 1e-4),
], ids=["chi0", "g0"])
def test_vanishing_nonlinearity_leaves_only_first_order(spec):
    sys_ = build_bilinear(spec)
    grid = [0.0, 1.0, 7.0]
    for order in (2, 3):
        for sig in all_signatures(sys_.ports, order):
            assert symbolic_kernel(sys_, sig).is_zero
            _, vals = kernel_table(sys_, sig, grid)
            assert np.max(np.abs(vals)) <= 1e-12


def test_kerr_has_no_second_order(kerr_sys):
    assert all(structurally_zero(kerr_sys, s) for s in all_signatures(1, 2))


def test_kernel_series_inventory(kerr_sys):
    ks = kernel_series(kerr_sys, 3)
    assert [k.order for k in ks] == [1, 3, 3, 3]


def test_defective_drift_is_reported():
    A = np.array([[0, 0, 0], [0, -1.0, 1.0], [0, 0, -1.0]], dtype=complex)
    B = np.zeros((3, 3), complex)
    B[2, 0] = 1.0
    sys_ = BilinearSystem(
        basis=((), ((0, 1),), ((1, 0),)),
        A=A, B_minus=(B,), B_plus=(B,),
        readout=np.array([[0, 1.0, 0]], complex),
        S=np.eye(1, dtype=complex), x0=np.array([1, 0, 0], complex),
    )
    with pytest.raises(DefectiveDrift):
        symbolic_kernel(sys_, KernelSignature.simple("-", "-"))
    # the pointwise path still works: tau e^{-tau}
    assert eval_kernel(sys_, KernelSignature.simple("-", "-"), [2.0]) == pytest.approx(2 * np.exp(-2.0))


def test_exp_sum_kernel_algebra():
    sig = KernelSignature.simple("-", "-", "+")
    k = ExpSumKernel(sig, [1.0, 2j], [[1.0, 2.0], [0.5, 0.5j]])
    assert (k + k)(0.3, 0.4) == pytest.approx(2 * k(0.3, 0.4))
    assert k.scaled(3)(0.1, 0.2) == pytest.approx(3 * k(0.1, 0.2))
    assert k.conjugate()(0.1, 0.2) == pytest.approx(np.conj(k(0.1, 0.2)))
    assert k.sorted()(0.7, 0.1) == pytest.approx(k(0.7, 0.1))
    with pytest.raises(ValueError):
        k(1.0)


# --- closed forms ---------------------------------------------------------

def test_closed_form_first_order_matches_builder(kerr_sys):
    sig = KernelSignature.simple("-", "-")
    ref = closed_form_kerr(1, sig, W, CHI, G)
    taus = np.linspace(0, 40, 100)
    np.testing.assert_allclose(symbolic_kernel(kerr_sys, sig)(taus), ref(taus), rtol=1e-10)


def test_closed_form_structure():
    # both published third-order forms vanish when their first lag or middle lag is zero
    k3 = closed_form_kerr(3, KernelSignature.simple("-", "-", "-", "+"), W, CHI, G)
    assert abs(k3(0.0, 1.3, 2.1)) <= 1e-15
    sig = KernelSignature(0, "-", ((0, "-"), (0, "+"), (0, "-")))
    ko = closed_form_optomech(sig, 1.0, 0.01, 1e-5, 0.2, 1e-4)
    assert abs(ko(0.7, 0.0, 1.9)) <= 1e-15


def test_closed_form_unknown_signature():
    with pytest.raises(ValueError):
        closed_form_kerr(3, KernelSignature.simple("-", "+", "-", "-"), W, CHI, G)
    with pytest.raises(ValueError):
        closed_form_optomech(KernelSignature.simple("-", "+"), 1, 0.01, 1e-5, 0.2, 1e-4)


def test_kerr_third_order_closed_form_ratio_report(kerr_sys):
    """The published third-order Kerr expression is compared, not asserted."""
    sig = KernelSignature.simple("-", "-", "-", "+")
    pub = closed_form_kerr(3, sig, W, CHI, G)
    built = symbolic_kernel(kerr_sys, sig)
    for taus in itertools.product([0.5, 2.0, 8.0], repeat=3):
        b = built(*taus)
        p = pub(*taus)
        print(f"taus={taus} builder={b:.4e} published={p:.4e} ratio={b / p if p else float('nan'):.4e}")
        assert np.isfinite(b)


@given(st.floats(0.05, 1.0), st.floats(0.1, 3.0), st.floats(0.0, 20.0))
def test_linear_cavity_kernel_property(gamma, omega, tau):
    sys_ = build_bilinear(kerr_cavity(omega, 0.0, gamma))
    ref = -gamma * np.exp(-(gamma / 2 + 1j * omega) * tau)
    assert abs(eval_kernel(sys_, KernelSignature.simple("-", "-"), [tau]) - ref) <= 1e-10 * abs(ref)
