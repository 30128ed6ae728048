"""Frequency-domain susceptibilities and linear transfer functions.

Conventions.  A kernel is Fourier transformed with ``exp(-i w t)`` over
``[0, inf)^n`` and re-indexed by partial suffix sums, so a term
``c * prod_k exp(-lam_k tau_k)`` becomes

    chi(w_1..w_n) = c * prod_k 1 / (lam_k + i W_k),   W_k = w_k + ... + w_n.

``chi`` is the response amplitude to input tones ``exp(+i w t)``.  With this
choice the order-1 susceptibility of a linear component equals its transfer
function ``Xi(s)`` at ``s = i w``; a resonant drive ``exp(-i w_a t)`` sits at
``w = -w_a``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import NonDecayingKernel, SingularResolvent
from .kernels import ExpSumKernel, KernelSignature, all_signatures, symbolic_kernel
from .model import BilinearSystem, LinearModel


def suffix_sums(omegas):
    """``W_k = sum_{j >= k} w_j`` along the first axis."""
    return np.cumsum(np.asarray(omegas)[::-1], axis=0)[::-1]


@dataclass(frozen=True)
class RationalSusceptibility:
    """``constant + sum_t coeffs[t] prod_k 1/(rates[t, k] + i W_k)``."""

    signature: KernelSignature
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    rates: np.ndarray | None = None
    constant: complex = 0j

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        n = self.signature.order
        rates = np.zeros((0, n), complex) if self.rates is None else self.rates
        rates = np.asarray(rates, dtype=complex).reshape(len(coeffs), n)
        if self.constant and n != 1:
            raise ValueError("a constant term is only allowed at order 1")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "constant", complex(self.constant))

    @property
    def order(self) -> int:
        return self.signature.order

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0 and self.constant == 0

    def __call__(self, *omegas):
        if len(omegas) != self.order:
            raise ValueError(f"susceptibility of order {self.order} got {len(omegas)} frequencies")
        omegas = np.broadcast_arrays(*[np.asarray(w, dtype=float) for w in omegas])
        W = suffix_sums(np.stack(omegas))
        out = np.full(omegas[0].shape, self.constant, dtype=complex)
        for c, lam in zip(self.coeffs, self.rates):
            denom = np.ones(omegas[0].shape, dtype=complex)
            for k in range(self.order):
                denom = denom * (lam[k] + 1j * W[k])
            out += c / denom
        return out if out.ndim else complex(out)


def fourier_kernel(kernel: ExpSumKernel, constant: complex = 0j) -> RationalSusceptibility:
    """Closed-form multidimensional Fourier transform of a decaying kernel."""
    if len(kernel) and np.min(kernel.rates.real) <= 0:
        raise NonDecayingKernel(
            f"kernel {kernel.signature} has a rate with Re <= 0: {np.min(kernel.rates.real):.3g}"
        )
    return RationalSusceptibility(kernel.signature, kernel.coeffs, kernel.rates, constant)


def linear_transfer(model: LinearModel, s: complex) -> np.ndarray:
    """``Xi(s) = S - C (s I - A)^-1 C+ S`` for a linear component."""
    r = model.modes
    if r == 0:
        return model.S.copy()
    A = model.A
    M = s * np.eye(r) - A
    if np.min(np.abs(np.linalg.eigvals(A) - s)) < 1e-13 * max(1.0, abs(s)):
        raise SingularResolvent(f"s = {s} is an eigenvalue of the drift matrix")
    X = np.linalg.solve(M, model.C.conj().T @ model.S)
    return model.S - model.C @ X


@dataclass(frozen=True)
class SusceptibilitySet:
    """All susceptibilities of a component or network, keyed by order and signature.

    Entries are callables ``entry(*omegas)`` carrying a ``signature``.
    Missing signatures are identically zero.  The constant feedthrough is
    folded into the order-1 entries and also kept in ``feedthrough``.
    """

    ports: int
    orders: Mapping = field(default_factory=dict)
    feedthrough: np.ndarray | None = None

    def __post_init__(self):
        ft = np.eye(self.ports, dtype=complex) if self.feedthrough is None else self.feedthrough
        object.__setattr__(self, "feedthrough", np.asarray(ft, dtype=complex).reshape(self.ports, self.ports))
        object.__setattr__(self, "orders", {n: dict(v) for n, v in sorted(self.orders.items()) if v})

    @property
    def max_order(self) -> int:
        return max(self.orders, default=0)

    def signatures(self, order: int | None = None) -> list[KernelSignature]:
        if order is None:
            return [s for n in self.orders for s in sorted(self.orders[n])]
        return sorted(self.orders.get(order, {}))

    def get(self, sig: KernelSignature):
        return self.orders.get(sig.order, {}).get(sig)

    def __contains__(self, sig):
        return self.get(sig) is not None

    def __call__(self, sig: KernelSignature, *omegas):
        entry = self.get(sig)
        if entry is None:
            shape = np.broadcast(*[np.asarray(w) for w in omegas]).shape
            return np.zeros(shape, complex) if shape else 0j
        return entry(*omegas)

    @property
    def is_linear(self) -> bool:
        return self.max_order <= 1


def _constant_entry(sig: KernelSignature, value: complex) -> RationalSusceptibility:
    return RationalSusceptibility(sig, constant=value)


def feedthrough_constant(S: np.ndarray, sig: KernelSignature) -> complex:
    """Order-1 constant of ``S`` on signature ``sig`` (zero across signs)."""
    (port, sign), = sig.inputs
    if sign != sig.out_sign:
        return 0j
    value = S[sig.out_port, port]
    return complex(value if sign == "-" else np.conj(value))


def susceptibility_set(sys: BilinearSystem, max_order: int = 3) -> SusceptibilitySet:
    """Susceptibilities of every nonzero signature up to ``max_order``."""
    S = sys.S
    if np.max(np.abs(S @ S.conj().T - np.eye(sys.ports)), initial=0.0) > 1e-10:
        warnings.warn("feedthrough matrix is not unitary (active component)", stacklevel=2)
    orders: dict = {}
    for n in range(1, max_order + 1):
        entries = {}
        for sig in all_signatures(sys.ports, n):
            kernel = symbolic_kernel(sys, sig)
            const = feedthrough_constant(S, sig) if n == 1 else 0j
            chi = fourier_kernel(kernel, const)
            if not chi.is_zero:
                entries[sig] = chi
        orders[n] = entries
    return SusceptibilitySet(sys.ports, orders, S)


def identity_set(ports: int) -> SusceptibilitySet:
    """Pure wire: unit feedthrough, no dynamics."""
    entries = {}
    for p in range(ports):
        for s in "-+":
            sig = KernelSignature(p, s, ((p, s),))
            entries[sig] = _constant_entry(sig, 1.0)
    return SusceptibilitySet(ports, {1: entries}, np.eye(ports))
