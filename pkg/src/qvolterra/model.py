"""Truncated bilinear moment realizations of open boson components.

For a component with Hamiltonian ``H`` and couplings ``L_j`` the averaged
moments ``x_alpha = <X_alpha>`` of normal-ordered monomials obey, under a
coherent input ``beta(t)``,

    dx/dt = A x + sum_p (beta_p B_minus[p] + conj(beta_p) B_plus[p]) x

and the mean output is ``b_out = S beta + readout @ x``.  ``build_bilinear``
enumerates the monomial basis reachable from the readout, discarding
monomials above the truncation degree.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import (
    OperatorPoly,
    basis_sort_key,
    create,
    destroy,
    heisenberg_generator,
    input_couplings,
    key_degree,
    key_label,
)
from .errors import TruncationOverflow

DEFAULT_MAX_BASIS = 4096


def _check_unitary(S, tol=1e-10):
    S = np.atleast_2d(np.asarray(S, dtype=complex))
    if S.shape[0] != S.shape[1]:
        raise ValueError(f"scattering matrix must be square, got {S.shape}")
    err = np.max(np.abs(S @ S.conj().T - np.eye(S.shape[0]))) if S.size else 0.0
    if err > tol:
        raise ValueError(f"scattering matrix is not unitary (max deviation {err:.3g})")
    return S


@dataclass(frozen=True)
class ModelSpec:
    """Hamiltonian/coupling description of a weakly nonlinear component.

    ``H = H_linear + H_nonlinear`` and ``L_j = L_linear[j] + L_nonlinear[j]``.
    ``mu`` is a dimensionless label for the nonlinearity strength; it does not
    rescale ``H_nonlinear``.
    """

    modes: int
    H_linear: OperatorPoly
    H_nonlinear: OperatorPoly = field(default_factory=OperatorPoly)
    L_linear: tuple = ()
    L_nonlinear: tuple = ()
    mu: float = 0.0
    S: np.ndarray | None = None
    truncation_degree: int = 3

    def __post_init__(self):
        L_lin = tuple(self.L_linear)
        L_nl = tuple(self.L_nonlinear) or tuple(OperatorPoly() for _ in L_lin)
        if len(L_nl) != len(L_lin):
            raise ValueError("L_linear and L_nonlinear must have one entry per port")
        object.__setattr__(self, "L_linear", L_lin)
        object.__setattr__(self, "L_nonlinear", L_nl)
        S = np.eye(len(L_lin), dtype=complex) if self.S is None else self.S
        S = _check_unitary(S)
        if S.shape[0] != len(L_lin):
            raise ValueError(f"S is {S.shape}, expected {len(L_lin)} ports")
        object.__setattr__(self, "S", S)

        if self.H_linear.degree > 2:
            raise ValueError("H_linear must be at most quadratic")
        if not self.H_linear.is_hermitian() or not self.H_nonlinear.is_hermitian():
            raise ValueError("Hamiltonian is not Hermitian")
        if any(L.degree > 1 for L in L_lin):
            raise ValueError("L_linear entries must be at most linear")
        for poly in (self.H_linear, self.H_nonlinear, *L_lin, *L_nl):
            if poly.n_modes > self.modes:
                raise ValueError("operator acts on more modes than declared")
        # the drift of a linear monomial reaches degree deg(H) - 1
        needed = max([self.hamiltonian.degree - 1] + [L.degree for L in self.couplings])
        if self.truncation_degree < needed:
            raise ValueError(
                f"truncation_degree {self.truncation_degree} < {needed} required by H, L"
            )

    @property
    def ports(self) -> int:
        return len(self.L_linear)

    @property
    def hamiltonian(self) -> OperatorPoly:
        return self.H_linear + self.H_nonlinear

    @property
    def couplings(self) -> list[OperatorPoly]:
        return [a + b for a, b in zip(self.L_linear, self.L_nonlinear)]


@dataclass(frozen=True)
class BilinearSystem:
    """Moment-space realization ``(A, B_minus, B_plus, readout, S, x0)``."""

    basis: tuple
    A: np.ndarray
    B_minus: tuple
    B_plus: tuple
    readout: np.ndarray
    S: np.ndarray
    x0: np.ndarray
    mu: float = 0.0

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def ports(self) -> int:
        return self.S.shape[0]

    @property
    def labels(self) -> list[str]:
        return [key_label(k) for k in self.basis]

    def index(self, key) -> int:
        return self.basis.index(tuple(key))

    def B(self, port: int, sign: str) -> np.ndarray:
        return self.B_minus[port] if sign == "-" else self.B_plus[port]


@dataclass(frozen=True)
class LinearModel:
    """Passive linear component ``(S, C, Omega)``; ``C`` is ``m x r``."""

    S: np.ndarray
    C: np.ndarray
    Omega: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=complex))
        m = S.shape[0]
        C = np.asarray(self.C, dtype=complex).reshape(m, -1)
        r = C.shape[1]
        Omega = np.asarray(self.Omega, dtype=complex).reshape(r, r)
        if r and np.max(np.abs(Omega - Omega.conj().T)) > 1e-12:
            raise ValueError("Omega must be Hermitian")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "Omega", Omega)

    @property
    def ports(self) -> int:
        return self.S.shape[0]

    @property
    def modes(self) -> int:
        return self.C.shape[1]

    @property
    def A(self) -> np.ndarray:
        return -0.5 * self.C.conj().T @ self.C - 1j * self.Omega


# ---------------------------------------------------------------------------
# builders


def _coherent_moments(basis, alphas) -> np.ndarray:
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    x0 = np.empty(len(basis), dtype=complex)
    for i, key in enumerate(basis):
        val = 1.0 + 0j
        for mode, (p, q) in enumerate(key):
            al = alphas[mode] if mode < len(alphas) else 0.0
            val *= np.conj(al) ** p * al**q
        x0[i] = val
    return x0


def build_bilinear(
    spec: ModelSpec, initial_state="vacuum", max_basis: int = DEFAULT_MAX_BASIS
) -> BilinearSystem:
    """Close the moment equations of ``spec`` up to ``spec.truncation_degree``.

    ``initial_state`` is ``"vacuum"`` or a sequence of per-mode coherent
    amplitudes.
    """
    D = spec.truncation_degree
    H = spec.hamiltonian
    Ls = spec.couplings
    ident = ()

    seeds = {k for L in Ls for k in L.terms if k != ident}
    found = {ident}
    rows = {}
    queue = deque(sorted(seeds))
    found |= seeds
    while queue:
        key = queue.popleft()
        X = OperatorPoly.monomial(key)
        drift = heisenberg_generator(X, H, Ls).truncate(D)
        coup = [(m.truncate(D), p.truncate(D)) for m, p in input_couplings(X, Ls)]
        rows[key] = (drift, coup)
        for poly in [drift] + [c for pair in coup for c in pair]:
            for k in poly.terms:
                if k not in found:
                    found.add(k)
                    queue.append(k)
        if len(found) > max_basis:
            raise TruncationOverflow(
                f"moment basis exceeded {max_basis} elements at degree {D}"
            )

    basis = tuple(sorted(found, key=basis_sort_key))
    assert basis[0] == ident
    index = {k: i for i, k in enumerate(basis)}
    n, m = len(basis), spec.ports

    A = np.zeros((n, n), dtype=complex)
    Bm = np.zeros((m, n, n), dtype=complex)
    Bp = np.zeros((m, n, n), dtype=complex)
    for key, (drift, coup) in rows.items():
        r = index[key]
        for k, c in drift:
            A[r, index[k]] += c
        for j, (cm, cp) in enumerate(coup):
            for k, c in cm:
                Bm[j, r, index[k]] += c
            for k, c in cp:
                Bp[j, r, index[k]] += c

    S = spec.S
    # port p drives channel j through S[j, p]
    B_minus = tuple(np.tensordot(S[:, p], Bm, axes=(0, 0)) for p in range(m))
    B_plus = tuple(np.tensordot(S[:, p].conj(), Bp, axes=(0, 0)) for p in range(m))

    readout = np.zeros((m, n), dtype=complex)
    for j, L in enumerate(Ls):
        for k, c in L:
            readout[j, index[k]] += c

    if isinstance(initial_state, str):
        if initial_state != "vacuum":
            raise ValueError(f"unknown initial state {initial_state!r}")
        x0 = np.zeros(n, dtype=complex)
        x0[0] = 1.0
    else:
        x0 = _coherent_moments(basis, initial_state)

    return BilinearSystem(basis, A, B_minus, B_plus, readout, S.copy(), x0, spec.mu)


def linear_component(model: LinearModel) -> BilinearSystem:
    """Bilinear realization of a linear component on basis ``(1, a_1..a_r)``."""
    r, m = model.modes, model.ports
    basis = ((),) + tuple(((0, 0),) * k + ((0, 1),) for k in range(r))
    n = r + 1
    A = np.zeros((n, n), dtype=complex)
    A[1:, 1:] = model.A
    coupling = model.C.conj().T @ model.S  # r x m
    B_minus = []
    for p in range(m):
        B = np.zeros((n, n), dtype=complex)
        B[1:, 0] = -coupling[:, p]
        B_minus.append(B)
    B_plus = tuple(np.zeros((n, n), dtype=complex) for _ in range(m))
    readout = np.zeros((m, n), dtype=complex)
    readout[:, 1:] = model.C
    x0 = np.zeros(n, dtype=complex)
    x0[0] = 1.0
    return BilinearSystem(basis, A, tuple(B_minus), B_plus, readout, model.S.copy(), x0)


# ---------------------------------------------------------------------------
# component factories


def _nonneg(**rates):
    for name, value in rates.items():
        if value < 0:
            raise ValueError(f"{name} must be non-negative, got {value}")


def kerr_cavity(omega_a: float, chi: float, gamma: float, truncation_degree: int = 3) -> ModelSpec:
    """Single-mode Kerr cavity ``H = w a+a + chi a+^2 a^2``, ``L = sqrt(gamma) a``."""
    _nonneg(gamma=gamma)
    a, ad = destroy(0), create(0)
    return ModelSpec(
        modes=1,
        H_linear=omega_a * (ad * a),
        H_nonlinear=chi * (ad * ad * a * a),
        L_linear=(np.sqrt(gamma) * a,),
        mu=chi / omega_a if omega_a else np.inf,
        S=np.eye(1),
        truncation_degree=truncation_degree,
    )


def optomech(omega_a, omega_b, g, gamma_a, gamma_b, truncation_degree: int = 3) -> ModelSpec:
    """Cavity mode ``a`` parametrically coupled to mechanical mode ``b``.

    Port 0 couples to the cavity, port 1 to the mechanical bath.
    """
    _nonneg(gamma_a=gamma_a, gamma_b=gamma_b)
    a, ad, b, bd = destroy(0), create(0), destroy(1), create(1)
    return ModelSpec(
        modes=2,
        H_linear=omega_a * (ad * a) + omega_b * (bd * b),
        H_nonlinear=g * (ad * a * (b + bd)),
        L_linear=(np.sqrt(gamma_a) * a, np.sqrt(gamma_b) * b),
        mu=g / omega_b if omega_b else np.inf,
        S=np.eye(2),
        truncation_degree=truncation_degree,
    )


def cavity(omega: float, gamma: float) -> LinearModel:
    """One-port empty cavity ``(S, C, Omega) = (1, sqrt(gamma), omega)``."""
    _nonneg(gamma=gamma)
    return LinearModel(S=np.eye(1), C=[[np.sqrt(gamma)]], Omega=[[omega]])


def amplifier(G: float) -> LinearModel:
    """Mean-field phase-insensitive amplifier with power gain ``G``.

    Only the mean amplitude gain ``sqrt(G)`` is modelled; added noise is not.
    """
    if G < 1:
        raise ValueError(f"amplifier power gain must be >= 1, got {G}")
    return LinearModel(S=np.sqrt(G) * np.eye(1), C=np.zeros((1, 0)), Omega=np.zeros((0, 0)))


def beam_splitter(S) -> LinearModel:
    """Static scattering component; ``S`` must be unitary."""
    S = _check_unitary(S)
    return LinearModel(S=S, C=np.zeros((S.shape[0], 0)), Omega=np.zeros((0, 0)))


def rotation_splitter(theta: float) -> LinearModel:
    """Two-port beam splitter with real mixing angle ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return beam_splitter([[c, -s], [s, c]])


def as_bilinear(component) -> BilinearSystem:
    """Coerce a ModelSpec, LinearModel or BilinearSystem to a BilinearSystem."""
    if isinstance(component, BilinearSystem):
        return component
    if isinstance(component, LinearModel):
        return linear_component(component)
    if isinstance(component, ModelSpec):
        return build_bilinear(component)
    raise TypeError(f"cannot realize {type(component).__name__} as a bilinear system")


__all__: Sequence[str] = [
    "ModelSpec",
    "BilinearSystem",
    "LinearModel",
    "build_bilinear",
    "linear_component",
    "kerr_cavity",
    "optomech",
    "cavity",
    "amplifier",
    "beam_splitter",
    "rotation_splitter",
    "as_bilinear",
]
