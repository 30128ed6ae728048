"""Normal-ordered polynomial algebra of multimode boson ladder operators.

A monomial is keyed by a tuple of per-mode ``(p, q)`` pairs meaning
``prod_j adag_j**p_j a_j**q_j``; trailing ``(0, 0)`` modes are stripped so
the identity is the empty tuple.  Products are rewritten into normal order
with the closed form

    a**q adag**p = sum_k C(q, k) C(p, k) k! adag**(p-k) a**(q-k)

applied independently on every mode (different modes commute).
"""

from __future__ import annotations

from itertools import product as _cartesian
from math import comb, factorial
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

PRUNE_TOL = 1e-14

Key = tuple  # tuple[tuple[int, int], ...]


def _canonical(key: Iterable[tuple[int, int]]) -> Key:
    key = [tuple(int(v) for v in pq) for pq in key]
    while key and key[-1] == (0, 0):
        key.pop()
    return tuple(key)


def key_degree(key: Key) -> int:
    return sum(p + q for p, q in key)


def key_dagger(key: Key) -> Key:
    return tuple((q, p) for p, q in key)


def basis_sort_key(key: Key):
    """Ordering used for moment bases: degree, then net charge, then key.

    For one mode this yields ``1, a, a+, a+a, a^2, a+^2, a+a^2, a+^2a``.
    """
    charge = sum(abs(p - q) for p, q in key)
    return (key_degree(key), charge, key)


def key_label(key: Key) -> str:
    if not key:
        return "1"
    names = "abcdefgh"
    parts = []
    for mode, (p, q) in enumerate(key):
        name = names[mode] if mode < len(names) else f"a{mode}"
        if p:
            parts.append(f"{name}+" + (f"^{p}" if p > 1 else ""))
        if q:
            parts.append(name + (f"^{q}" if q > 1 else ""))
    return "*".join(parts) if parts else "1"


def _mode_product(pq1: tuple[int, int], pq2: tuple[int, int]):
    p1, q1 = pq1
    p2, q2 = pq2
    out = []
    for k in range(min(q1, p2) + 1):
        c = comb(q1, k) * comb(p2, k) * factorial(k)
        out.append(((p1 + p2 - k, q1 + q2 - k), c))
    return out


def _monomial_product(k1: Key, k2: Key) -> dict:
    n = max(len(k1), len(k2))
    k1 = tuple(k1) + ((0, 0),) * (n - len(k1))
    k2 = tuple(k2) + ((0, 0),) * (n - len(k2))
    per_mode = [_mode_product(a, b) for a, b in zip(k1, k2)]
    result: dict = {}
    for combo in _cartesian(*per_mode):
        key = _canonical(pq for pq, _ in combo)
        c = 1
        for _, ck in combo:
            c *= ck
        result[key] = result.get(key, 0) + c
    return result


class OperatorPoly:
    """Finite linear combination of normal-ordered boson monomials.

    Instances are immutable.  ``*`` between two polynomials is the
    normal-ordered operator product; ``*`` with a number scales.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping | None = None):
        clean: dict = {}
        for key, coeff in (terms or {}).items():
            key = _canonical(key)
            clean[key] = clean.get(key, 0j) + complex(coeff)
        clean = {k: v for k, v in clean.items() if abs(v) >= PRUNE_TOL}
        self._terms = MappingProxyType(dict(sorted(clean.items())))

    # construction helpers -------------------------------------------------
    @classmethod
    def monomial(cls, key, coeff=1.0) -> "OperatorPoly":
        return cls({_canonical(key): coeff})

    @classmethod
    def identity(cls, coeff=1.0) -> "OperatorPoly":
        return cls({(): coeff})

    @classmethod
    def zero(cls) -> "OperatorPoly":
        return cls()

    # basic accessors ------------------------------------------------------
    @property
    def terms(self) -> Mapping:
        return self._terms

    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    @property
    def degree(self) -> int:
        return max((key_degree(k) for k in self._terms), default=0)

    @property
    def n_modes(self) -> int:
        return max((len(k) for k in self._terms), default=0)

    def coeff(self, key) -> complex:
        return self._terms.get(_canonical(key), 0j)

    # algebra --------------------------------------------------------------
    def __add__(self, other):
        other = _coerce(other)
        merged = dict(self._terms)
        for k, v in other._terms.items():
            merged[k] = merged.get(k, 0j) + v
        return OperatorPoly(merged)

    __radd__ = __add__

    def __neg__(self):
        return OperatorPoly({k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, OperatorPoly):
            return normal_order_product(self, other)
        if isinstance(other, (int, float, complex, np.number)):
            return OperatorPoly({k: v * other for k, v in self._terms.items()})
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def dagger(self) -> "OperatorPoly":
        return OperatorPoly(
            {key_dagger(k): np.conj(v) for k, v in self._terms.items()}
        )

    def truncate(self, max_degree: int) -> "OperatorPoly":
        return OperatorPoly(
            {k: v for k, v in self._terms.items() if key_degree(k) <= max_degree}
        )

    def is_close(self, other, tol=1e-12) -> bool:
        diff = self - _coerce(other)
        return all(abs(v) <= tol for _, v in diff)

    def is_hermitian(self, tol=1e-12) -> bool:
        return self.is_close(self.dagger(), tol)

    def __eq__(self, other):
        if not isinstance(other, OperatorPoly):
            return NotImplemented
        return dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def __repr__(self):
        if not self._terms:
            return "OperatorPoly(0)"
        body = " + ".join(f"({v:.6g})*{key_label(k)}" for k, v in self._terms.items())
        return f"OperatorPoly({body})"


def _coerce(x) -> OperatorPoly:
    if isinstance(x, OperatorPoly):
        return x
    return OperatorPoly.identity(x)


def destroy(mode: int = 0) -> OperatorPoly:
    """Annihilation operator of ``mode``."""
    return OperatorPoly.monomial(((0, 0),) * mode + ((0, 1),))


def create(mode: int = 0) -> OperatorPoly:
    """Creation operator of ``mode``."""
    return OperatorPoly.monomial(((0, 0),) * mode + ((1, 0),))


def identity() -> OperatorPoly:
    return OperatorPoly.identity()


def normal_order_product(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    """Operator product ``a b`` rewritten in normal order."""
    out: dict = {}
    for k1, c1 in a:
        for k2, c2 in b:
            for key, c in _monomial_product(k1, k2).items():
                out[key] = out.get(key, 0j) + c1 * c2 * c
    return OperatorPoly(out)


def commutator(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    return normal_order_product(a, b) - normal_order_product(b, a)


def heisenberg_generator(X: OperatorPoly, H: OperatorPoly, Ls) -> OperatorPoly:
    """Deterministic drift of ``X`` under Hamiltonian ``H`` and couplings ``Ls``.

    Returns ``-i[X, H] + 1/2 sum_j (L_j+ [X, L_j] + [L_j+, X] L_j)``.
    """
    drift = -1j * commutator(X, H)
    for L in Ls:
        Ld = L.dagger()
        drift = drift + 0.5 * (Ld * commutator(X, L) + commutator(Ld, X) * L)
    return drift


def input_couplings(X: OperatorPoly, Ls) -> list[tuple[OperatorPoly, OperatorPoly]]:
    """Per-channel input-coupling polynomials ``([L+, X], [X, L])``.

    The first multiplies ``b_in`` and the second ``b_in^+`` in the
    Heisenberg-Langevin equation of ``X``.
    """
    return [(commutator(L.dagger(), X), commutator(X, L)) for L in Ls]


# ---------------------------------------------------------------------------
# Fock-space matrix representation


def ladder_matrices(levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated ``(a, a+)`` on ``levels`` Fock states ``|0>..|levels-1>``."""
    a = np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1).astype(complex)
    return a, a.conj().T


def to_matrix(poly: OperatorPoly, dims) -> np.ndarray:
    """Dense matrix of ``poly`` on a truncated tensor-product Fock space.

    ``dims`` gives the number of levels per mode (an int for one mode).
    """
    if isinstance(dims, (int, np.integer)):
        dims = (int(dims),)
    dims = tuple(dims)
    if poly.n_modes > len(dims):
        raise ValueError(f"polynomial acts on {poly.n_modes} modes, got dims {dims}")
    ladders = [ladder_matrices(d) for d in dims]
    total = int(np.prod(dims))
    out = np.zeros((total, total), dtype=complex)
    for key, c in poly:
        key = tuple(key) + ((0, 0),) * (len(dims) - len(key))
        mat = np.ones((1, 1), dtype=complex)
        for (p, q), (a, ad) in zip(key, ladders):
            m = np.linalg.matrix_power(ad, p) @ np.linalg.matrix_power(a, q)
            mat = np.kron(mat, m)
        out += c * mat
    return out
