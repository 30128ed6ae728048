"""Time-domain Volterra kernels of bilinear moment systems.

The order-n kernel of output ``(j, s)`` for input lines
``(j_1, i_1) ... (j_n, i_n)`` is the chain

    readout[j] e^{A tau_1} B_{i_1} e^{A tau_2} B_{i_2} ... e^{A tau_n} B_{i_n} x0

where ``tau_1`` is the lag adjacent to the readout.  Kernels of the
conjugate output ``b+`` are obtained from ``<b+> = conj(<b>)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import DefectiveDrift, ExpmOverflow
from .model import BilinearSystem

EXPM_NORM_BOUND = 1e4
EIG_CONDITION_BOUND = 1e8
PRUNE_RELATIVE = 1e-13

_SIGNS = ("-", "+")


def _flip(sign: str) -> str:
    return "+" if sign == "-" else "-"


@dataclass(frozen=True, order=True)
class KernelSignature:
    """Output line ``(out_port, out_sign)`` and ordered input lines.

    ``inputs[0]`` is the most recent input (lag ``tau_1``).  Signs are
    ``"-"`` for ``b`` and ``"+"`` for ``b+``.
    """

    out_port: int
    out_sign: str
    inputs: tuple = ()

    def __post_init__(self):
        inputs = tuple((int(p), str(s)) for p, s in self.inputs)
        if self.out_sign not in _SIGNS or any(s not in _SIGNS for _, s in inputs):
            raise ValueError(f"signs must be '-' or '+': {self.out_sign}, {inputs}")
        if not inputs:
            raise ValueError("kernel order must be at least 1")
        object.__setattr__(self, "inputs", inputs)

    @property
    def order(self) -> int:
        return len(self.inputs)

    def conjugate(self) -> "KernelSignature":
        return KernelSignature(
            self.out_port, _flip(self.out_sign), tuple((p, _flip(s)) for p, s in self.inputs)
        )

    def shifted(self, offset: int) -> "KernelSignature":
        return KernelSignature(
            self.out_port + offset, self.out_sign, tuple((p + offset, s) for p, s in self.inputs)
        )

    def ports(self) -> set:
        return {self.out_port} | {p for p, _ in self.inputs}

    def __str__(self):
        ins = ",".join(f"{p}{s}" for p, s in self.inputs)
        return f"{self.out_port}{self.out_sign}:{ins}"

    @classmethod
    def parse(cls, text: str) -> "KernelSignature":
        """Parse ``"0-:0-,0+,0-"``; port numbers may be omitted (``"-:-,+,-"``)."""

        def item(tok):
            tok = tok.strip()
            if not tok or tok[-1] not in _SIGNS:
                raise ValueError(f"bad signature item {tok!r} in {text!r}")
            return (int(tok[:-1]) if tok[:-1] else 0, tok[-1])

        try:
            out, ins = text.split(":")
        except ValueError:
            raise ValueError(f"signature {text!r} must look like 'out:in1,in2,...'") from None
        port, sign = item(out)
        return cls(port, sign, tuple(item(t) for t in ins.split(",")))

    @classmethod
    def simple(cls, out_sign: str, *in_signs: str) -> "KernelSignature":
        return cls(0, out_sign, tuple((0, s) for s in in_signs))


def all_signatures(ports: int, order: int, out_signs=_SIGNS) -> list[KernelSignature]:
    lines = [(p, s) for p in range(ports) for s in _SIGNS]
    return [
        KernelSignature(p, s, ins)
        for p in range(ports)
        for s in out_signs
        for ins in product(lines, repeat=order)
    ]


@dataclass(frozen=True)
class ExpSumKernel:
    """``k(tau) = sum_t coeffs[t] * prod_k exp(-rates[t, k] * tau_k)``."""

    signature: KernelSignature
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    rates: np.ndarray | None = None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        n = self.signature.order
        rates = np.zeros((0, n), complex) if self.rates is None else self.rates
        rates = np.asarray(rates, dtype=complex).reshape(len(coeffs), n)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rates", rates)

    @property
    def order(self) -> int:
        return self.signature.order

    @property
    def terms(self) -> list[tuple[complex, tuple]]:
        return [(c, tuple(r)) for c, r in zip(self.coeffs, self.rates)]

    def __len__(self):
        return len(self.coeffs)

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def __call__(self, *taus):
        if len(taus) != self.order:
            raise ValueError(f"kernel of order {self.order} got {len(taus)} lags")
        taus = np.broadcast_arrays(*[np.asarray(t, dtype=float) for t in taus])
        out = np.zeros(taus[0].shape, dtype=complex)
        for c, lam in zip(self.coeffs, self.rates):
            expo = sum(-lk * tk for lk, tk in zip(lam, taus))
            out += c * np.exp(expo)
        return out if out.ndim else complex(out)

    def conjugate(self) -> "ExpSumKernel":
        return ExpSumKernel(self.signature.conjugate(), self.coeffs.conj(), self.rates.conj())

    def sorted(self) -> "ExpSumKernel":
        order = np.lexsort(
            [self.coeffs.imag, self.coeffs.real]
            + [part for k in reversed(range(self.order)) for part in (self.rates[:, k].imag, self.rates[:, k].real)]
        )
        return ExpSumKernel(self.signature, self.coeffs[order], self.rates[order])

    def __add__(self, other: "ExpSumKernel") -> "ExpSumKernel":
        if other.signature != self.signature:
            raise ValueError("cannot add kernels with different signatures")
        return ExpSumKernel(
            self.signature,
            np.concatenate([self.coeffs, other.coeffs]),
            np.vstack([self.rates, other.rates]),
        )

    def scaled(self, factor) -> "ExpSumKernel":
        return ExpSumKernel(self.signature, self.coeffs * factor, self.rates)


# ---------------------------------------------------------------------------
# pointwise evaluation


def expm_action(A: np.ndarray, t: float, v: np.ndarray, bound: float = EXPM_NORM_BOUND):
    """Return ``exp(A t) v`` by dense scaling-and-squaring."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    At = np.asarray(A, dtype=complex) * t
    norm = np.linalg.norm(At, 1) if At.size else 0.0
    if not np.isfinite(norm) or norm > bound:
        raise ExpmOverflow(f"||A t||_1 = {norm:.3g} exceeds bound {bound:.3g}")
    return scipy.linalg.expm(At) @ np.asarray(v, dtype=complex)


def _check_signature(sys: BilinearSystem, sig: KernelSignature):
    if not sig.ports() <= set(range(sys.ports)):
        raise ValueError(f"signature {sig} references ports outside 0..{sys.ports - 1}")


def eval_kernel(sys: BilinearSystem, sig: KernelSignature, taus: Sequence[float]) -> complex:
    """Evaluate one kernel value by chaining matrix exponentials."""
    if len(taus) != sig.order:
        raise ValueError(f"signature of order {sig.order} got {len(taus)} lags")
    _check_signature(sys, sig)
    if sig.out_sign == "+":
        return complex(np.conj(eval_kernel(sys, sig.conjugate(), taus)))
    v = sys.x0
    for (port, sign), tau in zip(reversed(sig.inputs), reversed(list(taus))):
        v = expm_action(sys.A, tau, sys.B(port, sign) @ v)
    return complex(sys.readout[sig.out_port] @ v)


def kernel_table(sys: BilinearSystem, sig: KernelSignature, taus: Iterable[float]):
    """Kernel on the Cartesian grid ``taus**order``.

    Returns ``(points, values)`` with ``points`` of shape ``(N**order, order)``
    in row-major order (last lag fastest).
    """
    _check_signature(sys, sig)
    taus = np.asarray(list(taus), dtype=float)
    conj = sig.out_sign == "+"
    s = sig.conjugate() if conj else sig
    props = [expm_action(sys.A, t, np.eye(sys.size)) for t in taus]

    # vectors[k] holds e^{A tau_k} B_k ... e^{A tau_n} B_n x0 for every suffix grid
    vecs = [sys.x0[:, None]]
    for port, sign in reversed(s.inputs):
        B = sys.B(port, sign)
        prev = B @ vecs[-1]
        nxt = np.concatenate([P @ prev for P in props], axis=1)
        vecs.append(nxt)
    values = sys.readout[s.out_port] @ vecs[-1]
    if conj:
        values = values.conj()
    points = np.array(list(product(taus, repeat=sig.order)), dtype=float).reshape(-1, sig.order)
    return points, values


# ---------------------------------------------------------------------------
# symbolic (exponential-sum) kernels


def _reachable_rows(pattern: np.ndarray, support: np.ndarray) -> np.ndarray:
    support = support.copy()
    while True:
        grown = support | (pattern @ support.astype(int) > 0)
        if (grown == support).all():
            return support
        support = grown


def structurally_zero(sys: BilinearSystem, sig: KernelSignature) -> bool:
    """True when no path through the sparsity pattern links input to readout."""
    s = sig.conjugate() if sig.out_sign == "+" else sig
    A_pat = np.abs(sys.A) > 0
    support = np.abs(sys.x0) > 0
    for port, sign in reversed(s.inputs):
        B_pat = np.abs(sys.B(port, sign)) > 0
        support = B_pat.astype(int) @ support.astype(int) > 0
        support = _reachable_rows(A_pat, support)
    return not np.any(support & (np.abs(sys.readout[s.out_port]) > 0))


@lru_cache(maxsize=64)
def _eig_cached(key):
    A = _EIG_REGISTRY[key]
    w, V = np.linalg.eig(A)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > EIG_CONDITION_BOUND:
        raise DefectiveDrift(f"eigenvector condition number {cond:.3g} exceeds {EIG_CONDITION_BOUND:.0e}")
    return w, V, np.linalg.inv(V)


_EIG_REGISTRY: dict = {}


def _eig(A: np.ndarray):
    key = (A.shape, A.tobytes())
    _EIG_REGISTRY[key] = A
    return _eig_cached(key)


def symbolic_kernel(sys: BilinearSystem, sig: KernelSignature) -> ExpSumKernel:
    """Expand a kernel into separable exponential terms via ``A = V W V^-1``.

    Raises :class:`DefectiveDrift` when the eigenvector matrix is too
    ill-conditioned; callers then fall back to :func:`eval_kernel`.
    """
    _check_signature(sys, sig)
    if sig.out_sign == "+":
        return symbolic_kernel(sys, sig.conjugate()).conjugate()
    if structurally_zero(sys, sig):
        return ExpSumKernel(sig)

    w, V, Vinv = _eig(sys.A)
    n = sig.order
    inputs = list(sig.inputs)
    port, sign = inputs[-1]
    tensor = Vinv @ (sys.B(port, sign) @ sys.x0)  # indexed by k_n
    for port, sign in reversed(inputs[:-1]):
        M = Vinv @ sys.B(port, sign) @ V
        tensor = np.multiply.outer(np.ones(len(w)), tensor) * M.reshape(M.shape + (1,) * (tensor.ndim - 1))
    tensor = (sys.readout[sig.out_port] @ V).reshape((-1,) + (1,) * (n - 1)) * tensor

    flat = tensor.reshape(-1)
    scale = np.max(np.abs(flat)) if flat.size else 0.0
    keep = np.abs(flat) > PRUNE_RELATIVE * scale if scale > 0 else np.zeros(flat.shape, bool)
    idx = np.array(np.unravel_index(np.nonzero(keep)[0], tensor.shape)).T.reshape(-1, n)
    rates = -w[idx]
    return ExpSumKernel(sig, flat[keep], rates)


def kernel_series(sys: BilinearSystem, max_order: int = 3, out_port: int = 0, out_sign: str = "-"):
    """All nonzero symbolic kernels of one output line up to ``max_order``."""
    out = []
    for order in range(1, max_order + 1):
        for sig in all_signatures(sys.ports, order, out_signs=(out_sign,)):
            if sig.out_port != out_port:
                continue
            k = symbolic_kernel(sys, sig)
            if not k.is_zero:
                out.append(k)
    return out


# ---------------------------------------------------------------------------
# closed forms transcribed from the worked examples


def closed_form_kerr(order: int, signature: KernelSignature, omega_a, chi, gamma) -> ExpSumKernel:
    """Published first- and third-order kernels of the vacuum Kerr cavity.

    Order 3 covers ``(s; s, -, +)`` and ``(s; s, +, -)`` for both output
    signs ``s``; the two published expressions are used for both signs.
    """
    g, w = gamma, omega_a
    sig = signature
    if sig.order != order:
        raise ValueError("order does not match signature")
    if order == 1:
        base = ExpSumKernel(KernelSignature.simple("-", "-"), [-g], [[g / 2 + 1j * w]])
        if sig == base.signature:
            return base
        if sig == base.signature.conjugate():
            return base.conjugate()
    elif order == 3:
        P = 4j * g**2 * chi**2 / (-g + 1j * chi)
        s = sig.out_sign
        if sig == KernelSignature.simple(s, s, "-", "+"):
            return ExpSumKernel(
                sig,
                [P, -P],
                [[g / 2 + 1j * w, g, g / 2 - 1j * w], [3 * g / 2 + 1j * w, g, g / 2 - 1j * w]],
            )
        if sig == KernelSignature.simple(s, s, "+", "-"):
            return ExpSumKernel(
                sig,
                [-P, P],
                [[g / 2 + 1j * w, g, g / 2 + 1j * w], [3 * g / 2 + 1j * w, g, g / 2 + 1j * w]],
            )
    raise ValueError(f"no published closed form for signature {sig}")


def closed_form_optomech(
    signature: KernelSignature, omega_a, omega_b, g, gamma_a, gamma_b
) -> ExpSumKernel:
    """Published cavity-port kernels of the optomechanical transducer.

    Order 3 covers ``(0-; 0-, 0+, 0-)`` and ``(0-; 0-, 0-, 0+)``.
    """
    ga_p = gamma_a / 2 + 1j * omega_a
    ga_m = gamma_a / 2 - 1j * omega_a
    gb_m = gamma_b / 2 - 1j * omega_b
    sig = signature
    if sig == KernelSignature(0, "-", ((0, "-"),)):
        return ExpSumKernel(sig, [-gamma_a], [[ga_p]])
    for upper, tau3_rate in (("+", ga_p), ("-", ga_m)):
        lower = _flip(upper)
        if sig == KernelSignature(0, "-", ((0, "-"), (0, upper), (0, lower))):
            P = gamma_a**2 * g**2 / ((-ga_m + ga_p) * (-gb_m + gamma_a))
            coeffs, rates = [], []
            for r1 in (ga_m, ga_p):
                for c2, r2 in ((1.0, gamma_a), (-1.0, gb_m)):
                    coeffs.append(P * c2)
                    rates.append([r1, r2, tau3_rate])
            return ExpSumKernel(sig, coeffs, rates)
    raise ValueError(f"no published closed form for signature {sig}")
