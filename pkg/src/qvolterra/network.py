"""Series and concatenation products of susceptibility sets.

Composed susceptibilities are evaluation trees: each entry keeps references
to the component entries it is built from and evaluates them on demand.

Series rule.  Feeding ``upstream`` into ``downstream``, the order-n entry is

    chi(w_1..w_n) = sum_{r, alpha} sum_{lines}
        chi_down(W_1..W_r) * prod_q chi_up_q(w's of group q)

over compositions ``alpha_1 + ... + alpha_r = n`` of the input list into
contiguous groups; ``W_q`` is the sum of group ``q``'s frequencies and the
inner sum runs over the junction lines ``(port, sign)`` joining upstream
output ``q`` to downstream input ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping, Union

import numpy as np

from .errors import NotLinear, PortMismatch, UnknownComponent
from .kernels import KernelSignature
from .spectra import SusceptibilitySet, susceptibility_set
from .model import as_bilinear

_SIGNS = ("-", "+")


def compositions(n: int):
    """Ordered tuples of positive integers summing to ``n``."""
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in compositions(n - first):
            yield (first,) + rest


@dataclass(frozen=True)
class Relabeled:
    """An entry viewed under a port-shifted signature."""

    signature: KernelSignature
    inner: object

    def __call__(self, *omegas):
        return self.inner(*omegas)


@dataclass(frozen=True)
class SeriesTerm:
    downstream: object
    upstream: tuple
    groups: tuple  # (start, stop) slices of the input list

    def __call__(self, omegas):
        W = [sum(omegas[a:b]) for a, b in self.groups]
        val = self.downstream(*W)
        for entry, (a, b) in zip(self.upstream, self.groups):
            val = val * entry(*omegas[a:b])
        return val


@dataclass(frozen=True)
class ComposedSusceptibility:
    signature: KernelSignature
    terms: tuple

    def __call__(self, *omegas):
        if len(omegas) != self.signature.order:
            raise ValueError(f"order {self.signature.order} entry got {len(omegas)} frequencies")
        omegas = np.broadcast_arrays(*[np.asarray(w, dtype=float) for w in omegas])
        out = np.zeros(omegas[0].shape, dtype=complex)
        for term in self.terms:
            out = out + term(omegas)
        return out if out.ndim else complex(out)


def concatenate(c1: SusceptibilitySet, c2: SusceptibilitySet) -> SusceptibilitySet:
    """Side-by-side assembly; c2's ports follow c1's."""
    m1 = c1.ports
    orders: dict = {}
    for n in sorted(set(c1.orders) | set(c2.orders)):
        entries = dict(c1.orders.get(n, {}))
        for sig, entry in c2.orders.get(n, {}).items():
            new = sig.shifted(m1)
            entries[new] = Relabeled(new, entry)
        orders[n] = entries
    ft = np.zeros((m1 + c2.ports,) * 2, dtype=complex)
    ft[:m1, :m1] = c1.feedthrough
    ft[m1:, m1:] = c2.feedthrough
    return SusceptibilitySet(m1 + c2.ports, orders, ft)


def _by_output(cset: SusceptibilitySet, order: int):
    """Map ``(out_port, out_sign) -> [(inputs, entry), ...]`` at one order."""
    table: dict = {}
    for sig, entry in cset.orders.get(order, {}).items():
        table.setdefault((sig.out_port, sig.out_sign), []).append((sig.inputs, entry))
    return table


def series(downstream: SusceptibilitySet, upstream: SusceptibilitySet, max_order: int = 3) -> SusceptibilitySet:
    """``downstream <| upstream``: upstream outputs drive downstream inputs."""
    if downstream.ports != upstream.ports:
        raise PortMismatch(
            f"downstream has {downstream.ports} ports, upstream has {upstream.ports}"
        )
    up_tables = {k: _by_output(upstream, k) for k in range(1, max_order + 1)}
    collected: dict = {}
    for r in range(1, max_order + 1):
        for dsig, dentry in downstream.orders.get(r, {}).items():
            # each downstream input line is an upstream output line
            choices = [
                [(k, ins, e) for k in range(1, max_order + 1) for ins, e in up_tables[k].get(line, [])]
                for line in dsig.inputs
            ]
            for combo in product(*choices):
                n = sum(k for k, _, _ in combo)
                if n > max_order:
                    continue
                groups, start, inputs = [], 0, []
                for k, ins, _ in combo:
                    groups.append((start, start + k))
                    start += k
                    inputs.extend(ins)
                sig = KernelSignature(dsig.out_port, dsig.out_sign, tuple(inputs))
                term = SeriesTerm(dentry, tuple(e for _, _, e in combo), tuple(groups))
                collected.setdefault(sig, []).append(term)
    orders: dict = {}
    for sig in sorted(collected):
        orders.setdefault(sig.order, {})[sig] = ComposedSusceptibility(sig, tuple(collected[sig]))
    return SusceptibilitySet(
        downstream.ports, orders, downstream.feedthrough @ upstream.feedthrough
    )


# ---------------------------------------------------------------------------
# linear shortcuts (independent of ``series``)


def _require_linear(cset: SusceptibilitySet, what: str):
    if not cset.is_linear:
        raise NotLinear(f"{what} has entries up to order {cset.max_order}")


def _line_index(port: int, sign: str) -> int:
    return 2 * port + _SIGNS.index(sign)


def _transfer_matrix(lin: SusceptibilitySet, omega) -> np.ndarray:
    """``G[..., out_line, in_line]`` at frequency array ``omega``."""
    omega = np.asarray(omega, dtype=float)
    L = 2 * lin.ports
    G = np.zeros(omega.shape + (L, L), dtype=complex)
    for sig, entry in lin.orders.get(1, {}).items():
        (port, sign), = sig.inputs
        G[..., _line_index(sig.out_port, sig.out_sign), _line_index(port, sign)] = entry(omega)
    return G


@dataclass(frozen=True)
class _LinearFirst:
    signature: KernelSignature
    nl: SusceptibilitySet
    lin: SusceptibilitySet

    def __call__(self, *omegas):
        omegas = np.broadcast_arrays(*[np.asarray(w, dtype=float) for w in omegas])
        m = self.nl.ports
        lines = [(p, s) for p in range(m) for s in _SIGNS]
        Gs = [_transfer_matrix(self.lin, w) for w in omegas]
        out = np.zeros(omegas[0].shape, dtype=complex)
        for mids in product(lines, repeat=self.signature.order):
            sig = KernelSignature(self.signature.out_port, self.signature.out_sign, mids)
            entry = self.nl.get(sig)
            if entry is None:
                continue
            factor = entry(*omegas)
            for G, mid, src in zip(Gs, mids, self.signature.inputs):
                factor = factor * G[..., _line_index(*mid), _line_index(*src)]
            out = out + factor
        return out if out.ndim else complex(out)


@dataclass(frozen=True)
class _LinearSecond:
    signature: KernelSignature
    lin: SusceptibilitySet
    nl: SusceptibilitySet

    def __call__(self, *omegas):
        omegas = np.broadcast_arrays(*[np.asarray(w, dtype=float) for w in omegas])
        G = _transfer_matrix(self.lin, sum(omegas))
        row = _line_index(self.signature.out_port, self.signature.out_sign)
        out = np.zeros(omegas[0].shape, dtype=complex)
        for p in range(self.nl.ports):
            for s in _SIGNS:
                sig = KernelSignature(p, s, self.signature.inputs)
                entry = self.nl.get(sig)
                if entry is not None:
                    out = out + G[..., row, _line_index(p, s)] * entry(*omegas)
        return out if out.ndim else complex(out)


def _all_line_signatures(ports, order):
    lines = [(p, s) for p in range(ports) for s in _SIGNS]
    for p in range(ports):
        for s in _SIGNS:
            for ins in product(lines, repeat=order):
                yield KernelSignature(p, s, ins)


def series_linear_first(nl: SusceptibilitySet, lin: SusceptibilitySet) -> SusceptibilitySet:
    """``nl <| lin`` with a linear upstream: ``chi(w) prod_q G(i w_q)``."""
    _require_linear(lin, "upstream linear stage")
    if nl.ports != lin.ports:
        raise PortMismatch(f"{nl.ports} vs {lin.ports} ports")
    orders = {}
    for n in nl.orders:
        entries = {}
        for sig in _all_line_signatures(nl.ports, n):
            entry = _LinearFirst(sig, nl, lin)
            if _probe_nonzero(entry, nl, lin, sig, first=True):
                entries[sig] = entry
        orders[n] = entries
    return SusceptibilitySet(nl.ports, orders, nl.feedthrough @ lin.feedthrough)


def series_linear_second(lin: SusceptibilitySet, nl: SusceptibilitySet) -> SusceptibilitySet:
    """``lin <| nl`` with a linear downstream: ``G(i sum w) chi(w)``."""
    _require_linear(lin, "downstream linear stage")
    if nl.ports != lin.ports:
        raise PortMismatch(f"{lin.ports} vs {nl.ports} ports")
    orders = {}
    for n in nl.orders:
        entries = {}
        for sig in _all_line_signatures(nl.ports, n):
            entry = _LinearSecond(sig, lin, nl)
            if _probe_nonzero(entry, nl, lin, sig, first=False):
                entries[sig] = entry
        orders[n] = entries
    return SusceptibilitySet(nl.ports, orders, lin.feedthrough @ nl.feedthrough)


def _probe_nonzero(entry, nl, lin, sig, first):
    """Structural test: does any path connect ``sig`` through both stages?"""
    lin_pairs = {(s.out_port, s.out_sign, s.inputs[0]) for s in lin.orders.get(1, {})}
    if first:
        return any(
            all((mid[0], mid[1], src) in lin_pairs for mid, src in zip(s.inputs, sig.inputs))
            for s in nl.orders.get(sig.order, {})
            if (s.out_port, s.out_sign) == (sig.out_port, sig.out_sign)
        )
    return any(
        (sig.out_port, sig.out_sign, (s.out_port, s.out_sign)) in lin_pairs
        for s in nl.orders.get(sig.order, {})
        if s.inputs == sig.inputs
    )


# ---------------------------------------------------------------------------
# network expressions


@dataclass(frozen=True)
class Leaf:
    name: str


@dataclass(frozen=True)
class Series:
    downstream: "NetworkExpr"
    upstream: "NetworkExpr"


@dataclass(frozen=True)
class Concat:
    left: "NetworkExpr"
    right: "NetworkExpr"


NetworkExpr = Union[Leaf, Series, Concat]


def chain(*names: str) -> NetworkExpr:
    """Cascade with ``names[0]`` as the first stage the signal enters."""
    if not names:
        raise ValueError("chain needs at least one component")
    expr: NetworkExpr = Leaf(names[0])
    for name in names[1:]:
        expr = Series(Leaf(name), expr)
    return expr


def parallel(*names: str) -> NetworkExpr:
    if not names:
        raise ValueError("parallel needs at least one component")
    expr: NetworkExpr = Leaf(names[0])
    for name in names[1:]:
        expr = Concat(expr, Leaf(name))
    return expr


def leaves(expr: NetworkExpr) -> list[str]:
    if isinstance(expr, Leaf):
        return [expr.name]
    if isinstance(expr, Series):
        return leaves(expr.upstream) + leaves(expr.downstream)
    return leaves(expr.left) + leaves(expr.right)


def evaluate_network(expr: NetworkExpr, components: Mapping, max_order: int = 3) -> SusceptibilitySet:
    """Fold ``expr`` into a susceptibility set.

    ``components`` maps names to SusceptibilitySets or to anything
    :func:`as_bilinear` accepts.  Each distinct component is realized once.
    """
    cache: dict = {}

    def resolve(name):
        if name not in components:
            raise UnknownComponent(f"network references undefined component {name!r}")
        if name not in cache:
            comp = components[name]
            cache[name] = comp if isinstance(comp, SusceptibilitySet) else susceptibility_set(as_bilinear(comp), max_order)
        return cache[name]

    def fold(node):
        if isinstance(node, Leaf):
            return resolve(node.name)
        if isinstance(node, Series):
            up = fold(node.upstream)
            return series(fold(node.downstream), up, max_order)
        if isinstance(node, Concat):
            return concatenate(fold(node.left), fold(node.right))
        raise TypeError(f"not a network expression: {node!r}")

    return fold(expr)
