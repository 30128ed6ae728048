"""Output trajectories ``<b_out(t)>`` from a kernel series and a coherent drive.

With vacuum input fluctuations and a normally ordered readout, the mean
output depends on the input only through its coherent amplitude ``beta(t)``,
so every ``b`` line of the Volterra series carries ``beta`` and every ``b+``
line carries ``conj(beta)``.

The fast path integrates each exponential term ``(c, lam_1..lam_n)`` as a
chain of first-order filters (oldest input first)

    z_1' = -lam_n z_1 + u_n(t)
    z_q' = -lam_{n-q+1} z_q + u_{n-q+1}(t) z_{q-1}
    y   += c z_n

with fixed-step RK4 on the drive grid.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GridTooLarge, NonDecayingKernel, SegmentTooShort
from .kernels import ExpSumKernel
from .tables import write_csv

BRUTE_FORCE_COST_CAP = 128**3


@dataclass(frozen=True)
class DriveSignal:
    """Coherent amplitude ``beta`` sampled at ``t_k = k dt``.

    ``midpoints`` holds ``beta(t_k + dt/2)``; when not supplied it is
    obtained by four-point cubic interpolation of the samples.
    """

    dt: float
    samples: np.ndarray
    midpoints: np.ndarray | None = None
    tag: str = ""

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        u = np.asarray(self.samples, dtype=complex).reshape(-1)
        if len(u) < 2:
            raise ValueError("a drive needs at least two samples")
        if not np.all(np.isfinite(u)):
            raise ValueError("drive samples must be finite")
        mid = _cubic_midpoints(u) if self.midpoints is None else np.asarray(self.midpoints, complex).reshape(-1)
        if len(mid) != len(u) - 1:
            raise ValueError("midpoints must have one fewer entry than samples")
        object.__setattr__(self, "samples", u)
        object.__setattr__(self, "midpoints", mid)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.n)

    @classmethod
    def from_function(cls, f: Callable, dt: float, n: int, tag: str = "") -> "DriveSignal":
        t = dt * np.arange(n)
        return cls(dt, f(t), f(t[:-1] + dt / 2), tag)

    @classmethod
    def rotating(cls, eps: float, omega_d: float, dt: float, n: int) -> "DriveSignal":
        """``beta(t) = eps exp(-i omega_d t)``."""
        return cls.from_function(
            lambda t: eps * np.exp(-1j * omega_d * t), dt, n,
            tag=f"rotating eps={eps!r} omega_d={omega_d!r}",
        )

    @classmethod
    def zeros(cls, dt: float, n: int) -> "DriveSignal":
        return cls(dt, np.zeros(n, complex), np.zeros(n - 1, complex), "zero")

    def scaled(self, s) -> "DriveSignal":
        return DriveSignal(self.dt, s * self.samples, s * self.midpoints, f"{s!r}*({self.tag})")

    def line(self, sign: str):
        """``(samples, midpoints)`` of the ``b`` (``-``) or ``b+`` (``+``) line."""
        if sign == "-":
            return self.samples, self.midpoints
        return self.samples.conj(), self.midpoints.conj()


def _cubic_midpoints(u: np.ndarray) -> np.ndarray:
    n = len(u)
    if n < 4:
        return 0.5 * (u[:-1] + u[1:])
    # pad with cubic extrapolation so end intervals use the same stencil
    left = 4 * u[0] - 6 * u[1] + 4 * u[2] - u[3]
    right = 4 * u[-1] - 6 * u[-2] + 4 * u[-3] - u[-4]
    p = np.concatenate([[left], u, [right]])
    return (-p[:-3] + 9 * p[1:-2] + 9 * p[2:-1] - p[3:]) / 16


def _as_drives(drive) -> list[DriveSignal]:
    drives = [drive] if isinstance(drive, DriveSignal) else list(drive)
    if not drives:
        raise ValueError("no drive given")
    dt, n = drives[0].dt, drives[0].n
    if any(d.dt != dt or d.n != n for d in drives):
        raise ValueError("all port drives must share one time grid")
    return drives


@dataclass(frozen=True)
class ResponseResult:
    """Mean output trajectory split into feedthrough and per-order parts."""

    t: np.ndarray
    feedthrough: np.ndarray
    orders: dict = field(default_factory=dict)

    @property
    def total(self) -> np.ndarray:
        out = self.feedthrough.copy()
        for y in self.orders.values():
            out = out + y
        return out

    @property
    def x_out(self) -> np.ndarray:
        """Quadrature ``(b + b+)/sqrt 2`` of the mean output."""
        return np.sqrt(2.0) * self.total.real

    def to_csv(self, stream, header=None, comments=()):
        total = self.total
        cols = ["t", "re_b_out", "im_b_out", "x_out"]
        data = [self.t, total.real, total.imag, self.x_out]
        for n in sorted(self.orders):
            cols += [f"re_y{n}", f"im_y{n}"]
            data += [self.orders[n].real, self.orders[n].imag]
        write_csv(stream, cols, data, header, comments)


def _feedthrough_part(drives, feedthrough, out_sign) -> np.ndarray:
    row = np.atleast_1d(np.asarray(feedthrough, dtype=complex))
    if len(row) == 1 and len(drives) > 1:
        row = np.concatenate([row, np.zeros(len(drives) - 1)])
    out = np.zeros(drives[0].n, dtype=complex)
    for p, c in enumerate(row):
        if c != 0:
            if p >= len(drives):
                raise ValueError(f"feedthrough references port {p} but only {len(drives)} drives given")
            u, _ = drives[p].line(out_sign)
            out += (c if out_sign == "-" else np.conj(c)) * u
    return out


def _out_sign(kernels, out_sign):
    signs = {k.signature.out_sign for k in kernels}
    if len(signs) > 1:
        raise ValueError("kernels mix output signs")
    return signs.pop() if signs else out_sign


def _line(drives, port, sign):
    if port >= len(drives):
        raise ValueError(f"kernel input port {port} has no drive")
    return drives[port].line(sign)


def volterra_response(
    kernels: Sequence[ExpSumKernel],
    drive,
    max_order: int = 3,
    feedthrough=0.0,
    out_sign: str = "-",
) -> ResponseResult:
    """Evaluate the truncated Volterra series by cascaded-filter integration.

    ``drive`` is one DriveSignal (port 0) or one per port.  ``feedthrough``
    is the row of ``S`` for the output port, applied to the ``b`` lines (its
    conjugate for a ``b+`` output).
    """
    drives = _as_drives(drive)
    out_sign = _out_sign(kernels, out_sign)
    dt, N = drives[0].dt, drives[0].n

    by_order: dict = defaultdict(list)
    for k in kernels:
        if 1 <= k.order <= max_order and len(k):
            by_order[k.order].append(k)

    orders = {}
    for n in sorted(by_order):
        group = by_order[n]
        coeffs = np.concatenate([k.coeffs for k in group])
        rates = np.vstack([k.rates for k in group])
        if np.min(rates.real) <= 0:
            raise NonDecayingKernel(f"order-{n} kernel has a rate with Re <= 0")
        # filter stage q consumes input n-q (0-based), oldest first
        lines = sorted({(p, s) for k in group for p, s in k.signature.inputs})
        line_pos = {ln: i for i, ln in enumerate(lines)}
        U = np.array([_line(drives, *ln)[0] for ln in lines])  # (L, N)
        Um = np.array([_line(drives, *ln)[1] for ln in lines])  # (L, N-1)
        sel = np.concatenate(
            [np.tile([line_pos[k.signature.inputs[n - 1 - q]] for q in range(n)], (len(k), 1)) for k in group]
        )  # (T, n)
        lam = rates[:, ::-1]  # stage q decays with lam_{n-q}
        orders[n] = _integrate_cascade(coeffs, lam, sel, U, Um, dt, N)

    return ResponseResult(drives[0].t, _feedthrough_part(drives, feedthrough, out_sign), orders)


def _integrate_cascade(coeffs, lam, sel, U, Um, dt, N):
    T, n = lam.shape
    z = np.zeros((T, n), dtype=complex)
    y = np.zeros(N, dtype=complex)
    ones = np.ones((T, 1), dtype=complex)

    def f(z, u):
        prev = np.concatenate([ones, z[:, :-1]], axis=1)
        return -lam * z + u * prev

    for j in range(N - 1):
        u0 = U[sel, j]
        um = Um[sel, j]
        u1 = U[sel, j + 1]
        k1 = f(z, u0)
        k2 = f(z + 0.5 * dt * k1, um)
        k3 = f(z + 0.5 * dt * k2, um)
        k4 = f(z + dt * k3, u1)
        z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        y[j + 1] = coeffs @ z[:, -1]
    return y


def _trapezoid_weights(j: int, dt: float) -> np.ndarray:
    """Weights of the trapezoid rule on grid points ``0..j``."""
    if j == 0:
        return np.zeros(1)
    w = np.full(j + 1, dt)
    w[0] = w[-1] = dt / 2
    return w


def brute_force_response(
    kernels: Sequence[ExpSumKernel],
    drive,
    max_order: int = 3,
    feedthrough=0.0,
    out_sign: str = "-",
    cost_cap: int = BRUTE_FORCE_COST_CAP,
) -> ResponseResult:
    """Nested trapezoid quadrature over the ordered simplex ``t > s_1 > ... > s_n``.

    Uses only kernel values on the lag grid, so it is independent of the
    term structure exploited by :func:`volterra_response`.
    """
    drives = _as_drives(drive)
    out_sign = _out_sign(kernels, out_sign)
    dt, N = drives[0].dt, drives[0].n
    orders: dict = {}
    for k in kernels:
        n = k.order
        if n > max_order or k.is_zero:
            continue
        if N**n > cost_cap:
            raise GridTooLarge(f"order {n} on {N} samples costs {N**n} > cap {cost_cap}")
        lags = dt * np.arange(N)
        table = k(*np.meshgrid(*([lags] * n), indexing="ij"))  # K[a, b, ...] = k(a dt, b dt, ...)
        us = [_line(drives, p, s)[0] for p, s in k.signature.inputs]
        W = _trapezoid_matrix(N, dt)
        y = np.array([_simplex_sum(table, us, i, dt, W) for i in range(N)])
        orders[n] = orders.get(n, 0) + y
    return ResponseResult(drives[0].t, _feedthrough_part(drives, feedthrough, out_sign), orders)


def _trapezoid_matrix(N: int, dt: float) -> np.ndarray:
    """``W[j, :j+1]`` are the trapezoid weights on ``[0, t_j]``."""
    W = np.zeros((N, N))
    for j in range(N):
        W[j, : j + 1] = _trapezoid_weights(j, dt)
    return W


def _simplex_sum(table, us, i, dt, W):
    """``int_0^t ds_1 u_1(s_1) int_0^{s_1} ds_2 u_2(s_2) ... k(t - s_1, s_1 - s_2, ...)``.

    Outer integrals are explicit loops; the innermost two are evaluated as a
    masked matrix over ``(s_{n-1}, s_n)``.
    """
    n = len(us)
    if n == 1:
        j = np.arange(i + 1)
        return np.sum(W[i, j] * us[0][j] * table[i - j])

    def inner(prefix, upper):
        j1 = np.arange(upper + 1)[:, None]
        j2 = np.arange(upper + 1)[None, :]
        lag2 = np.where(j2 <= j1, j1 - j2, 0)
        vals = table[prefix][upper - j1, lag2]
        weights = W[upper, : upper + 1, None] * W[: upper + 1, : upper + 1]
        return np.sum(weights * us[n - 2][: upper + 1, None] * us[n - 1][None, : upper + 1] * vals)

    def outer(depth, upper, prefix):
        if depth == n - 2:
            return inner(prefix, upper)
        total = 0j
        for j in range(upper + 1):
            if W[upper, j]:
                total += W[upper, j] * us[depth][j] * outer(depth + 1, j, prefix + (upper - j,))
        return total

    return outer(0, i, ())


# ---------------------------------------------------------------------------
# spectra of trajectories


def output_spectrum(result: ResponseResult, start: float | None = None, stop: float | None = None,
                    floor: float = -16.0):
    """Hann-windowed DFT of ``x_out`` on ``[start, stop)``.

    Returns angular frequencies ``>= 0`` and ``log10 |X|`` clamped at
    ``floor``; ``|X|`` is normalized by the window sum.
    """
    t = result.t
    mask = np.ones(len(t), bool)
    if start is not None:
        mask &= t >= start - 1e-12
    if stop is not None:
        mask &= t < stop - 1e-12
    x = result.x_out[mask]
    if len(x) < 16:
        raise SegmentTooShort(f"spectrum segment has {len(x)} samples, need at least 16")
    dt = t[1] - t[0]
    window = np.hanning(len(x))
    X = np.fft.rfft(x * window) / window.sum()
    omega = 2 * np.pi * np.fft.rfftfreq(len(x), dt)
    with np.errstate(divide="ignore"):
        logmag = np.log10(np.abs(X))
    return omega, np.maximum(logmag, floor)


def rms_difference(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.sqrt(np.mean(np.abs(a - b) ** 2)))
