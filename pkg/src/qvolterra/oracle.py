"""Independent validation: truncated Fock-space master equation, mean-field
baseline and a non-Gaussianity measure.

The drive enters as ``H_drive = i sum_j (conj(c_j) L_j - c_j L_j+)`` with
``c = S beta``; for one cavity port this is ``i sqrt(gamma) (beta* a - beta a+)``,
which makes the linear cavity reproduce the Langevin mean
``d<a>/dt = -(gamma/2 + i w) <a> - sqrt(gamma) beta`` exactly.  The mean output
is ``<b_out> = S beta + <L>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import OperatorPoly, destroy, heisenberg_generator, input_couplings, to_matrix
from .errors import TruncationLeak, UnphysicalCovariance
from .model import ModelSpec
from .response import DriveSignal, _as_drives

LEAK_THRESHOLD = 1e-6


@dataclass(frozen=True)
class FockDensity:
    """Density matrix on a truncated tensor-product Fock space.

    ``dims`` counts levels per mode, so truncation ``N`` means ``dims = (N+1,)``.
    """

    matrix: np.ndarray
    dims: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dims = tuple(self.dims) or (m.shape[0],)
        if m.shape != (int(np.prod(dims)),) * 2:
            raise ValueError(f"matrix shape {m.shape} does not match dims {dims}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def vacuum(cls, dims) -> "FockDensity":
        dims = (dims,) if np.isscalar(dims) else tuple(dims)
        m = np.zeros((int(np.prod(dims)),) * 2, dtype=complex)
        m[0, 0] = 1.0
        return cls(m, dims)

    @classmethod
    def pure(cls, psi, dims=()) -> "FockDensity":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), dims)

    @classmethod
    def coherent(cls, alpha: complex, N: int) -> "FockDensity":
        """Coherent state projected on levels ``0..N`` and renormalized."""
        k = np.arange(N + 1)
        logfact = np.cumsum(np.log(np.maximum(k, 1)))
        amp = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * logfact) * complex(alpha) ** k if alpha else (k == 0).astype(complex)
        return cls.pure(amp, (N + 1,))

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    @property
    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))))

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.einsum("ij,ji->", op, self.matrix))

    def check(self, herm_tol=1e-10, trace_tol=1e-8, pos_tol=1e-8):
        """Raise ValueError if the density-matrix invariants fail."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(self.trace - 1) > trace_tol:
            raise ValueError(f"trace deviates from 1 by {abs(self.trace - 1):.3g}")
        if self.min_eigenvalue() < -pos_tol:
            raise ValueError(f"negative eigenvalue {self.min_eigenvalue():.3g}")
        return self


@dataclass(frozen=True)
class LindbladModel:
    """Dense operators of a ModelSpec on a truncated Fock space."""

    dims: tuple
    H: np.ndarray
    Ls: tuple
    S: np.ndarray
    modes_a: tuple

    @classmethod
    def from_spec(cls, spec: ModelSpec, N) -> "LindbladModel":
        Ns = (N,) * spec.modes if np.isscalar(N) else tuple(N)
        if len(Ns) != spec.modes:
            raise ValueError(f"need one truncation per mode, got {Ns}")
        if min(Ns) < 2:
            raise ValueError("truncation must be at least 2")
        dims = tuple(n + 1 for n in Ns)
        H = to_matrix(spec.hamiltonian, dims)
        Ls = tuple(to_matrix(L, dims) for L in spec.couplings)
        a_ops = tuple(to_matrix(destroy(k), dims) for k in range(spec.modes))
        return cls(dims, H, Ls, spec.S, a_ops)

    def edge_mask(self) -> np.ndarray:
        """Diagonal positions where some mode sits at its top level."""
        idx = np.indices(self.dims).reshape(len(self.dims), -1)
        tops = np.array(self.dims)[:, None] - 1
        return np.any(idx == tops, axis=0)


@dataclass(frozen=True)
class OracleResult:
    t: np.ndarray
    a_mean: np.ndarray  # (samples, modes)
    b_out: np.ndarray  # (samples, ports)
    states: dict = field(default_factory=dict)  # sample index -> FockDensity
    trace_error: float = 0.0
    max_edge_population: float = 0.0

    @property
    def x_out(self) -> np.ndarray:
        return np.sqrt(2.0) * self.b_out[:, 0].real


def lindblad_integrate(
    spec: ModelSpec,
    drive,
    N=40,
    checkpoints=None,
    check_leak: bool = True,
    rho0: FockDensity | None = None,
) -> OracleResult:
    """Integrating-factor RK4 for the driven master equation on the drive grid.

    The diagonal of the Hamiltonian is carried exactly as elementwise phases;
    RK4 handles drive, damping, jumps and off-diagonal couplings.  The phase
    factor leaves populations untouched and the remainder is traceless, so
    the trace is preserved to rounding.

    ``checkpoints`` lists sample indices whose density matrices are kept
    (default: about 50 evenly spaced).  With ``check_leak`` a population
    above ``1e-6`` on any mode's top level raises :class:`TruncationLeak`.
    """
    drives = _as_drives(drive)
    model = LindbladModel.from_spec(spec, N)
    dt, n = drives[0].dt, drives[0].n
    if len(drives) < spec.ports:
        drives = drives + [DriveSignal.zeros(dt, n)] * (spec.ports - len(drives))
    if checkpoints is None:
        checkpoints = np.unique(np.linspace(0, n - 1, min(n, 51)).astype(int))
    checkpoints = set(int(c) for c in checkpoints)

    beta = np.array([d.samples for d in drives[: spec.ports]]).T  # (n, ports)
    beta_mid = np.array([d.midpoints for d in drives[: spec.ports]]).T
    c_grid = beta @ model.S.T
    c_mid = beta_mid @ model.S.T

    Ls = model.Ls
    Lds = tuple(L.conj().T for L in Ls)
    energies = np.real(np.diagonal(model.H))
    H0 = model.H - np.diag(energies) - 0.5j * sum(Ld @ L for L, Ld in zip(Ls, Lds))
    gap = energies[:, None] - energies[None, :]
    phase_half = np.exp(-0.5j * dt * gap)
    phase_full = phase_half * phase_half

    def heff(c):
        H = H0.copy()
        for cj, L, Ld in zip(c, Ls, Lds):
            H += 1j * (np.conj(cj) * L - cj * Ld)
        return H

    def rhs(rho, Heff):
        out = -1j * (Heff @ rho - rho @ Heff.conj().T)
        for L, Ld in zip(Ls, Lds):
            out += L @ rho @ Ld
        return out

    rho = (rho0 or FockDensity.vacuum(model.dims)).matrix.copy()
    edge = model.edge_mask()
    a_mean = np.zeros((n, spec.modes), dtype=complex)
    L_mean = np.zeros((n, spec.ports), dtype=complex)
    states = {}
    trace_err = 0.0
    edge_max = 0.0

    def record(k, rho):
        nonlocal trace_err, edge_max
        a_mean[k] = [np.einsum("ij,ji->", a, rho) for a in model.modes_a]
        L_mean[k] = [np.einsum("ij,ji->", L, rho) for L in Ls]
        trace_err = max(trace_err, abs(np.trace(rho) - 1))
        pop = float(np.real(np.diagonal(rho)[edge].sum()))
        edge_max = max(edge_max, pop)
        if check_leak and pop > LEAK_THRESHOLD:
            raise TruncationLeak(
                f"population {pop:.3g} at the truncation edge (t = {k * dt:.4g}); increase N"
            )
        if k in checkpoints:
            states[k] = FockDensity(rho.copy(), model.dims)

    record(0, rho)
    H_now = heff(c_grid[0])
    for k in range(n - 1):
        H_mid = heff(c_mid[k])
        H_next = heff(c_grid[k + 1])
        k1 = rhs(rho, H_now)
        rotated = phase_half * rho
        k2 = rhs(phase_half * (rho + 0.5 * dt * k1), H_mid)
        k3 = rhs(rotated + 0.5 * dt * k2, H_mid)
        k4 = rhs(phase_full * rho + dt * phase_half * k3, H_next)
        rho = phase_full * rho + dt / 6 * (phase_full * k1 + 2 * phase_half * (k2 + k3) + k4)
        H_now = H_next
        record(k + 1, rho)

    b_out = c_grid + L_mean
    return OracleResult(drives[0].t, a_mean, b_out, states, trace_err, edge_max)


# ---------------------------------------------------------------------------
# mean-field baseline


def _compile(poly: OperatorPoly):
    return [(c, key) for key, c in poly]


def _evaluate(compiled, alpha):
    total = 0j
    for c, key in compiled:
        v = c
        for mode, (p, q) in enumerate(key):
            v *= np.conj(alpha[mode]) ** p * alpha[mode] ** q
        total += v
    return total


@dataclass(frozen=True)
class SemiclassicalResult:
    t: np.ndarray
    alpha: np.ndarray  # (samples, modes)
    b_out: np.ndarray  # (samples, ports)

    @property
    def x_out(self) -> np.ndarray:
        return np.sqrt(2.0) * self.b_out[:, 0].real


def semiclassical_response(spec: ModelSpec, drive, alpha0=None) -> SemiclassicalResult:
    """Mean-field dynamics: every operator replaced by its coherent amplitude.

    For the Kerr cavity this is
    ``alpha' = -(gamma/2 + i w) alpha - 2 i chi |alpha|^2 alpha - sqrt(gamma) beta``.
    """
    drives = _as_drives(drive)
    dt, n = drives[0].dt, drives[0].n
    if len(drives) < spec.ports:
        drives = drives + [DriveSignal.zeros(dt, n)] * (spec.ports - len(drives))
    H, Ls, S = spec.hamiltonian, spec.couplings, spec.S
    drift, coup = [], []
    for k in range(spec.modes):
        X = destroy(k)
        drift.append(_compile(heisenberg_generator(X, H, Ls)))
        coup.append([(_compile(m), _compile(p)) for m, p in input_couplings(X, Ls)])
    readout = [_compile(L) for L in Ls]

    beta = np.array([d.samples for d in drives[: spec.ports]]).T
    beta_mid = np.array([d.midpoints for d in drives[: spec.ports]]).T
    c_grid = beta @ S.T
    c_mid = beta_mid @ S.T

    def f(alpha, c):
        out = np.empty(spec.modes, dtype=complex)
        for k in range(spec.modes):
            v = _evaluate(drift[k], alpha)
            for cj, (m, p) in zip(c, coup[k]):
                v += cj * _evaluate(m, alpha) + np.conj(cj) * _evaluate(p, alpha)
            out[k] = v
        return out

    alpha = np.zeros((n, spec.modes), dtype=complex)
    if alpha0 is not None:
        alpha[0] = alpha0
    for k in range(n - 1):
        a = alpha[k]
        k1 = f(a, c_grid[k])
        k2 = f(a + 0.5 * dt * k1, c_mid[k])
        k3 = f(a + 0.5 * dt * k2, c_mid[k])
        k4 = f(a + dt * k3, c_grid[k + 1])
        alpha[k + 1] = a + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    L_mean = np.array([[_evaluate(r, a) for r in readout] for a in alpha])
    return SemiclassicalResult(drives[0].t, alpha, c_grid + L_mean)


# ---------------------------------------------------------------------------
# non-Gaussianity


def gaussian_reference(rho: FockDensity, pad: int = 60, tol: float = 1e-6) -> FockDensity:
    """Displaced squeezed thermal state with the first and second moments of ``rho``.

    Built on ``N + pad`` levels and projected back onto the truncation of
    ``rho`` (the projection is not renormalized).
    """
    if len(rho.dims) != 1:
        raise ValueError("non-Gaussianity is implemented for one mode")
    d = rho.dims[0]
    a = np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)
    alpha = rho.expect(a)
    M = rho.expect(a @ a) - alpha**2
    Nc = float(np.real(rho.expect(a.conj().T @ a))) - abs(alpha) ** 2
    bound = (Nc + 0.5) ** 2 - abs(M) ** 2
    if bound < 0.25 - tol:
        raise UnphysicalCovariance(
            f"covariance violates the uncertainty bound: (N+1/2)^2 - |M|^2 = {bound:.6g} < 1/4"
        )
    nu = np.sqrt(max(bound, 0.25))
    n_th = max(nu - 0.5, 0.0)
    r = 0.5 * np.arccosh(max((Nc + 0.5) / nu, 1.0))
    theta = np.angle(-M) if abs(M) > 0 else 0.0

    D = d + pad
    A = np.diag(np.sqrt(np.arange(1, D)), 1).astype(complex)
    Ad = A.conj().T
    k = np.arange(D)
    if n_th > 0:
        p = (n_th / (1 + n_th)) ** k / (1 + n_th)
    else:
        p = (k == 0).astype(float)
    sigma = np.diag(p).astype(complex)
    xi = r * np.exp(1j * theta)
    Sq = scipy.linalg.expm(0.5 * (np.conj(xi) * A @ A - xi * Ad @ Ad))
    Dp = scipy.linalg.expm(alpha * Ad - np.conj(alpha) * A)
    U = Dp @ Sq
    sigma = U @ sigma @ U.conj().T
    return FockDensity(sigma[:d, :d], (d,))


def non_gaussianity(rho: FockDensity, pad: int = 60) -> float:
    """``delta = tr[(rho - sigma)^2] / (2 tr[rho^2])`` with ``sigma`` the moment-matched Gaussian."""
    sigma = gaussian_reference(rho, pad).matrix
    diff = rho.matrix - sigma
    return float(np.real(np.vdot(diff, diff)) / (2 * rho.purity))
