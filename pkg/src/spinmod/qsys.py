"""Dense linear algebra for small open quantum systems.

Density matrices are vectorized by column stacking (Fortran order), so that
``vec(A @ X @ B) = kron(B.T, A) @ vec(X)``.  Every superoperator in the package
uses this convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-9
STEADY_STATE_TOL = 1e-10
NULL_SPACE_RTOL = 1e-9
# RK4 step bound, in units of the inverse generator norm
MAX_STEP_FACTOR = 0.01


class DimensionError(ValueError):
    pass


class SteadyStateError(RuntimeError):
    pass


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim, order="F")


def hermiticity_error(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def dag(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).conj().T


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator for X -> A X."""
    return np.kron(np.eye(a.shape[0]), a)


def spost(b: np.ndarray) -> np.ndarray:
    """Superoperator for X -> X B."""
    return np.kron(b.T, np.eye(b.shape[0]))


def sprepost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator for X -> A X B."""
    return np.kron(b.T, a)


@dataclass(frozen=True)
class Superoperator:
    """Linear map on column-stacked ``dim x dim`` matrices."""

    dim: int
    action: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.dim * self.dim
        if self.action.shape != (n, n):
            raise DimensionError(f"action must be {n}x{n}, got {self.action.shape}")
        self.action.setflags(write=False)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.action @ vec(rho), self.dim)

    @property
    def rate_scale(self) -> float:
        """Largest eigenvalue magnitude; sets the integration time scale."""
        return float(np.max(np.abs(np.linalg.eigvals(self.action))))

    def max_step(self) -> float:
        scale = self.rate_scale
        return np.inf if scale == 0 else MAX_STEP_FACTOR / scale


def liouvillian(H: np.ndarray, collapse_ops=()) -> Superoperator:
    """Lindblad generator  -i[H, .] + sum_k D[L_k]."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError("Hamiltonian must be square")
    dim = H.shape[0]
    if hermiticity_error(H) > HERMITIAN_TOL:
        raise ValueError(f"Hamiltonian is not Hermitian (error {hermiticity_error(H):.3g})")
    action = -1j * (spre(H) - spost(H))
    for c in collapse_ops:
        c = np.asarray(c, dtype=complex)
        if c.shape != (dim, dim):
            raise DimensionError(f"collapse operator shape {c.shape} does not match {dim}x{dim}")
        cdc = dag(c) @ c
        action = action + sprepost(c, dag(c)) - 0.5 * (spre(cdc) + spost(cdc))
    return Superoperator(dim, action)


def rk4_step_matrix(L: Superoperator, h: float) -> np.ndarray:
    """Single classical RK4 step of d/dt v = L v, written as a matrix.

    For an autonomous linear system the four stages collapse to the
    truncated exponential series through fourth order.
    """
    A = h * L.action
    n = A.shape[0]
    out = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 5):
        term = term @ A / k
        out = out + term
    return out


def step_matrix(L: Superoperator, t: float) -> np.ndarray:
    """Propagator over time ``t`` built from equal RK4 substeps."""
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    n = L.dim * L.dim
    if t == 0:
        return np.eye(n, dtype=complex)
    hmax = L.max_step()
    nsub = 1 if not np.isfinite(hmax) else max(1, int(np.ceil(t / hmax)))
    return np.linalg.matrix_power(rk4_step_matrix(L, t / nsub), nsub)


def propagate(L: Superoperator, rho0: np.ndarray, t: float) -> np.ndarray:
    """Evolve ``rho0`` for time ``t`` (ns) under the generator ``L``."""
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    rho0 = np.asarray(rho0, dtype=complex)
    if t == 0:
        return rho0.copy()
    rho = unvec(step_matrix(L, t) @ vec(rho0), L.dim)
    return 0.5 * (rho + dag(rho))


def propagate_grid(L: Superoperator, v0: np.ndarray, dt: float, n: int) -> np.ndarray:
    """Vectorized states at times ``k*dt`` for ``k < n``; shape ``(n, dim**2)``.

    ``v0`` need not be a density matrix (quantum regression propagates
    operator-modified states).
    """
    M = step_matrix(L, dt)
    out = np.empty((n, M.shape[0]), dtype=complex)
    v = vec(v0) if np.ndim(v0) == 2 else np.asarray(v0, dtype=complex)
    for k in range(n):
        out[k] = v
        v = M @ v
    return out


def steady_state(L: Superoperator) -> np.ndarray:
    """Unique trace-one null vector of ``L``."""
    _, s, vh = np.linalg.svd(L.action)
    scale = max(s[0], 1.0)
    null = np.flatnonzero(s <= NULL_SPACE_RTOL * scale)
    if null.size == 0:
        raise SteadyStateError("generator has no null vector")
    if null.size > 1:
        raise SteadyStateError(
            f"steady state is degenerate (null space multiplicity {null.size}); "
            "the model has decoupled sectors"
        )
    rho = unvec(vh[-1].conj(), L.dim)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise SteadyStateError("null vector is traceless")
    rho = rho / tr
    rho = 0.5 * (rho + dag(rho))
    residual = np.max(np.abs(L.action @ vec(rho)))
    if residual > STEADY_STATE_TOL * scale:
        raise SteadyStateError(f"steady-state residual {residual:.3g} above tolerance")
    return rho


def expect(op: np.ndarray, rho: np.ndarray) -> complex:
    return complex(np.trace(np.asarray(op) @ np.asarray(rho)))


def is_density_matrix(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    rho = np.asarray(rho)
    if abs(np.trace(rho) - 1) > tol or hermiticity_error(rho) > tol:
        return False
    return bool(np.min(np.linalg.eigvalsh(0.5 * (rho + dag(rho)))) >= -tol)
