"""
**Discrete forward problem and Dirichlet-to-Neumann maps**

Delta u + q u = 0 is discretized with the 5-point stencil on the interior
nodes of X; the boundary ring nodes carry the Dirichlet data. The flux
(Schur complement) form of the DN map is used:

    F = diag(deg_B) - K_BI A_II^{-1} K_IB,     Lambda = W^{-1} F,

where A_II = K_II - h^2 diag(q), K is the positive 5-point matrix, deg_B the
number of interior neighbours of each ring node and W the ring weights. The
discrete Green identity then holds exactly:

    h^2 sum_X (q1 - q2) v1 v2 = f1^T (F2 - F1) f2
                             = sum_B w f1 ((Lambda_2 - Lambda_1) f2).

**Process Flow:**
1. **Guard**: check that zero is far from the spectrum of A_II.
2. **Factorize**: one sparse LU per potential, shared by all solves.
3. **Assemble**: DN columns in blocks (optionally threaded with joblib).
"""

import hashlib
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, List, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from bukhgeim.errors import GridMismatchError, SolverError
from bukhgeim.grid import Field, Grid2D, Potential, Support, boundary_sobolev_norm, w12_norm
from bukhgeim.potentials import make_potential

LOGGER = logging.getLogger(__name__)

GUARD_RTOL = 1e-8
RESIDUAL_RTOL = 1e-10
COLUMN_BLOCK = 64


@dataclass(frozen=True, eq=False)
class LaplacianBlocks:
    """Blocks of the positive 5-point matrix split into interior (I) and ring (B) nodes."""

    interior_flat: np.ndarray
    K_II: sparse.csc_matrix
    K_IB: sparse.csc_matrix
    degree: np.ndarray


@lru_cache(maxsize=8)
def laplacian_blocks(grid: Grid2D) -> LaplacianBlocks:
    mask = grid.interior_mask
    n = grid.resolution
    interior_flat = np.flatnonzero(mask)
    number = -np.ones(n * n, dtype=int)
    number[interior_flat] = np.arange(len(interior_flat))
    ring_flat = np.ravel_multi_index(tuple(grid.boundary_index.T), grid.shape)
    ring_number = -np.ones(n * n, dtype=int)
    ring_number[ring_flat] = np.arange(len(ring_flat))

    rows_ii, cols_ii, rows_ib, cols_ib = [], [], [], []
    i, j = np.unravel_index(interior_flat, grid.shape)
    me = number[interior_flat]
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb_flat = np.ravel_multi_index((i + di, j + dj), grid.shape)
        inner = number[nb_flat] >= 0
        rows_ii.append(me[inner])
        cols_ii.append(number[nb_flat[inner]])
        ring = ring_number[nb_flat] >= 0
        rows_ib.append(me[ring])
        cols_ib.append(ring_number[nb_flat[ring]])

    n_i = len(interior_flat)
    r = np.concatenate(rows_ii)
    c = np.concatenate(cols_ii)
    K_II = sparse.coo_matrix((-np.ones(len(r)), (r, c)), shape=(n_i, n_i))
    K_II = (K_II + 4.0 * sparse.identity(n_i)).tocsc()
    r = np.concatenate(rows_ib)
    c = np.concatenate(cols_ib)
    K_IB = sparse.coo_matrix((-np.ones(len(r)), (r, c)), shape=(n_i, len(ring_flat))).tocsc()
    return LaplacianBlocks(interior_flat, K_II, K_IB, grid.boundary_degree.astype(float))


def q_fingerprint(q: Potential) -> str:
    digest = hashlib.sha256()
    digest.update(f"{q.grid.resolution}:{q.grid.half_width!r}".encode())
    digest.update(np.ascontiguousarray(q.values).tobytes())
    return digest.hexdigest()


def _system_matrix(q: Potential) -> sparse.csc_matrix:
    blocks = laplacian_blocks(q.grid)
    qi = q.values.ravel()[blocks.interior_flat]
    dtype = float if q.is_real else complex
    diag = sparse.diags(q.grid.spacing ** 2 * (qi.real if q.is_real else qi))
    return (blocks.K_II - diag).astype(dtype).tocsc()


def _guard_from_lu(A: sparse.csc_matrix, lu: splinalg.SuperLU, rtol: float) -> bool:
    n = A.shape[0]
    inverse = splinalg.LinearOperator(
        (n, n),
        matvec=lambda x: lu.solve(np.ascontiguousarray(x, dtype=A.dtype)),
        rmatvec=lambda x: lu.solve(np.ascontiguousarray(x, dtype=A.dtype), trans="H"),
        dtype=A.dtype,
    )
    v0 = np.ones(n, dtype=A.dtype)
    try:
        inv_norm = splinalg.svds(inverse, k=1, return_singular_vectors=False, v0=v0)[0]
        op_norm = splinalg.svds(A, k=1, return_singular_vectors=False, v0=v0)[0]
    except RuntimeError:
        return False
    if not np.isfinite(inv_norm) or inv_norm == 0:
        return False
    sigma_min = 1.0 / inv_norm
    LOGGER.debug("guard: sigma_min=%.3e ||A||=%.3e", sigma_min, op_norm)
    return bool(sigma_min >= rtol * op_norm)


def eigenvalue_guard(q: Potential, rtol: float = GUARD_RTOL) -> bool:
    """
    True when sigma_min(A_II) >= rtol * ||A_II||_2.

    A singular factorization also counts as a failed guard.
    """
    A = _system_matrix(q)
    try:
        lu = splinalg.splu(A)
    except RuntimeError:
        return False
    return _guard_from_lu(A, lu, rtol)


def dirichlet_eigenvalue(grid: Grid2D) -> float:
    """Smallest eigenvalue of the discrete Dirichlet -Delta on X."""
    K = laplacian_blocks(grid).K_II / grid.spacing ** 2
    vals = splinalg.eigsh(K, k=1, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(vals[0])


class ForwardSolver:
    """
    Factorized Dirichlet problem for one potential.

    Args:
        q: potential
        check_guard: refuse systems failing :func:`eigenvalue_guard`
        guard_rtol: guard threshold relative to ||A_II||
    """

    def __init__(self, q: Potential, check_guard: bool = True, guard_rtol: float = GUARD_RTOL):
        self.q = q
        self.grid = q.grid
        self.blocks = laplacian_blocks(q.grid)
        self.A = _system_matrix(q)
        try:
            self._lu = splinalg.splu(self.A)
        except RuntimeError as e:
            raise SolverError(f"sparse factorization failed: {e}", code="SOLVER_SINGULAR") from e
        if check_guard and not _guard_from_lu(self.A, self._lu, guard_rtol):
            raise SolverError(
                f"zero is (nearly) a Dirichlet eigenvalue for potential '{q.label}'",
                code="SOLVER_SINGULAR",
            )

    def _solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(rhs) and not np.iscomplexobj(self.A.data):
            u = self._lu.solve(np.ascontiguousarray(rhs.real)) + 1j * self._lu.solve(
                np.ascontiguousarray(rhs.imag)
            )
        else:
            u = self._lu.solve(np.ascontiguousarray(rhs, dtype=self.A.dtype))
        scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
        res = np.linalg.norm(self.A @ u - rhs) / scale
        if res > RESIDUAL_RTOL:
            raise SolverError(
                f"relative residual {res:.2e} above {RESIDUAL_RTOL:g}", code="SOLVER_INACCURATE"
            )
        return u

    def solve(self, f: np.ndarray) -> Field:
        """Solution with trace ``f`` on the boundary ring, as a field on the closure of X."""
        f = np.asarray(f)
        if f.shape != (self.grid.boundary_count,):
            raise SolverError(f"trace has shape {f.shape}, expected ({self.grid.boundary_count},)")
        u_i = self._solve_interior(-(self.blocks.K_IB @ f))
        values = np.zeros(self.grid.resolution ** 2, dtype=complex)
        values[self.blocks.interior_flat] = u_i
        values = values.reshape(self.grid.shape)
        idx = self.grid.boundary_index
        values[idx[:, 0], idx[:, 1]] = f
        return Field(self.grid, values, Support.WHOLE)

    def flux(self, f: np.ndarray) -> np.ndarray:
        """F f for one or several traces (columns)."""
        f = np.asarray(f)
        u_i = self._solve_interior(-(self.blocks.K_IB @ f))
        deg = self.blocks.degree if f.ndim == 1 else self.blocks.degree[:, None]
        return deg * f + self.blocks.K_IB.T @ u_i

    def flux_matrix(self, workers: int = 1) -> np.ndarray:
        nb = self.grid.boundary_count
        starts = list(range(0, nb, COLUMN_BLOCK))

        def block(start: int) -> np.ndarray:
            eye = np.zeros((nb, min(COLUMN_BLOCK, nb - start)))
            eye[start + np.arange(eye.shape[1]), np.arange(eye.shape[1])] = 1.0
            return self.flux(eye)

        if workers == 1:
            cols = [block(s) for s in starts]
        else:
            cols = Parallel(n_jobs=workers, prefer="threads")(delayed(block)(s) for s in starts)
        return np.hstack(cols)


def solve_dirichlet(q: Potential, f: np.ndarray) -> Field:
    """5-point solution of Delta u + q u = 0 with ring values ``f``."""
    return ForwardSolver(q).solve(f)


@dataclass(frozen=True, eq=False)
class DNMap:
    """
    Dense boundary-ring matrix of the Dirichlet-to-Neumann map.

    ``matrix`` is Lambda = W^{-1} F; the flux matrix F = W Lambda is symmetric
    for real (indeed any) potentials.
    """

    grid: Grid2D
    matrix: np.ndarray = field(repr=False)
    q_fingerprint: str = ""

    @property
    def flux(self) -> np.ndarray:
        return self.grid.boundary_weights[:, None] * self.matrix

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f

    def symmetry_defect(self) -> float:
        """||W Lambda - (W Lambda)^T|| / ||W Lambda||."""
        F = self.flux
        return float(np.linalg.norm(F - F.T) / np.linalg.norm(F))

    def with_noise(self, level: float, seed: int = 0) -> "DNMap":
        """
        Add i.i.d. complex Gaussian entries at relative Frobenius ``level``.
        """
        if level <= 0:
            return self
        rng = np.random.default_rng(seed)
        shape = self.matrix.shape
        noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        noise *= level * np.linalg.norm(self.matrix) / np.linalg.norm(noise)
        return DNMap(self.grid, self.matrix + noise, f"{self.q_fingerprint}+noise{level:g}")


def assemble_dn(q: Potential, workers: int = 1, check_guard: bool = True) -> DNMap:
    """DN map of ``q`` (one factorization, nb right-hand sides)."""
    solver = ForwardSolver(q, check_guard=check_guard)
    F = solver.flux_matrix(workers)
    matrix = F / q.grid.boundary_weights[:, None]
    LOGGER.info("assembled DN map for %s (%d boundary nodes)", q.label, q.grid.boundary_count)
    return DNMap(q.grid, matrix, q_fingerprint(q))


def _require_same_grid(a: Grid2D, b: Grid2D):
    if not a.same_as(b):
        raise GridMismatchError(
            f"DN maps live on different grids (N={a.resolution}, L={a.half_width} "
            f"vs N={b.resolution}, L={b.half_width})"
        )
    if a.boundary_count != b.boundary_count:
        raise GridMismatchError("boundary rings differ")


def pairing(q1: Potential, q2: Potential, u1: Field, u2: Field) -> complex:
    """Riemann sum of u1 (q1 - q2) u2 over X."""
    mask = q1.grid.interior_mask
    integrand = u1.values * (q1.values - q2.values) * u2.values
    return complex(q1.grid.spacing ** 2 * np.sum(integrand[mask]))


def boundary_pairing(dn1: DNMap, dn2: DNMap, f1: np.ndarray, f2: np.ndarray) -> complex:
    """Weighted boundary sum of f1 * ((Lambda_2 - Lambda_1) f2)."""
    _require_same_grid(dn1.grid, dn2.grid)
    w = dn1.grid.boundary_weights
    return complex(np.sum(w * f1 * ((dn2.matrix - dn1.matrix) @ f2)))


def boundary_pairing_many(dn1: DNMap, dn2: DNMap, T1: np.ndarray, T2: np.ndarray) -> np.ndarray:
    """Column-wise :func:`boundary_pairing` for trace matrices of shape (nb, m)."""
    _require_same_grid(dn1.grid, dn2.grid)
    w = dn1.grid.boundary_weights[:, None]
    return np.sum(w * T1 * ((dn2.matrix - dn1.matrix) @ T2), axis=0)


def _weighted_difference(dn1: DNMap, dn2: DNMap) -> np.ndarray:
    grid = dn1.grid
    lam, V = grid.boundary_spectrum
    scale = (1.0 + lam) ** -0.25
    D = V.T @ (grid.boundary_weights[:, None] * (dn1.matrix - dn2.matrix)) @ V
    return scale[:, None] * D * scale[None, :]


def dn_operator_norm(dn1: DNMap, dn2: DNMap) -> float:
    """
    ||Lambda_1 - Lambda_2|| from boundary W^{1/2} to W^{-1/2}.

    Exact spectral norm of the matrix expressed in the W-orthonormal curve
    eigenbasis and scaled by (1 + lambda)^{-1/4} on both sides.
    """
    _require_same_grid(dn1.grid, dn2.grid)
    return float(np.linalg.norm(_weighted_difference(dn1, dn2), 2))


@lru_cache(maxsize=8)
def trace_constant(grid: Grid2D) -> float:
    """
    Discrete norm of the trace map W^1_2(X) -> W^{1/2}(boundary ring).

    The smallest discrete W^1_2 extension of a trace f has squared norm
    f^T F_{-1} f (flux matrix for q = -1), so the constant is the square root
    of the largest generalized eigenvalue of (M_{1/2}, F_{-1}).
    """
    minus_one = make_potential(grid, "constant", amplitude=-1.0, label="minus-one")
    F = ForwardSolver(minus_one, check_guard=False).flux_matrix()
    F = 0.5 * (F + F.T)
    lam, V = grid.boundary_spectrum
    WV = grid.boundary_weights[:, None] * V
    M = WV @ np.diag(np.sqrt(1.0 + lam)) @ WV.T
    top = linalg.eigh(M, F, eigvals_only=True)[-1]
    LOGGER.debug("trace constant for N=%d: %.4g", grid.resolution, np.sqrt(top))
    return float(np.sqrt(top))


def cauchy_distance_data(dn1: DNMap, dn2: DNMap) -> float:
    """Data-side bound ||Tr||^2 * ||Lambda_1 - Lambda_2||_{W^{1/2} -> W^{-1/2}}."""
    _require_same_grid(dn1.grid, dn2.grid)
    return trace_constant(dn1.grid) ** 2 * dn_operator_norm(dn1, dn2)


def probe_traces(grid: Grid2D, max_degree: int = 3, taus: Sequence[float] = (1.0, 2.0),
                 centers: Sequence[complex] = (0j, 0.3 + 0.2j)) -> List[np.ndarray]:
    """
    Probe family for the Cauchy-data distance.

    Harmonic traces Re z^k, Im z^k (k <= max_degree) and the traces of the
    free CGO solutions e^{i tau (z - z0)^2} for the given (tau, z0).
    """
    z = grid.boundary_points
    traces = [np.ones_like(z)]
    for k in range(1, max_degree + 1):
        traces.append(np.real(z ** k) + 0j)
        traces.append(np.imag(z ** k) + 0j)
    for tau in taus:
        for z0 in centers:
            traces.append(np.exp(1j * tau * (z - z0) ** 2))
    return traces


@dataclass(frozen=True)
class DistanceCheck:
    sup_pairing: float
    distance: float

    @property
    def ratio(self) -> float:
        return self.sup_pairing / self.distance if self.distance > 0 else 0.0


def distance_probe_check(
    q1: Potential,
    q2: Potential,
    traces: Iterable[np.ndarray],
    dn1: DNMap = None,
    dn2: DNMap = None,
) -> DistanceCheck:
    """
    Lower estimate of d(C_1, C_2) over a probe family against the data bound.

    Every trace is solved for both potentials, the solutions are normalized in
    discrete W^1_2, and |pairing| is maximized over all ordered pairs.
    """
    s1, s2 = ForwardSolver(q1), ForwardSolver(q2)
    traces = list(traces)
    sols1 = [s1.solve(f) for f in traces]
    sols2 = [s2.solve(f) for f in traces]
    best = 0.0
    for u1 in sols1:
        n1 = w12_norm(u1)
        for u2 in sols2:
            val = abs(pairing(q1, q2, u1, u2)) / (n1 * w12_norm(u2))
            best = max(best, val)
    if dn1 is None:
        dn1 = assemble_dn(q1)
    if dn2 is None:
        dn2 = assemble_dn(q2)
    return DistanceCheck(float(best), cauchy_distance_data(dn1, dn2))


def boundary_trace_norm(grid: Grid2D, f: np.ndarray) -> float:
    return boundary_sobolev_norm(grid, f, 0.5)
