"""Finite-difference Laplacian on a truncated collar, in ``u = log(x1/x)``.

With ``rho = e^{n u} (1 + c x)^n / alpha(y)`` (the volume density in
``(u, y)`` up to a constant) the operator is written in flux form

    Delta f = -(1/rho) d_u(rho alpha**2 d_u f) - (1/rho) sum_i d_i(rho q d_i f),
    q(u) = x**2 (1 + c x)**-2,

and discretized with coefficients at half-points. Only ratios of ``rho``
enter each row, so nothing overflows however deep the grid goes, and the
matrix is symmetric in the inner product weighted by ``rho`` times the cell.
Dirichlet conditions hold at ``u = 0`` and ``u = u_max``; the torus is
periodic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BudgetExceededError, ConvergenceError
from .geometry import ModelMetric

DEFAULT_BUDGET = 2_000_000
# probe values beyond this times ||L - z|| are dominated by roundoff
COND_LIMIT = 1e13


@dataclass(frozen=True)
class CollarGrid:
    """Interior nodes ``u_j = j h_u`` (``j = 1..nu``) times a periodic torus grid."""

    u_max: float
    nu: int
    ny: int
    n: int
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.nu < 8 or self.ny < 8:
            raise ValueError("nu and ny must be >= 8")
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @classmethod
    def from_spacing(cls, u_max: float, h: float, ny: int, n: int, **kw) -> "CollarGrid":
        return cls(u_max, max(8, int(round(u_max / h)) - 1), ny, n, **kw)

    @property
    def h_u(self) -> float:
        return self.u_max / (self.nu + 1)

    @property
    def h_y(self) -> float:
        return 2 * math.pi / self.ny

    @property
    def n_torus(self) -> int:
        return self.ny**self.n

    @property
    def size(self) -> int:
        return self.nu * self.n_torus

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nu,) + (self.ny,) * self.n

    def u_nodes(self) -> np.ndarray:
        return self.h_u * np.arange(1, self.nu + 1)

    def y_nodes(self) -> np.ndarray:
        """Torus nodes, shape ``(ny**n, n)``, in C order of the grid axes."""
        t = self.h_y * np.arange(self.ny)
        return np.stack(np.meshgrid(*([t] * self.n), indexing="ij"), axis=-1).reshape(-1, self.n)

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(u[:, None], y[None, :, :])`` and flatten to node order."""
        vals = func(self.u_nodes()[:, None], self.y_nodes()[None, :, :])
        return np.broadcast_to(vals, (self.nu, self.n_torus)).ravel()


@dataclass
class SparseOperator:
    """Discrete Laplacian ``L`` with its volume log-weights.

    ``matrix`` is CSR; ``log_weights`` holds ``log(rho * cell)`` per node so
    ``diag(W) L`` is symmetric. When ``alpha`` is constant, ``separable``
    keeps the pieces of the symmetrized form ``S_u (x) I + diag(q) (x) K_y``.
    """

    matrix: sp.csr_matrix
    log_weights: np.ndarray
    grid: CollarGrid
    bc: str = "dirichlet"
    separable: dict | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def weights(self) -> np.ndarray:
        """Volume weights normalized so the largest is 1."""
        return np.exp(self.log_weights - self.log_weights.max())

    def symmetrized(self) -> sp.csr_matrix:
        """``W^{1/2} L W^{-1/2}``, a symmetric matrix."""
        half = 0.5 * (self.log_weights - self.log_weights.max())
        d = np.exp(half)
        return (sp.diags(d) @ self.matrix @ sp.diags(1 / d)).tocsr()

    def export_triplets(self, path) -> None:
        """Write one ``row col value`` line per nonzero."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            fh.write(f"# {self.dimension} {self.dimension} {coo.nnz}\n")
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r} {c} {v:.17g}\n")


def _log_e(metric: ModelMetric, u):
    # log of e^{n u} (1 + c x)^n
    return metric.n * (u + np.log1p(metric.c * metric.x1 * np.exp(-u)))


def assemble(metric: ModelMetric, grid: CollarGrid) -> SparseOperator:
    """Second-order flux discretization of the collar Laplacian."""
    if grid.size > grid.budget:
        raise BudgetExceededError(f"grid has {grid.size} points, budget is {grid.budget}")
    if grid.n != metric.n:
        raise ValueError("grid and metric dimensions differ")
    n, nu, ny, M = metric.n, grid.nu, grid.ny, grid.n_torus
    hu, hy = grid.h_u, grid.h_y
    u = grid.u_nodes()
    y = grid.y_nodes()
    prof = metric.profile
    a = prof.alpha(y)
    le = _log_e(metric, u)
    cp = np.exp(_log_e(metric, u + hu / 2) - le) / hu**2
    cm = np.exp(_log_e(metric, u - hu / 2) - le) / hu**2
    x = metric.x_of_u(u)
    q = x * x * metric.h_inverse_factor(x)

    idx = np.arange(nu * M).reshape(nu, M)
    a2 = a * a
    rows, cols, vals = [], [], []
    diag = (cp + cm)[:, None] * a2[None, :]

    rows.append(idx[:-1].ravel()); cols.append(idx[1:].ravel())
    vals.append((-cp[:-1, None] * a2[None, :]).ravel())
    rows.append(idx[1:].ravel()); cols.append(idx[:-1].ravel())
    vals.append((-cm[1:, None] * a2[None, :]).ravel())

    tor = np.arange(M).reshape((ny,) * n)
    for i in range(n):
        shift = np.zeros(n)
        shift[i] = hy / 2
        for sgn in (1, -1):
            nb = np.roll(tor, -sgn, axis=i).ravel()
            ratio = a / prof.alpha(y + sgn * shift)
            coef = q[:, None] * (ratio / hy**2)[None, :]
            diag = diag + coef
            rows.append(idx.ravel())
            cols.append((np.arange(nu)[:, None] * M + nb[None, :]).ravel())
            vals.append(-coef.ravel())
    rows.append(idx.ravel()); cols.append(idx.ravel()); vals.append(diag.ravel())
    N = nu * M
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(N, N))
    lw = (le[:, None] - np.log(a)[None, :]).ravel() + math.log(hu) + n * math.log(hy)

    separable = None
    if prof.is_constant:
        a2c = prof.a0**2
        off = -a2c * cp[:-1] * np.exp(0.5 * (le[:-1] - le[1:]))
        separable = {"diag": a2c * (cp + cm), "off": off, "q": q}
    return SparseOperator(mat, lw, grid, "dirichlet", separable)


def apply_to_samples(op: SparseOperator, f) -> np.ndarray:
    """``L f`` for a node vector (or an array shaped like the grid)."""
    f = np.asarray(f)
    if f.size != op.dimension:
        raise ValueError(f"sample vector has {f.size} entries, operator has {op.dimension}")
    return op.matrix @ f.reshape(-1)


def weighted_norm(v, weights, p: float) -> float:
    """Volume-weighted discrete ``l^p`` norm."""
    return float(np.sum(weights * np.abs(v) ** p) ** (1 / p))


def _torus_symbols(grid: CollarGrid) -> np.ndarray:
    k = np.arange(grid.ny)
    s1 = (4 / grid.h_y**2) * np.sin(np.pi * k / grid.ny) ** 2
    mu = np.zeros((grid.ny,) * grid.n)
    for i in range(grid.n):
        shape = [1] * grid.n
        shape[i] = grid.ny
        mu = mu + s1.reshape(shape)
    return mu.ravel()


def _separable_solver(op: SparseOperator, shift: float = 0.0):
    """Apply ``(S - shift)^{-1}`` via FFT on the torus and batched Thomas in ``u``."""
    g = op.grid
    d0, off, q = op.separable["diag"], op.separable["off"], op.separable["q"]
    mu = _torus_symbols(g)
    nu, M = g.nu, g.n_torus
    diag = d0[:, None] + q[:, None] * mu[None, :] - shift  # (nu, M)
    # forward elimination factors, reused for every solve
    cprime = np.empty((nu - 1, M))
    denom = np.empty((nu, M))
    denom[0] = diag[0]
    for j in range(nu - 1):
        cprime[j] = off[j] / denom[j]
        denom[j + 1] = diag[j + 1] - off[j] * cprime[j]
    axes = tuple(range(1, g.n + 1))

    def solve(b):
        B = np.fft.fftn(np.asarray(b).reshape(g.shape), axes=axes).reshape(nu, M)
        y = np.empty_like(B)
        y[0] = B[0] / denom[0]
        for j in range(1, nu):
            y[j] = (B[j] - off[j - 1] * y[j - 1]) / denom[j]
        for j in range(nu - 2, -1, -1):
            y[j] = y[j] - cprime[j] * y[j + 1]
        out = np.fft.ifftn(y.reshape(g.shape), axes=axes).real
        return out.ravel()

    return solve


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int


def smallest_eigenvalue(op: SparseOperator, tol: float = 1e-8, maxiter: int = 2000) -> EigenResult:
    """Bottom of the spectrum of the weighted-symmetric operator.

    Shift-invert Lanczos at 0 on ``S = W^{1/2} L W^{-1/2}``; the inverse is a
    sparse LU, or the FFT/tridiagonal solver when ``alpha`` is constant.
    The result is accepted only if ``|S v - mu v| < tol |mu|``.
    """
    S = op.symmetrized()
    N = S.shape[0]
    if op.separable is not None:
        solve = _separable_solver(op)
        # S_u in the separable form is already symmetrized; W in y is uniform
    else:
        lu = spla.splu(S.tocsc())
        solve = lu.solve
    counter = {"n": 0}

    def matvec(b):
        counter["n"] += 1
        return solve(b)

    opinv = spla.LinearOperator((N, N), matvec=matvec, dtype=float)
    v0 = np.ones(N)
    try:
        vals, vecs = spla.eigsh(S, k=1, sigma=0.0, which="LM", OPinv=opinv, v0=v0,
                                tol=tol * 1e-2, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}") from exc
    mu = float(vals[0])
    v = vecs[:, 0]
    res = float(np.linalg.norm(S @ v - mu * v) / (abs(mu) * np.linalg.norm(v)))
    if not res < tol:
        raise ConvergenceError(f"relative residual {res:.3g} exceeds {tol:g}")
    return EigenResult(mu, v, res, counter["n"])


def resolvent_probe(op: SparseOperator, z: complex, p: float, trials: int = 8,
                    seed: int = 0) -> float:
    """Lower bound for ``||(L - z)^{-1}||`` on weighted ``l^p`` from random probes."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    N = op.dimension
    A = (op.matrix - complex(z) * sp.identity(N, format="csr")).tocsc().astype(complex)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise ConvergenceError(f"z near discrete spectrum: {exc}") from exc
    scale = spla.norm(A, np.inf)
    w = op.weights()
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        r = rng.standard_normal(N) * w ** (-1 / p)
        v = lu.solve(r.astype(complex))
        if not np.all(np.isfinite(v)):
            raise ConvergenceError("z near discrete spectrum: solve produced non-finite values")
        best = max(best, weighted_norm(v, w, p) / weighted_norm(r, w, p))
    if best * scale > COND_LIMIT:
        raise ConvergenceError(f"z near discrete spectrum: amplification {best:.3g} is at roundoff level")
    return best
