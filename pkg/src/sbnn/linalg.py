"""Dense matrix helpers, a rank-revealing least-squares solver and
finite-difference gradients.

Matrices are plain 2-D ``float64`` numpy arrays (C order). Vectorization
of a weight matrix stacks columns: ``vec(W)[d + rows * h] == W[d, h]``,
i.e. ``W.reshape(-1, order="F")``.
"""

import numpy as np
import scipy.linalg as sla

from .errors import NumericError, ShapeError

RANK_TOL = 1e-12


def as_matrix(a, name="matrix"):
    """Return `a` as a finite 2-D float64 array, promoting 1-D input to a column."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {m.ndim}-D")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be non-empty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name} contains non-finite entries")
    return m


def vec(w):
    """Column-stacking vectorization."""
    return np.asarray(w).reshape(-1, order="F")


def unvec(v, rows, cols):
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape(rows, cols, order="F")


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise NumericError("matmul overflowed")
    return out


class COD:
    """Complete orthogonal decomposition ``A P = Q1 [L^T 0] Z^T`` of a dense matrix.

    Built from a column-pivoted QR; columns whose pivot falls below
    ``tol * |R[0, 0]|`` are treated as numerically dependent. The trailing
    block is discarded and the leading ``rank`` rows are re-factored so the
    null-space component can be dropped, which yields minimum-norm
    solutions.
    """

    def __init__(self, a, tol=RANK_TOL):
        a = as_matrix(a, "a")
        self.shape = a.shape
        q, r, piv = sla.qr(a, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        if diag.size == 0 or diag[0] == 0.0:
            rank = 0
        else:
            rank = int(np.count_nonzero(diag > tol * diag[0]))
        self.rank = rank
        self.perm = piv
        self.q1 = q[:, :rank]
        if rank:
            # r[:rank].T = z @ l  with z (n x rank) orthonormal, l upper triangular
            self.z, self.l = sla.qr(r[:rank].T, mode="economic")
        else:
            self.z = np.zeros((a.shape[1], 0))
            self.l = np.zeros((0, 0))

    def solve(self, y):
        """Minimum-norm least-squares solution of ``A w = y`` (y may hold several columns)."""
        y = np.asarray(y, dtype=np.float64)
        n = self.shape[1]
        out = np.zeros((n,) + y.shape[1:])
        if self.rank == 0:
            return out
        c = self.q1.T @ y
        u = sla.solve_triangular(self.l, c, trans="T", lower=False)
        out[self.perm] = self.z @ u
        return out

    def solve_transpose(self, v):
        """Minimum-norm least-squares solution of ``A^T x = v``; equals ``pinv(A)^T v``."""
        v = np.asarray(v, dtype=np.float64)
        m = self.shape[0]
        if self.rank == 0:
            return np.zeros((m,) + v.shape[1:])
        zt_v = self.z.T @ v[self.perm]
        u = sla.solve_triangular(self.l, zt_v, lower=False)
        return self.q1 @ u


def least_squares(a, y):
    """Minimize ``||y - a w||_2`` over `w`.

    Parameters
    ----------
    a : (N, K) array
    y : (N, 1) array

    Returns
    -------
    (K, 1) array
        The minimizer; when `a` is rank deficient the one of smallest norm.
        An all-zero `a` gives the zero vector.

    Raises
    ------
    NumericError
        If the minimizer is not representable (e.g. subnormal `a`).
    """
    a = as_matrix(a, "a")
    y = as_matrix(y, "y")
    if y.shape != (a.shape[0], 1):
        raise ShapeError(f"y must have shape ({a.shape[0]}, 1), got {y.shape}")
    with np.errstate(all="ignore"):
        w = COD(a).solve(y)
    if not np.all(np.isfinite(w)):
        raise NumericError("least-squares solution overflowed")
    return w


def pinv(a):
    """Moore-Penrose pseudoinverse via :class:`COD` at the same rank threshold."""
    a = as_matrix(a, "a")
    return COD(a).solve(np.eye(a.shape[0]))


def finite_diff_gradient(f, at, step=1e-5):
    """Central-difference gradient of a scalar function of a matrix.

    Each entry is perturbed independently by ``+-step``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.array(at, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        fp = float(f(x.copy()))
        x[idx] = orig - step
        fm = float(f(x.copy()))
        x[idx] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value when perturbing entry {idx}")
        grad[idx] = (fp - fm) / (2.0 * step)
    return grad


def finite_diff_jacobian(g, at, step=1e-6):
    """Central-difference Jacobian of a matrix-valued map.

    Returns an array of shape ``(g(at).size, at.size)``; outputs are
    flattened in C order, inputs follow the column-stacking order of
    :func:`vec`.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.array(at, dtype=np.float64)
    base = np.asarray(g(x.copy()))
    jac = np.zeros((base.size, x.size))
    for col, idx in enumerate(zip(*np.unravel_index(np.arange(x.size), x.shape, order="F"))):
        orig = x[idx]
        x[idx] = orig + step
        gp = np.asarray(g(x.copy()), dtype=np.float64).ravel()
        x[idx] = orig - step
        gm = np.asarray(g(x.copy()), dtype=np.float64).ravel()
        x[idx] = orig
        if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
            raise NumericError(f"non-finite function value when perturbing entry {idx}")
        jac[:, col] = (gp - gm) / (2.0 * step)
    return jac
