"""Symmetric indefinite factorization of the primal-dual system with inertia control."""

from __future__ import annotations

import numpy as np
import qdldl
import scipy.sparse as sp
from scipy.linalg import lapack

from ..errors import LinearSolveFailure


def block_inertia(ldl: np.ndarray, ipiv: np.ndarray) -> tuple[int, int, int]:
    """(positive, negative, zero) eigenvalue counts of D from a lower Bunch-Kaufman factorization."""
    n = ldl.shape[0]
    pos = neg = zero = 0
    k = 0
    while k < n:
        if ipiv[k] > 0:
            d = ldl[k, k]
            if d > 0:
                pos += 1
            elif d < 0:
                neg += 1
            else:
                zero += 1
            k += 1
        else:
            a, b, c = ldl[k, k], ldl[k + 1, k], ldl[k + 1, k + 1]
            det = a * c - b * b
            if det < 0:
                pos += 1
                neg += 1
            elif det > 0:
                if a + c > 0:
                    pos += 2
                else:
                    neg += 2
            else:
                zero += 1
                if a + c > 0:
                    pos += 1
                elif a + c < 0:
                    neg += 1
                else:
                    zero += 1
            k += 2
    return pos, neg, zero


class KktFactor:
    """LDL^T of ``[[W + D_w, A^T], [A, -delta_c I]]`` via LAPACK ``dsytrf``."""

    def __init__(self):
        self._lwork: dict[int, int] = {}
        self.matrix: np.ndarray | None = None
        self.ldl = None
        self.ipiv = None

    def factor(self, K: np.ndarray) -> tuple[int, int, int]:
        n = K.shape[0]
        if n not in self._lwork:
            self._lwork[n] = max(int(lapack.dsytrf_lwork(n, lower=1)[0]), n)
        ldl, ipiv, info = lapack.dsytrf(K, lower=1, lwork=self._lwork[n])
        if info < 0:
            raise LinearSolveFailure(f"dsytrf rejected argument {-info}")
        self.matrix, self.ldl, self.ipiv = K, ldl, ipiv
        if not np.all(np.isfinite(np.diag(ldl))):
            return 0, 0, n
        return block_inertia(ldl, ipiv)

    def solve(self, rhs: np.ndarray, refine: int = 2) -> np.ndarray:
        x, info = lapack.dsytrs(self.ldl, self.ipiv, rhs, lower=1)
        if info != 0:
            raise LinearSolveFailure(f"dsytrs failed with info={info}")
        K = self.matrix
        for _ in range(refine):
            r = rhs - K @ x
            if not np.all(np.isfinite(r)):
                break
            dx, _ = lapack.dsytrs(self.ldl, self.ipiv, r, lower=1)
            x = x + dx
        if not np.all(np.isfinite(x)):
            raise LinearSolveFailure("non-finite solution of the primal-dual system")
        return x


class SparseKktFactor:
    """Sparse LDL^T (AMD ordering, no pivoting) of the lower triangle of ``K``.

    Without pivoting the factorization exists for quasi-definite matrices, which
    is what the regularization search drives towards; a breakdown is reported as
    wrong inertia so the caller regularizes further.  Inertia comes from the
    signs of D (Sylvester's law).  The sparsity pattern only grows, so the
    symbolic analysis is reused across iterations.
    """

    def __init__(self):
        self.rows = np.zeros(0, dtype=np.intp)
        self.cols = np.zeros(0, dtype=np.intp)
        self.size = -1
        self._solver = None
        self.matrix = None

    def _extend_pattern(self, n, rows, cols):
        if n != self.size:
            self.rows = np.zeros(0, dtype=np.intp)
            self.cols = np.zeros(0, dtype=np.intp)
            self.size = n
            self._solver = None
        keys = np.union1d(self.rows * n + self.cols, rows * n + cols)
        keys = np.union1d(keys, np.arange(n) * (n + 1))  # diagonal always present
        if len(keys) != len(self.rows):
            self.rows, self.cols = keys // n, keys % n
            self._solver = None

    def factor_lower(self, n, rows, cols, vals) -> tuple[int, int, int]:
        """Factor the symmetric matrix whose lower triangle is given as coordinates.

        Every listed coordinate is kept structurally, even with a zero value.
        """
        self._extend_pattern(n, rows, cols)
        data = np.zeros(len(self.rows))
        np.add.at(data, np.searchsorted(self.rows * n + self.cols, rows * n + cols), vals)
        upper = sp.csc_matrix((data, (self.cols, self.rows)), shape=(n, n))
        strict = sp.csc_matrix((np.where(self.rows != self.cols, data, 0.0), (self.rows, self.cols)), shape=(n, n))
        self.matrix = (upper + strict).tocsr()
        try:
            if self._solver is None:
                self._solver = qdldl.Solver(upper, upper=True)
            else:
                self._solver.update(upper, upper=True)
            d = self._solver.factors()[1]
        except RuntimeError:
            self._solver = None
            return 0, 0, n
        if not np.all(np.isfinite(d)):
            return 0, 0, n
        return int(np.sum(d > 0)), int(np.sum(d < 0)), int(np.sum(d == 0))

    def solve(self, rhs: np.ndarray, refine: int = 2) -> np.ndarray:
        if self._solver is None:
            raise LinearSolveFailure("no valid factorization to solve with")
        x = self._solver.solve(rhs)
        K = self.matrix
        for _ in range(refine):
            r = rhs - K @ x
            if not np.all(np.isfinite(r)):
                break
            x = x + self._solver.solve(r)
        if not np.all(np.isfinite(x)):
            raise LinearSolveFailure("non-finite solution of the primal-dual system")
        return x


DENSE_LIMIT = 400  # primal-dual systems up to this size use LAPACK


class InertiaCorrector:
    """Primal regularization search: find the smallest ``delta_w`` giving inertia (n, m, 0)."""

    first = 1e-4
    min_delta = 1e-20
    max_delta = 1e40
    grow_first = 100.0
    grow = 8.0
    shrink = 1.0 / 3.0

    def __init__(self, backend: str = "auto"):
        if backend not in ("auto", "dense", "sparse"):
            raise ValueError(f"unknown linear solver backend {backend!r}")
        self.backend = backend
        self.last = 0.0
        self.dense = KktFactor()
        self.sparse = SparseKktFactor()
        self.factor = self.dense
        self._exact = None
        self._shift = 0.0

    def factorize(self, hess_block: np.ndarray, jac: np.ndarray, delta_c: float):
        """Factor with the least primal shift that gives the right inertia.

        ``hess_block`` is ``W + Sigma`` (n x n), ``jac`` is A (m x n).
        Returns ``(delta_w, n_factorizations)``.
        """
        n, m = hess_block.shape[0], jac.shape[0]
        use_sparse = self.backend == "sparse" or (self.backend == "auto" and n + m > DENSE_LIMIT)
        attempt = self._sparse_attempt(hess_block, jac, delta_c) if use_sparse else self._dense_attempt(hess_block, jac, delta_c)
        self.factor = self.sparse if use_sparse else self.dense
        self._exact = (hess_block, jac)

        count = 1
        if attempt(0.0):
            self._shift = 0.0
            return 0.0, count
        dw = self.first if self.last == 0.0 else max(self.min_delta, self.shrink * self.last)
        while True:
            count += 1
            if attempt(dw):
                self.last = dw
                self._shift = dw
                return dw, count
            dw *= self.grow_first if self.last == 0.0 else self.grow
            if dw > self.max_delta:
                raise LinearSolveFailure("primal-dual matrix has wrong inertia after maximal regularization")

    def _dense_attempt(self, hess_block, jac, delta_c):
        n, m = hess_block.shape[0], jac.shape[0]
        K = np.zeros((n + m, n + m))
        K[:n, :n] = hess_block
        K[n:, :n] = jac
        K[:n, n:] = jac.T
        K[n:, n:] = -delta_c * np.eye(m)
        diag = np.arange(n)
        base = hess_block[diag, diag].copy()

        def attempt(dw):
            K[diag, diag] = base + dw
            return self.dense.factor(K) == (n, m, 0)

        return attempt

    def _sparse_attempt(self, hess_block, jac, delta_c):
        n, m = hess_block.shape[0], jac.shape[0]
        hr, hc = np.nonzero(np.tril(hess_block, -1))
        jr, jc = np.nonzero(jac)
        diag_n, diag_m = np.arange(n), np.arange(m)
        rows = np.concatenate([hr, jr + n, diag_n, n + diag_m])
        cols = np.concatenate([hc, jc, diag_n, n + diag_m])
        fixed = np.concatenate([hess_block[hr, hc], jac[jr, jc]])
        base = hess_block[diag_n, diag_n]
        lower_m = np.full(m, -delta_c)

        def attempt(dw):
            vals = np.concatenate([fixed, base + dw, lower_m])
            return self.sparse.factor_lower(n + m, rows, cols, vals) == (n, m, 0)

        return attempt

    def solve(self, rhs, refine: int = 10, rtol: float = 1e-12):
        """Solve with the regularized factors, refining against the system without ``delta_c``.

        The constraint regularization is only there to make the factorization
        exist; left in the solution it would stop the step from reducing the
        constraint residual whenever the multipliers are large.
        """
        hess_block, jac = self._exact
        n = hess_block.shape[0]
        shift = self._shift

        def apply(v):
            top = hess_block @ v[:n] + shift * v[:n] + jac.T @ v[n:]
            return np.concatenate([top, jac @ v[:n]])

        x = self.factor.solve(rhs, refine=0)
        # measure each block against its own right-hand side: the constraint
        # residual is often many orders below the gradient and must still be met
        s_top = float(np.max(np.abs(rhs[:n]), initial=0.0))
        s_bot = float(np.max(np.abs(rhs[n:]), initial=0.0))
        floor = 1e-300 + 1e-16 * max(s_top, s_bot)
        s_top, s_bot = max(s_top, floor), max(s_bot, floor)
        # near-singular systems make refinement diverge after a few sweeps: keep the best iterate
        best, best_res = x, np.inf
        for _ in range(refine + 1):
            r = rhs - apply(x)
            res = max(float(np.max(np.abs(r[:n]), initial=0.0)) / s_top, float(np.max(np.abs(r[n:]), initial=0.0)) / s_bot)
            if not np.isfinite(res):
                break
            if res < best_res:
                best, best_res = x, res
            if res <= rtol or res > 1e3 * best_res:
                break
            x = x + self.factor.solve(r, refine=0)
        x = best
        if not np.all(np.isfinite(x)):
            raise LinearSolveFailure("non-finite solution of the primal-dual system")
        return x
