"""Small dense linear-algebra kernels used by the stability analysis.

Everything here works on tiny matrices (n = 4 in practice), so the
routines favour clarity and accuracy over asymptotic speed.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError, UnstableSystemError

SYMMETRY_TOL = 1e-9
_EPS = np.finfo(float).eps


def _as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def check_symmetric(m, tol: float = SYMMETRY_TOL) -> np.ndarray:
    a = _as_square(m)
    scale = max(1.0, float(np.max(np.abs(a))))
    asym = float(np.max(np.abs(a - a.T)))
    if asym > tol * scale:
        raise ValueError(f"matrix is not symmetric (max |m - m^T| = {asym:.3e})")
    return a


def jacobi_eigenvalues(m, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Returns the eigenvalues in ascending order. Each sweep annihilates every
    off-diagonal pair once; iteration stops when the off-diagonal mass is
    negligible relative to the matrix norm (quadratic convergence makes this
    a handful of sweeps for n = 4).
    """
    a0 = check_symmetric(m)
    n = a0.shape[0]
    # symmetrize exactly so rounding in the input cannot bias the result
    a = [[0.5 * (a0[i, j] + a0[j, i]) for j in range(n)] for i in range(n)]
    norm2 = sum(a[i][j] ** 2 for i in range(n) for j in range(n))
    if norm2 == 0.0:
        return np.zeros(n)
    thresh = (_EPS * _EPS) * norm2 * 1e-2

    for _ in range(max_sweeps):
        off2 = sum(a[i][j] ** 2 for i in range(n) for j in range(n) if i != j)
        if off2 <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                if abs(apq) < _EPS * 1e-3 * (abs(a[p][p]) + abs(a[q][q])):
                    a[p][q] = a[q][p] = 0.0     # below rounding of the diagonal
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                a[p][p] -= t * apq
                a[q][q] += t * apq
                a[p][q] = a[q][p] = 0.0
                for r in range(n):
                    if r == p or r == q:
                        continue
                    arp, arq = a[r][p], a[r][q]
                    a[r][p] = a[p][r] = c * arp - s * arq
                    a[r][q] = a[q][r] = s * arp + c * arq
    else:
        raise NumericalError("Jacobi iteration did not converge")

    return np.sort(np.array([a[i][i] for i in range(n)]))


def max_eigenvalue_symmetric(m) -> float:
    """Largest eigenvalue of a symmetric matrix (asymmetric input is rejected)."""
    return float(jacobi_eigenvalues(m)[-1])


def characteristic_polynomial(m) -> np.ndarray:
    """Monic characteristic polynomial coefficients, highest degree first.

    Faddeev-LeVerrier recursion; exact in exact arithmetic and well behaved
    in floating point for the 4x4 matrices this package deals with.
    """
    a = _as_square(m)
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    mk = np.zeros_like(a)
    eye = np.eye(n)
    for k in range(1, n + 1):
        mk = a @ mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(a @ mk) / k
    return coeffs


def routh_first_column(coeffs) -> np.ndarray:
    """First column of the Routh array for a polynomial (highest degree first)."""
    c = np.asarray(coeffs, dtype=float)
    deg = len(c) - 1
    width = deg // 2 + 1
    rows = [np.zeros(width), np.zeros(width)]
    rows[0][: len(c[0::2])] = c[0::2]
    rows[1][: len(c[1::2])] = c[1::2]
    for _ in range(deg - 1):
        upper, lower = rows[-2], rows[-1]
        if lower[0] == 0.0:
            # zero pivot: the polynomial has roots on or right of the axis
            rows.append(np.zeros(width))
            break
        new = np.zeros(width)
        for j in range(width - 1):
            new[j] = (lower[0] * upper[j + 1] - upper[0] * lower[j + 1]) / lower[0]
        rows.append(new)
    return np.array([r[0] for r in rows[: deg + 1]])


def is_hurwitz(m) -> bool:
    """True iff every eigenvalue of ``m`` has strictly negative real part.

    Decided by the Routh-Hurwitz criterion on the characteristic polynomial,
    so no nonsymmetric eigensolver is needed.
    """
    first = routh_first_column(characteristic_polynomial(m))
    return bool(np.all(first > 0.0))


def lyapunov_residual(c, a) -> float:
    """Infinity norm of C A + A^T C + I."""
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    r = c @ a + a.T @ c + np.eye(a.shape[0])
    return float(np.max(np.sum(np.abs(r), axis=1)))


def solve_lyapunov(a) -> np.ndarray:
    """Symmetric solution C of C A + A^T C = -I for a Hurwitz matrix ``a``.

    The matrix equation is vectorized over the n(n+1)/2 independent entries
    of C (10 unknowns for n = 4) and solved directly.
    """
    a = _as_square(a)
    n = a.shape[0]
    if not is_hurwitz(a):
        raise UnstableSystemError("M1 + M2 has an eigenvalue with non-negative real part")

    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    index = {p: k for k, p in enumerate(pairs)}

    def var(i: int, j: int) -> int:
        return index[(i, j) if i <= j else (j, i)]

    m = len(pairs)
    lhs = np.zeros((m, m))
    rhs = np.zeros(m)
    for row, (i, j) in enumerate(pairs):
        # (C A)_ij = sum_k C_ik A_kj ; (A^T C)_ij = sum_k A_ki C_kj
        for k in range(n):
            lhs[row, var(i, k)] += a[k, j]
            lhs[row, var(k, j)] += a[k, i]
        rhs[row] = -1.0 if i == j else 0.0

    try:
        sol = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise UnstableSystemError("singular Lyapunov system") from exc

    c = np.empty((n, n))
    for (i, j), k in index.items():
        c[i, j] = c[j, i] = sol[k]
    if jacobi_eigenvalues(c)[0] <= 0.0:
        raise UnstableSystemError("Lyapunov solution is not positive definite")
    return c
