"""Dense matrix exponential and the phi_1, phi_2 functions.

The matrix exponential uses diagonal Pade approximants (degrees 3 to 13) with
scaling and squaring, choosing the degree and the number of squarings from the
1-norm of the argument.  The phi-functions

    phi_1(X) = int_0^1 e^{(1-t)X} dt,    phi_2(X) = int_0^1 e^{(1-t)X} t dt

are read off the exponential of an augmented block-triangular matrix, which
stays well defined for singular or ill-conditioned X.  Real scalars take a
closed-form fast path.
"""
from __future__ import annotations

import math
from numbers import Real

import numpy as np

__all__ = [
    "expm",
    "phi1",
    "phi2",
    "phi_functions",
    "phi_action",
]

# Pade coefficients b_0..b_m and the 1-norm bounds theta_m below which degree m
# reaches unit roundoff in double precision.
_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

SMALL_NORM = 1e-8
SCALAR_SERIES_CUTOFF = 1e-5


def _check_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _is_scalar(a) -> bool:
    return isinstance(a, Real) or (isinstance(a, np.ndarray) and a.ndim == 0)


def _check_scalar(a) -> float:
    a = float(a)
    if not math.isfinite(a):
        raise ValueError(f"non-finite argument {a}")
    return a


def _pade_low(A: np.ndarray, m: int, ident: np.ndarray):
    b = _PADE_COEFFS[m]
    A2 = A @ A
    U = b[1] * ident
    V = b[0] * ident
    Apow = ident
    for j in range(1, m // 2 + 1):
        Apow = Apow @ A2
        U = U + b[2 * j + 1] * Apow
        V = V + b[2 * j] * Apow
    return A @ U, V


def _pade13(A: np.ndarray, ident: np.ndarray):
    b = _PADE_COEFFS[13]
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return U, V


def _expm_dense(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    ident = np.eye(n)
    norm = np.linalg.norm(A, 1)
    if norm == 0.0:
        return ident
    for m in (3, 5, 7, 9):
        if norm <= _THETA[m]:
            U, V = _pade_low(A, m, ident)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(math.ceil(math.log2(norm / _THETA[13]))))
    As = A / 2.0**s
    U, V = _pade13(As, ident)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


def expm(A):
    """Matrix exponential of a real square matrix (or of a real scalar)."""
    if _is_scalar(A):
        return math.exp(_check_scalar(A))
    return _expm_dense(_check_square(A))


def _phi1_scalar(x: float) -> float:
    if abs(x) < SCALAR_SERIES_CUTOFF:
        return 1.0 + x / 2.0 + x * x / 6.0 + x**3 / 24.0
    return math.expm1(x) / x


def _phi2_scalar(x: float) -> float:
    # (e^x - 1 - x)/x^2 cancels badly for moderate |x|; sum the series there.
    if abs(x) < 0.5:
        term = 0.5
        total = term
        k = 2
        while abs(term) > 1e-18 * abs(total):
            term *= x / (k + 1)
            total += term
            k += 1
        return total
    return (math.expm1(x) - x) / (x * x)


def phi_functions(A):
    """Return ``(e^A, phi_1(A), phi_2(A))`` computed jointly.

    The exponential of the block matrix ``[[A, I, 0], [0, 0, I], [0, 0, 0]]``
    holds the three functions in its first block row.
    """
    if _is_scalar(A):
        x = _check_scalar(A)
        return math.exp(x), _phi1_scalar(x), _phi2_scalar(x)
    A = _check_square(A)
    n = A.shape[0]
    ident = np.eye(n)
    if np.linalg.norm(A, 1) < SMALL_NORM:
        A2 = A @ A
        return (
            ident + A + A2 / 2.0,
            ident + A / 2.0 + A2 / 6.0,
            ident / 2.0 + A / 6.0 + A2 / 24.0,
        )
    big = np.zeros((3 * n, 3 * n))
    big[:n, :n] = A
    big[:n, n:2 * n] = ident
    big[n:2 * n, 2 * n:] = ident
    E = _expm_dense(big)
    return E[:n, :n].copy(), E[:n, n:2 * n].copy(), E[:n, 2 * n:].copy()


def phi1(A):
    """phi_1(A) = int_0^1 e^{(1-t)A} dt, so that A phi_1(A) = e^A - I."""
    return phi_functions(A)[1]


def phi2(A):
    """phi_2(A) = int_0^1 e^{(1-t)A} t dt, so that A phi_2(A) = phi_1(A) - I."""
    return phi_functions(A)[2]


def phi_action(A, b1, b2=None) -> np.ndarray:
    """Compute ``phi_1(A) @ b1 + phi_2(A) @ b2`` without forming phi_k(A).

    Uses one exponential of order ``n + 2``: the last column of the top-right
    block of ``exp([[A, b2, b1], [0, 0, 1], [0, 0, 0]])`` is the requested sum.
    """
    A = _check_square(A)
    n = A.shape[0]
    b1 = np.asarray(b1, dtype=float)
    b2 = np.zeros(n) if b2 is None else np.asarray(b2, dtype=float)
    if b1.shape != (n,) or b2.shape != (n,):
        raise ValueError("vector lengths must match the matrix order")
    if n == 1:
        a = float(A[0, 0])
        return _phi1_scalar(a) * b1 + _phi2_scalar(a) * b2
    if np.linalg.norm(A, 1) < SMALL_NORM:
        return (b1 + A @ b1 / 2.0 + A @ (A @ b1) / 6.0
                + b2 / 2.0 + A @ b2 / 6.0 + A @ (A @ b2) / 24.0)
    aug = np.zeros((n + 2, n + 2))
    aug[:n, :n] = A
    aug[:n, n] = b2
    aug[:n, n + 1] = b1
    aug[n, n + 1] = 1.0
    return _expm_dense(aug)[:n, n + 1].copy()
