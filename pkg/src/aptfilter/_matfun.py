"""Dense matrix exponential for possibly non-normal generators."""
from __future__ import annotations

import numpy as np
import scipy.linalg

_COND_LIMIT = 1e8


def expm_checked(matrix: np.ndarray) -> np.ndarray:
    """exp(matrix) by diagonalization, falling back to Pade when ill-posed.

    Non-Hermitian generators are diagonalized with numpy.linalg.eig; if the
    eigenvector matrix is close to singular (condition number above 1e8, as
    happens at exceptional points) the result of V exp(D) V^-1 is unreliable
    and scipy.linalg.expm is used instead.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    try:
        w, v = np.linalg.eig(a)
        cond = np.linalg.cond(v)
    except np.linalg.LinAlgError:
        return scipy.linalg.expm(a)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        return scipy.linalg.expm(a)
    return v @ (np.exp(w)[:, None] * np.linalg.inv(v))
