"""Hermitian eigenvalue helpers shared by the solver and the builders."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

# Matrices up to this size go straight to numpy; LAPACK call overhead dominates below it.
_SMALL = 48
_MAX_BAND = 8
_CHUNK = 256


def bandwidth(a: np.ndarray, limit: int = _MAX_BAND) -> int | None:
    """Lower bandwidth of a square matrix if it is at most `limit`, else None."""
    n = a.shape[0]
    if n <= 2 * limit + 2:
        return None
    # cheap rejection for dense matrices before the full scan
    if np.any(a[limit + 1 :, 0]) or np.any(a[-1, : n - limit - 1]):
        return None
    # scan below the band in row chunks so no full-size temporary is made
    for start in range(limit + 1, n, _CHUNK):
        if np.any(np.tril(a[start : start + _CHUNK, :start], start - limit - 1)):
            return None
    for b in range(limit, 0, -1):
        if np.any(np.diagonal(a, -b)):
            return b
    return 0


def _to_lower_band(a: np.ndarray, b: int) -> np.ndarray:
    n = a.shape[0]
    band = np.zeros((b + 1, n), dtype=a.dtype)
    for i in range(b + 1):
        band[i, : n - i] = np.diagonal(a, -i)
    return band


def eigvalsh(a: np.ndarray, lo: int | None = None, hi: int | None = None) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix, optionally only indices lo..hi (inclusive).

    Banded inputs (e.g. finite-difference channels stored densely) are routed
    to the banded LAPACK driver.
    """
    n = a.shape[0]
    if lo is None:
        lo, hi = 0, n - 1
    if n <= _SMALL:
        return np.linalg.eigvalsh(a)[lo : hi + 1]
    b = bandwidth(a)
    if b is not None:
        if b == 0:
            return np.sort(np.real(np.diagonal(a)))[lo : hi + 1]
        band = _to_lower_band(a, b)
        if lo == 0 and hi == n - 1:
            return sla.eigvals_banded(band, lower=True)
        return sla.eigvals_banded(band, lower=True, select="i", select_range=(lo, hi))
    if lo == 0 and hi == n - 1:
        return np.linalg.eigvalsh(a)
    return sla.eigh(a, eigvals_only=True, subset_by_index=[lo, hi], driver="evr")


def block_spectrum(app: np.ndarray, apm: np.ndarray, amm: np.ndarray) -> np.ndarray:
    """Ascending spectrum of [[app, apm], [apm^H, amm]], using the blocks when apm = 0."""
    if not np.any(apm):
        return np.sort(np.concatenate([eigvalsh(app), eigvalsh(amm)]))
    return eigvalsh(np.block([[app, apm], [apm.conj().T, amm]]))


def extreme_eigenvalue(a: np.ndarray, which: str) -> float:
    n = a.shape[0]
    idx = 0 if which == "min" else n - 1
    return float(eigvalsh(a, idx, idx)[0])


def hermitian_defect(a: np.ndarray) -> float:
    """max |a - a^H| relative to max(1, max |a|)."""
    if a.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(a))))
    return float(np.max(np.abs(a - a.conj().T))) / scale
