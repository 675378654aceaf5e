"""Numpy implementations of the compiled kernels (import-time fallback)."""
import numpy as np


def symmetric_eigenvalues(mat):
    a = np.asarray(mat, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    return np.linalg.eigvalsh(a)


def max_eigenvalue(mat):
    return float(symmetric_eigenvalues(mat)[-1])


def bound_pairs(base, kdir, gdir, kappas, gammas):
    base = np.asarray(base, dtype=np.float64)
    kdir = np.asarray(kdir, dtype=np.float64)
    gdir = np.asarray(gdir, dtype=np.float64)
    ks = np.asarray(kappas, dtype=np.float64).ravel()
    gs = np.asarray(gammas, dtype=np.float64).ravel()
    if ks.shape != gs.shape:
        raise ValueError("kappas and gammas must have equal length")
    stack = (
        base[None, :, :, :]
        + ks[:, None, None, None] * kdir[None]
        - gs[:, None, None, None] * gdir[None]
    )
    return np.linalg.eigvalsh(stack)[..., -1].max(axis=1)
