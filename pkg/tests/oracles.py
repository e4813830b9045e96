"""Independent reference computations used to freeze expected values."""
import numpy as np


def dense_hill_spectrum(q, size=128):
    """Periodic eigenvalues on [0, 2] from a Fourier truncation of -d^2/dx^2 + q.

    Basis exp(i pi k x), |k| <= size; the potential couples k to k + 2n.
    """
    k = np.arange(-size, size + 1)
    H = np.diag((np.pi * k) ** 2).astype(complex)
    H += q.mean * np.eye(k.size)
    for n in range(1, q.K + 1):
        qhat = 0.5 * (q.cos[n - 1] - 1j * q.sin[n - 1])
        off = np.arange(k.size - 2 * n)
        H[off + 2 * n, off] += qhat
        H[off, off + 2 * n] += np.conj(qhat)
    return np.linalg.eigvalsh(H)


def dense_gaps(q, K, size=128):
    lam = dense_hill_spectrum(q, size)
    return lam[2 : 2 * K + 1 : 2] - lam[1 : 2 * K : 2], lam[: 2 * K + 1]
