"""Proximal and shrinkage operators.

Everything here is a pure function: scalar soft thresholding, its
entrywise matrix form, the Frobenius-norm block shrinkage used for group
sparsity, the composed hierarchical prox (entrywise l1 followed by group
shrinkage), and singular value thresholding for the nuclear norm.
"""

import numpy as np

from .errors import InvalidInputError, NumericError

# Full SVDs only. Inputs larger than this on the short side are refused
# rather than silently handed to a truncated/randomized backend.
SVD_DIM_CAP = 4096


def _check_threshold(t):
    t = float(t)
    if not np.isfinite(t) or t < 0.0:
        raise InvalidInputError(f"threshold must be finite and >= 0, got {t}")
    return t


def soft_threshold(v, t):
    """Scalar soft threshold ``sign(v) * max(|v| - t, 0)``."""
    t = _check_threshold(t)
    v = float(v)
    return float(np.sign(v) * max(abs(v) - t, 0.0))


def soft_threshold_matrix(m, t):
    """Entrywise soft threshold of a matrix; shape is preserved.

    Proximal operator of ``t * ||.||_1`` with the entrywise l1 matrix norm.
    """
    t = _check_threshold(t)
    m = np.asarray(m, dtype=float)
    return np.sign(m) * np.maximum(np.abs(m) - t, 0.0)


def group_soft_threshold(block, t):
    """Frobenius-norm shrinkage of a block: ``block * max(1 - t/||block||_F, 0)``.

    Proximal operator of ``t * ||.||_F``. Returns the zero block when
    ``||block||_F <= t`` (including the all-zero block, without dividing).
    The output is always a nonnegative scalar multiple of the input, so the
    block direction is preserved. On a 1x1 block this reduces to the scalar
    soft threshold.
    """
    t = _check_threshold(t)
    block = np.asarray(block, dtype=float)
    nrm = float(np.linalg.norm(block))
    if nrm <= t:
        return np.zeros_like(block)
    return block * (1.0 - t / nrm)


def prox_hier(v, t1, t2, partition):
    """Prox of the hierarchical penalty ``t1*||Z||_1 + t2*sum_G ||Z[G]||_F``.

    Solves ``argmin_Z 0.5*||Z - v||_F^2 + t1*||Z||_1 + t2*sum_G ||Z[G]||_F``
    where each group ``G`` selects a block of rows of ``v``. For this
    non-overlapping row partition the exact solution is the composition:
    entrywise soft threshold by ``t1``, then per-group Frobenius shrinkage
    by ``t2``.

    Parameters
    ----------
    v : (n, tau) array
    t1, t2 : float
        Nonnegative thresholds for the entrywise and group terms.
    partition : GroupPartition
        Partition of the ``n`` row indices.
    """
    t1 = _check_threshold(t1)
    t2 = _check_threshold(t2)
    v = np.asarray(v, dtype=float)
    if v.ndim != 2:
        raise InvalidInputError(f"expected a 2-d array, got ndim={v.ndim}")
    if partition.n != v.shape[0]:
        raise InvalidInputError(
            f"partition covers {partition.n} rows but the input has {v.shape[0]}"
        )
    z = soft_threshold_matrix(v, t1)
    if t2 > 0.0:
        for g in partition.groups:
            z[g] = group_soft_threshold(z[g], t2)
    return z


def _svt(m, t):
    """Singular value thresholding; also returns the shrunk singular values."""
    t = _check_threshold(t)
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise InvalidInputError(f"expected a 2-d array, got ndim={m.ndim}")
    if min(m.shape) > SVD_DIM_CAP:
        raise InvalidInputError(
            f"matrix short side {min(m.shape)} exceeds the full-SVD cap {SVD_DIM_CAP}"
        )
    if not np.all(np.isfinite(m)):
        raise NumericError("cannot compute the SVD of a matrix with non-finite entries")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - backend dependent
        raise NumericError(f"SVD failed: {exc}") from exc
    s = np.maximum(s - t, 0.0)
    return (u * s) @ vt, s


def svt(m, t):
    """Singular value thresholding ``U * max(S - t, 0) * V^T``.

    Proximal operator of ``t * ||.||_*`` (nuclear norm). The output's
    singular values are exactly ``max(sigma_i - t, 0)``, so no singular
    value ever grows and the rank never increases. ``svt(m, 0)`` returns
    ``m`` up to SVD reconstruction error.
    """
    out, _ = _svt(m, t)
    return out
