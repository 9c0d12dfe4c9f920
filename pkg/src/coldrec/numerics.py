"""Small dense linear-algebra core: ridge solves, triplet scoring, vector similarity.

All factor updates in the models module reduce to `ridge_solve`, and both
ranking and the diversity metric reduce to `score` / `cosine_distance`, so
these kernels are kept in one place with strict input validation.
"""

from __future__ import annotations

import struct

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve

from .errors import FormatError, SingularSystemError

MATRIX_MAGIC = b"CRMX"


def ridge_solve(design: np.ndarray, targets: np.ndarray, ridge: float) -> np.ndarray:
    """Solve the ridge problem min_W ||design @ W - targets||_F^2 + ridge * ||W||_F^2.

    Returns W = (G'G + ridge*I)^-1 G'R via a Cholesky factorization of the
    normal matrix. `design` may be dense (n x k) or scipy-sparse; `targets`
    may be (n,) or (n x d), and W comes back with the matching shape.

    On a Cholesky failure with ridge > 0 the solve is retried once with a
    trace-scaled jitter of 1e-10 added to the diagonal (near-singular normal
    matrices from sparse feature blocks); at ridge = 0 a failure raises
    SingularSystemError immediately.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0, got %r" % ridge)
    targets = np.asarray(targets, dtype=np.float64)
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets contain non-finite values")
    if sparse.issparse(design):
        if not np.all(np.isfinite(design.data)):
            raise ValueError("design contains non-finite values")
        if design.shape[0] != targets.shape[0]:
            raise ValueError("design and targets row counts differ")
        gram = np.asarray((design.T @ design).todense(), dtype=np.float64)
        rhs = np.asarray(design.T @ targets, dtype=np.float64)
    else:
        design = np.asarray(design, dtype=np.float64)
        if not np.all(np.isfinite(design)):
            raise ValueError("design contains non-finite values")
        if design.shape[0] != targets.shape[0]:
            raise ValueError("design and targets row counts differ")
        gram = design.T @ design
        rhs = design.T @ targets

    k = gram.shape[0]
    system = gram + ridge * np.eye(k)
    try:
        factor = cho_factor(system, lower=True)
    except np.linalg.LinAlgError:
        if ridge <= 0:
            raise SingularSystemError(
                "normal matrix is singular and no ridge was applied"
            ) from None
        jitter = 1e-10 * np.trace(gram) / max(k, 1)
        try:
            factor = cho_factor(system + jitter * np.eye(k), lower=True)
        except np.linalg.LinAlgError:
            raise SingularSystemError(
                "normal matrix stayed singular after jitter retry"
            ) from None
    return cho_solve(factor, rhs)


def score(user_vec, last_vec, next_vec) -> float:
    """Triplet affinity: the symmetric sum of the three pairwise inner products."""
    u = np.asarray(user_vec, dtype=np.float64)
    x = np.asarray(last_vec, dtype=np.float64)
    y = np.asarray(next_vec, dtype=np.float64)
    if not (u.shape == x.shape == y.shape) or u.ndim != 1:
        raise ValueError(
            "score expects three 1-d vectors of equal length, got shapes %s %s %s"
            % (u.shape, x.shape, y.shape)
        )
    return float(np.dot(u, x) + np.dot(u, y) + np.dot(x, y))


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), in [0, 2]. Zero-norm vectors are treated as distance 1."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        return 1.0
    return float(1.0 - np.dot(a, b) / (norm_a * norm_b))


def save_matrix(values: np.ndarray, path) -> None:
    """Write a 2-d float64 matrix: b"CRMX", two little-endian uint64 dims, row-major data."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError("save_matrix expects a 2-d array, got ndim=%d" % arr.ndim)
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def load_matrix(path) -> np.ndarray:
    """Read a matrix written by save_matrix."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MATRIX_MAGIC:
        raise FormatError("%s: bad magic bytes, expected CRMX" % path)
    if len(blob) < 20:
        raise FormatError("%s: truncated header" % path)
    rows, cols = struct.unpack_from("<QQ", blob, 4)
    if len(blob) != 20 + 8 * rows * cols:
        raise FormatError(
            "%s: payload size mismatch for %dx%d matrix" % (path, rows, cols)
        )
    data = np.frombuffer(blob, dtype="<f8", offset=20, count=rows * cols)
    return data.reshape(rows, cols).copy()
