"""Hot per-row kernels used by the attacks, covering number and feature ranking.

Every kernel exists twice: a numba ``@njit`` loop version (``*_nb``) and a
vectorised numpy version (``*_np``).  The public name points at the numba
version unless numba is missing or ``ADVIDS_DISABLE_NUMBA=1`` is set in the
environment before import.  Both versions return identical results; the test
suite checks this on random inputs.

Dense matrix products stay in numpy (BLAS) on both paths.
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def decorator(func):
            return func

        return decorator


USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("ADVIDS_DISABLE_NUMBA", "0") not in ("1", "true", "yes")
BACKEND = "numba" if USE_NUMBA else "numpy"

# coordinates within this relative distance of the BGA threshold count as reaching it
BGA_TIE_RTOL = 1e-12

_FNV_OFFSET = np.uint64(14695981039346656037)
_FNV_PRIME = np.uint64(1099511628211)


# ---------------------------------------------------------------------------
# projection onto (L-inf ball around x0) intersected with the bounds box
# ---------------------------------------------------------------------------


def project_np(x, x0, eps, lo, hi):
    out = np.clip(x, x0 - eps, x0 + eps)
    # the box is widened to contain x0 so the intersection is never empty
    return np.clip(out, np.minimum(lo, x0), np.maximum(hi, x0))


@njit(cache=True)
def project_nb(x, x0, eps, lo, hi):
    n, m = x.shape
    out = np.empty_like(x)
    for i in range(n):
        for j in range(m):
            v = x[i, j]
            c = x0[i, j]
            if v < c - eps:
                v = c - eps
            elif v > c + eps:
                v = c + eps
            a = lo[j] if lo[j] < c else c
            b = hi[j] if hi[j] > c else c
            if v < a:
                v = a
            elif v > b:
                v = b
            out[i, j] = v
    return out


# ---------------------------------------------------------------------------
# ascent steps
# ---------------------------------------------------------------------------


def sign_step_np(x, x0, grad, step, eps, lo, hi):
    return project_np(x + step * np.sign(grad), x0, eps, lo, hi)


@njit(cache=True)
def sign_step_nb(x, x0, grad, step, eps, lo, hi):
    n, m = x.shape
    moved = np.empty_like(x)
    for i in range(n):
        for j in range(m):
            g = grad[i, j]
            s = 1.0 if g > 0 else (-1.0 if g < 0 else 0.0)
            moved[i, j] = x[i, j] + step * s
    return project_nb(moved, x0, eps, lo, hi)


def feasible_gradient_np(x, x0, grad, eps, lo, hi):
    upper = np.minimum(x0 + eps, np.maximum(hi, x0))
    lower = np.maximum(x0 - eps, np.minimum(lo, x0))
    can_move = ((grad > 0) & (x < upper)) | ((grad < 0) & (x > lower))
    return np.where(can_move, grad, 0.0)


@njit(cache=True)
def feasible_gradient_nb(x, x0, grad, eps, lo, hi):
    n, m = x.shape
    out = np.zeros_like(grad)
    for i in range(n):
        for j in range(m):
            c = x0[i, j]
            g = grad[i, j]
            if g > 0:
                upper = c + eps
                b = hi[j] if hi[j] > c else c
                if b < upper:
                    upper = b
                if x[i, j] < upper:
                    out[i, j] = g
            elif g < 0:
                lower = c - eps
                a = lo[j] if lo[j] < c else c
                if a > lower:
                    lower = a
                if x[i, j] > lower:
                    out[i, j] = g
    return out


def bga_mask_np(grad):
    m = grad.shape[1]
    sq = grad * grad
    total = sq.sum(axis=1, keepdims=True)
    return sq * m >= total * (1.0 - BGA_TIE_RTOL)


@njit(cache=True)
def bga_mask_nb(grad):
    n, m = grad.shape
    mask = np.zeros((n, m), dtype=np.bool_)
    for i in range(n):
        total = 0.0
        for j in range(m):
            total += grad[i, j] * grad[i, j]
        limit = total * (1.0 - BGA_TIE_RTOL)
        for j in range(m):
            mask[i, j] = grad[i, j] * grad[i, j] * m >= limit
    return mask


def bga_step_np(x, x0, grad, step, eps, lo, hi):
    g = feasible_gradient_np(x, x0, grad, eps, lo, hi)
    direction = np.where(bga_mask_np(g), np.sign(g), 0.0)
    return project_np(x + step * direction, x0, eps, lo, hi)


@njit(cache=True)
def bga_step_nb(x, x0, grad, step, eps, lo, hi):
    n, m = x.shape
    g = feasible_gradient_nb(x, x0, grad, eps, lo, hi)
    mask = bga_mask_nb(g)
    moved = x.copy()
    for i in range(n):
        for j in range(m):
            if mask[i, j]:
                if g[i, j] > 0:
                    moved[i, j] += step
                elif g[i, j] < 0:
                    moved[i, j] -= step
    return project_nb(moved, x0, eps, lo, hi)


def bca_choice_np(grad):
    return np.argmax(np.abs(grad), axis=1)


@njit(cache=True)
def bca_choice_nb(grad):
    n, m = grad.shape
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        best = -1.0
        for j in range(m):
            a = abs(grad[i, j])
            if a > best:
                best = a
                out[i] = j
    return out


def bca_step_np(x, x0, grad, step, eps, lo, hi):
    g = feasible_gradient_np(x, x0, grad, eps, lo, hi)
    rows = np.arange(x.shape[0])
    cols = bca_choice_np(g)
    moved = x.copy()
    moved[rows, cols] += step * np.sign(g[rows, cols])
    return project_np(moved, x0, eps, lo, hi)


@njit(cache=True)
def bca_step_nb(x, x0, grad, step, eps, lo, hi):
    g = feasible_gradient_nb(x, x0, grad, eps, lo, hi)
    cols = bca_choice_nb(g)
    moved = x.copy()
    for i in range(x.shape[0]):
        v = g[i, cols[i]]
        if v > 0:
            moved[i, cols[i]] += step
        elif v < 0:
            moved[i, cols[i]] -= step
    return project_nb(moved, x0, eps, lo, hi)


# ---------------------------------------------------------------------------
# best-of-candidates bookkeeping (in place)
# ---------------------------------------------------------------------------


def keep_best_np(best_x, best_loss, cand_x, cand_loss):
    better = cand_loss > best_loss
    best_x[better] = cand_x[better]
    best_loss[better] = cand_loss[better]


@njit(cache=True)
def keep_best_nb(best_x, best_loss, cand_x, cand_loss):
    n, m = best_x.shape
    for i in range(n):
        if cand_loss[i] > best_loss[i]:
            best_loss[i] = cand_loss[i]
            for j in range(m):
                best_x[i, j] = cand_x[i, j]


# ---------------------------------------------------------------------------
# quantised row hashing (distinct adversarial variants)
# ---------------------------------------------------------------------------


def row_hashes_np(X, ids, scale):
    q = np.rint(X * scale).astype(np.int64).view(np.uint64)
    h = np.full(X.shape[0], _FNV_OFFSET, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = (h ^ ids.astype(np.int64).view(np.uint64)) * _FNV_PRIME
        for j in range(X.shape[1]):
            h = (h ^ q[:, j]) * _FNV_PRIME
    return h


@njit(cache=True)
def row_hashes_nb(X, ids, scale):
    n, m = X.shape
    out = np.empty(n, dtype=np.uint64)
    prime = np.uint64(1099511628211)
    for i in range(n):
        h = np.uint64(14695981039346656037)
        h = (h ^ np.uint64(np.int64(ids[i]))) * prime
        for j in range(m):
            q = np.int64(np.rint(X[i, j] * scale))
            h = (h ^ np.uint64(q)) * prime
        out[i] = h
    return out


# ---------------------------------------------------------------------------
# joint (bin, class) histogram for information gain
# ---------------------------------------------------------------------------


def joint_counts_np(bins, y, n_bins):
    flat = np.bincount(bins * 2 + y, minlength=2 * n_bins)
    return flat.reshape(n_bins, 2).astype(np.float64)


@njit(cache=True)
def joint_counts_nb(bins, y, n_bins):
    out = np.zeros((n_bins, 2), dtype=np.float64)
    for i in range(bins.shape[0]):
        out[bins[i], y[i]] += 1.0
    return out


if USE_NUMBA:
    project = project_nb
    feasible_gradient = feasible_gradient_nb
    sign_step = sign_step_nb
    bga_mask = bga_mask_nb
    bga_step = bga_step_nb
    bca_choice = bca_choice_nb
    bca_step = bca_step_nb
    keep_best = keep_best_nb
    row_hashes = row_hashes_nb
    joint_counts = joint_counts_nb
else:
    project = project_np
    feasible_gradient = feasible_gradient_np
    sign_step = sign_step_np
    bga_mask = bga_mask_np
    bga_step = bga_step_np
    bca_choice = bca_choice_np
    bca_step = bca_step_np
    keep_best = keep_best_np
    row_hashes = row_hashes_np
    joint_counts = joint_counts_np
