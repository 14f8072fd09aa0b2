"""Family log-likelihood kernels, compiled with numba when available.

Structure search spends nearly all of its time scoring one family (a child
node plus a candidate parent set) against the data, so that inner loop lives
here.  A pure-numpy twin of the kernel is always present; which one backs the
public entry point is decided once at import time via SBCN_KERNELS:

    SBCN_KERNELS=auto    numba when importable, numpy otherwise (default)
    SBCN_KERNELS=numba   require the compiled path, fail loudly without numba
    SBCN_KERNELS=numpy   force the fallback

Both paths accumulate per-configuration terms in ascending configuration
order, so each backend is bit-for-bit deterministic run to run.  Across
backends the counts agree exactly and the log-likelihoods agree to floating
round-off (the two log implementations may differ in the last ulp).

``benchmarks/kernel_bench.py`` times the two paths side by side.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "HAS_NUMBA",
    "family_counts",
    "family_log_likelihood",
]

# Beyond this parent count a dense 2^(k+1) count table stops being worth
# allocating; the kernel switches to sorting the observed configurations.
_DENSE_MAX_PARENTS = 12

_choice = os.environ.get("SBCN_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"SBCN_KERNELS must be one of auto, numba, numpy; got {_choice!r}"
    )

try:
    import numba
except ImportError:
    numba = None

if _choice == "numba" and numba is None:
    raise RuntimeError("SBCN_KERNELS=numba but numba is not importable")

HAS_NUMBA = numba is not None


def _encode_keys(data: np.ndarray, parents: np.ndarray, child: int) -> np.ndarray:
    """Per row: parent configuration index * 2 + child value, as int64."""
    if parents.size == 0:
        return data[:, child].astype(np.int64)
    weights = (np.int64(1) << np.arange(parents.size, dtype=np.int64)) * 2
    return data[:, parents].astype(np.int64) @ weights + data[:, child]


def _ll_terms(n0: np.ndarray, n1: np.ndarray, pseudocount: float) -> np.ndarray:
    """Vectorized per-configuration log-likelihood terms (numpy twin)."""
    total = n0 + n1
    terms = np.zeros(total.shape[0], dtype=np.float64)
    seen = total > 0
    if pseudocount > 0.0:
        p = (n1[seen] + pseudocount) / (total[seen] + 2.0 * pseudocount)
        terms[seen] = n1[seen] * np.log(p) + n0[seen] * np.log(1.0 - p)
        return terms
    pos = n1 > 0
    terms[pos] += n1[pos] * np.log(n1[pos] / total[pos])
    neg = n0 > 0
    terms[neg] += n0[neg] * np.log(n0[neg] / total[neg])
    return terms


def _family_ll_numpy(
    data: np.ndarray, parents: np.ndarray, child: int, pseudocount: float
) -> float:
    """Maximized family log-likelihood of one child given a parent set."""
    keys = _encode_keys(data, parents, child)
    k = parents.size
    if k <= _DENSE_MAX_PARENTS:
        counts = np.bincount(keys, minlength=1 << (k + 1)).astype(np.int64)
        n0 = counts[0::2]
        n1 = counts[1::2]
    else:
        unique_keys, key_counts = np.unique(keys, return_counts=True)
        cfg = unique_keys >> 1
        unique_cfg = np.unique(cfg)
        group = np.searchsorted(unique_cfg, cfg)
        n0 = np.zeros(unique_cfg.size, dtype=np.int64)
        n1 = np.zeros(unique_cfg.size, dtype=np.int64)
        odd = (unique_keys & 1) == 1
        n0[group[~odd]] = key_counts[~odd]
        n1[group[odd]] = key_counts[odd]
    terms = _ll_terms(n0, n1, pseudocount)
    if terms.size == 0:
        return 0.0
    # cumulative sum keeps the left-to-right accumulation order of the
    # compiled path, so both backends are deterministic the same way
    return float(np.cumsum(terms)[-1])


if HAS_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _ll_term_scalar(n0: int, n1: int, pseudocount: float) -> float:
        total = n0 + n1
        if total == 0:
            return 0.0
        if pseudocount > 0.0:
            p = (n1 + pseudocount) / (total + 2.0 * pseudocount)
            return n1 * np.log(p) + n0 * np.log(1.0 - p)
        term = 0.0
        if n1 > 0:
            term += n1 * np.log(n1 / total)
        if n0 > 0:
            term += n0 * np.log(n0 / total)
        return term

    @numba.njit(cache=True, nogil=True)
    def _family_ll_numba(
        data: np.ndarray, parents: np.ndarray, child: int, pseudocount: float
    ) -> float:
        m = data.shape[0]
        k = parents.shape[0]
        if k <= _DENSE_MAX_PARENTS:
            counts = np.zeros(1 << (k + 1), dtype=np.int64)
            for r in range(m):
                key = np.int64(data[r, child])
                for t in range(k):
                    key += np.int64(data[r, parents[t]]) << (t + 1)
                counts[key] += 1
            ll = 0.0
            for cfg in range(1 << k):
                ll += _ll_term_scalar(counts[2 * cfg], counts[2 * cfg + 1], pseudocount)
            return ll
        keys = np.empty(m, dtype=np.int64)
        for r in range(m):
            key = np.int64(data[r, child])
            for t in range(k):
                key += np.int64(data[r, parents[t]]) << (t + 1)
            keys[r] = key
        keys.sort()
        ll = 0.0
        i = 0
        while i < m:
            cfg = keys[i] >> 1
            n0 = 0
            n1 = 0
            while i < m and keys[i] >> 1 == cfg:
                n1 += keys[i] & 1
                n0 += 1 - (keys[i] & 1)
                i += 1
            ll += _ll_term_scalar(n0, n1, pseudocount)
        return ll

else:
    _family_ll_numba = None

if _choice == "numpy" or numba is None:
    BACKEND = "numpy"
    _family_ll = _family_ll_numpy
else:
    BACKEND = "numba"
    _family_ll = _family_ll_numba


def family_log_likelihood(
    data: np.ndarray,
    parents: "np.ndarray | tuple[int, ...]",
    child: int,
    pseudocount: float = 0.0,
) -> float:
    """Maximized log-likelihood contribution of one family.

    ``data`` is the read-only uint8 cell matrix of a Dataset; ``parents`` is
    the (possibly empty) parent index set of ``child``.  With pseudocount 0
    the per-configuration estimate is the plain relative frequency, so rows
    never land on a zero-probability entry and the result is finite.
    """
    parent_idx = np.asarray(parents, dtype=np.int64)
    return float(_family_ll(data, parent_idx, child, float(pseudocount)))


def family_counts(
    data: np.ndarray, parents: "np.ndarray | tuple[int, ...]", child: int
) -> np.ndarray:
    """Count table of shape (2^k, 2): rows per parent configuration,
    columns per child value.  Configuration bit t is parents[t]."""
    parent_idx = np.asarray(parents, dtype=np.int64)
    keys = _encode_keys(data, parent_idx, child)
    counts = np.bincount(keys, minlength=1 << (parent_idx.size + 1))
    return counts.astype(np.int64).reshape(-1, 2)
