"""Independent reference routines used as test oracles.

They deliberately avoid the package's solver internals: plain loops,
``numpy.linalg.lstsq`` and ``numpy.linalg.pinv``.
"""

import itertools

import numpy as np


def reference_omp(phi, y, k):
    """Textbook OMP: argmax |phi^T r| over unselected columns (lowest index on
    ties), least squares on the selected columns, residual update."""
    selected = []
    r = y.copy()
    for _ in range(k):
        u = np.abs(phi.T @ r)
        best, best_j = -1.0, None
        for j in range(phi.shape[1]):
            if j not in selected and u[j] > best:
                best, best_j = u[j], j
        selected.append(best_j)
        coef = np.linalg.lstsq(phi[:, selected], y, rcond=None)[0]
        r = y - phi[:, selected] @ coef
    return selected


def best_support_exhaustive(phis, ys, k):
    """Support of size k minimising the summed per-sensor least-squares residual."""
    l, m, n = phis.shape
    best, best_s = np.inf, None
    for s in itertools.combinations(range(n), k):
        cols = list(s)
        res = 0.0
        for i in range(l):
            a = phis[i][:, cols]
            res += np.linalg.norm(ys[:, i] - a @ (np.linalg.pinv(a) @ ys[:, i]))
        if res < best:
            best, best_s = res, s
    return best_s, best


def _nonempty_subsets(k):
    for r in range(1, k + 1):
        yield from itertools.combinations(range(k), r)


def epsilons_brute(x_on_support, conservative=False):
    """(eps1, eps2, eps3) by looping over every nonempty subset of the support rows."""
    k, l = x_on_support.shape
    mean = x_on_support.mean(axis=1)
    full_spread = sum(np.linalg.norm(x_on_support[:, i] - mean) for i in range(l))
    e1, e2, e3 = [], [], []
    for u in _nonempty_subsets(k):
        rows = list(u)
        norms = [np.linalg.norm(x_on_support[rows, i]) for i in range(l)]
        e1.append(min(norms) / max(norms) if max(norms) > 0 else 0.0)
        den = l * np.linalg.norm(mean[rows])
        spread = sum(np.linalg.norm(x_on_support[rows, i] - mean[rows]) for i in range(l))
        e2.append(spread / den if den > 0 else np.inf)
        e3.append(full_spread / den if den > 0 else np.inf)
    return (min(e1) if conservative else max(e1)), max(e2), max(e3)


def ric_brute(phi, order):
    """RIC from singular values of every column subset of the given size."""
    best = 0.0
    for s in itertools.combinations(range(phi.shape[1]), order):
        sv = np.linalg.svd(phi[:, list(s)], compute_uv=False)
        lam_max, lam_min = sv[0] ** 2, (sv[-1] ** 2 if len(sv) == order else 0.0)
        best = max(best, lam_max - 1.0, 1.0 - lam_min)
    return best
