"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package under test.
"""

import math
from decimal import Decimal


def pairwise_auc(labels, scores):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        return None
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def naive_average_precision(labels, scores):
    idx = sorted(range(len(scores)), key=lambda i: (-scores[i], -labels[i], i))
    n_pos = sum(labels)
    if n_pos == 0:
        return None
    hits = 0
    total = 0.0
    for rank, i in enumerate(idx, start=1):
        if labels[i] == 1:
            hits += 1
            total += hits / rank
    return total / n_pos


def enumerate_fp_ratio_thresholds(labels, scores, target, values=None):
    """Try every distinct score as threshold; return (threshold, tp, fp, tpr, vdr, feasible)."""
    values = values or [0.0] * len(scores)
    n_pos = sum(labels)
    best = None
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 0)
        if tp == 0 or fp / tp > target:
            continue
        if best is None or tp > best[1]:
            best = (t, tp, fp)
    if best is None:
        t = min(scores)
        tp = sum(labels)
        fp = len(labels) - tp
        return t, tp, fp, tp / n_pos, False
    t, tp, fp = best
    return t, tp, fp, tp / n_pos, True


def brute_force_tpr_at_fp_ratio(labels, scores, target):
    """(tpr, feasible) at the best threshold, re-counting from scratch for every distinct score."""
    import numpy as np

    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    best = None
    for t in sorted(set(s.tolist()), reverse=True):
        flagged = s >= t
        tp = int((flagged & y).sum())
        fp = int((flagged & ~y).sum())
        if tp and fp / tp <= target and (best is None or tp > best[1]):
            best = (t, tp, fp)
    if best is None:
        return None, False
    return best[1] / n_pos, True


def naive_rolling(times, keys, amounts, window):
    """Per row: (count, sum) over rows with the same key and time in (t - window, t)."""
    counts, sums = [], []
    for i in range(len(times)):
        c = 0
        s = Decimal(0)
        for j in range(len(times)):
            if keys[j] == keys[i] and times[i] - window < times[j] < times[i]:
                c += 1
                s += Decimal(str(amounts[j]))
        counts.append(c)
        sums.append(float(s))
    return counts, sums


def finite_difference_gradient(f, w, eps=1e-6):
    grad = []
    for k in range(len(w)):
        hi = list(w)
        lo = list(w)
        hi[k] += eps
        lo[k] -= eps
        grad.append((f(hi) - f(lo)) / (2 * eps))
    return grad


def logistic(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def brute_force_fp_ratio_threshold(labels, scores, target):
    """(threshold, tp, fp, feasible) by recounting at every distinct score; lowest score when infeasible."""
    import numpy as np

    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=float)
    best = None
    for t in sorted(set(s.tolist()), reverse=True):
        flagged = s >= t
        tp = int((flagged & y).sum())
        fp = int((flagged & ~y).sum())
        if tp and fp / tp <= target and (best is None or tp > best[1]):
            best = (t, tp, fp)
    if best is None:
        return float(s.min()), int(y.sum()), int((~y).sum()), False
    return best[0], best[1], best[2], True


def naive_rolling_rows(times, keys, cents, window):
    """O(n^2) window scan: per row, rescan every row for same key and time in (t - window, t).

    Works on integer cents so sums are exact; returns (counts, sums in currency units).
    """
    import numpy as np

    times = np.asarray(times)
    keys = np.asarray(keys)
    cents = np.asarray(cents, dtype=np.int64)
    counts, sums = [], []
    for i in range(len(times)):
        member = (keys == keys[i]) & (times > times[i] - window) & (times < times[i])
        counts.append(int(member.sum()))
        sums.append(int(cents[member].sum()) / 100)
    return counts, sums
