"""Ranking metrics (AUC, AP, EER, ROC) and the two-sample Kolmogorov-Smirnov test.

Anomaly (label 1) is the positive class and larger scores mean more anomalous.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import kolmogorov
from scipy.stats import rankdata

from .exceptions import InputError, UndefinedMetricError

P_VALUE_FLOOR = 2.22e-16


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise InputError(f"{s.size} scores but {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise InputError("labels must be 0 (normal) or 1 (anomaly)")
    return s, y.astype(np.int64)


def _both_classes(y, metric):
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise UndefinedMetricError(f"{metric} needs both normal and anomalous labels")
    return n_pos, y.size - n_pos


def roc_auc(scores, labels):
    """P(score_anomaly > score_normal) + 0.5 * P(tie), via midranks."""
    s, y = _check(scores, labels)
    n_pos, n_neg = _both_classes(y, "AUC")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels):
    """ROC points ``(fpr, tpr)`` from (0, 0) to (1, 1), one step per distinct score."""
    s, y = _check(scores, labels)
    n_pos, n_neg = _both_classes(y, "ROC")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    return fpr, tpr


def average_precision(scores, labels):
    """Sum over the descending ranking of (recall step) * precision.

    Tied scores keep their input order (stable sort).
    """
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AP needs at least one anomaly")
    order = np.argsort(-s, kind="stable")
    hits = y[order]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, s.size + 1)
    return float(precision[hits == 1].sum() / n_pos)


def equal_error_rate(scores, labels):
    """Error rate where the false positive and false negative rates cross.

    Interpolates linearly between the two ROC points bracketing the crossing.
    """
    fpr, tpr = roc_curve(scores, labels)
    fnr = 1.0 - tpr
    diff = fpr - fnr  # starts at -1, ends at +1
    k = int(np.flatnonzero(diff >= 0)[0])
    if diff[k] == 0 or k == 0:
        return float(fpr[k])
    d0, d1 = diff[k - 1], diff[k]
    w = d0 / (d0 - d1)
    return float(fpr[k - 1] + w * (fpr[k] - fpr[k - 1]))


def ks_two_sample(a, b):
    """Two-sample KS statistic and asymptotic two-sided p-value.

    The p-value uses the Kolmogorov distribution at ``sqrt(n*m/(n+m)) * D`` and
    is floored at 2.22e-16.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise InputError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    stat = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    p = float(kolmogorov(en * stat))
    return stat, min(1.0, max(p, P_VALUE_FLOOR))


def ks_critical_value(n, m, level):
    """Asymptotic critical statistic ``c(level) * sqrt((n + m) / (n m))``."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def evaluate(scores, labels, with_roc=True):
    out = {
        "auc": roc_auc(scores, labels),
        "ap": average_precision(scores, labels),
        "eer": equal_error_rate(scores, labels),
    }
    if with_roc:
        fpr, tpr = roc_curve(scores, labels)
        out["roc"] = [(float(f), float(t)) for f, t in zip(fpr, tpr)]
    return out
