"""OSPA distance, cardinality error and Monte Carlo aggregation."""
from __future__ import annotations

import csv
import io
import math
from typing import Callable, Sequence

import numpy as np

from .assignment import hungarian


def euclidean(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def ospa(X: Sequence, Y: Sequence, c: float = 100.0, p: float = 1.0, base: Callable = euclidean) -> float:
    """OSPA distance of order ``p`` with cutoff ``c`` between two finite sets."""
    if c <= 0 or p < 1:
        raise ValueError("need c > 0 and p >= 1")
    m, n = len(X), len(Y)
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return float(c)
    if m > n:
        X, Y, m, n = Y, X, n, m
    D = np.empty((m, n))
    for i, x in enumerate(X):
        for j, y in enumerate(Y):
            D[i, j] = min(base(x, y), c) ** p
    _, cost = hungarian(D)
    return float(((cost + c**p * (n - m)) / n) ** (1.0 / p))


def _sqrtm_psd(A) -> np.ndarray:
    w, U = np.linalg.eigh((A + A.T) / 2.0)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def gaussian_wasserstein(X1, X2) -> float:
    """``sqrt(tr(X1 + X2 - 2 (X1^1/2 X2 X1^1/2)^1/2))`` for positive-definite extents."""
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    r = _sqrtm_psd(X1)
    cross = _sqrtm_psd(r @ X2 @ r)
    return math.sqrt(max(float(np.trace(X1 + X2 - 2.0 * cross)), 0.0))


def extended_base_distance(est, truth, weights=(1.0, 1.0, 0.1)) -> float:
    """Weighted centroid, extent and rate distance between ``(x, chi, gamma)`` triples.

    ``x`` may be a full kinematic vector; only the first ``d`` (position)
    entries are compared.
    """
    (x1, X1, g1), (x2, X2, g2) = est, truth
    X1 = np.asarray(X1, dtype=float)
    d = X1.shape[0]
    wx, wX, wg = weights
    pos = euclidean(np.asarray(x1)[:d], np.asarray(x2)[:d])
    return wx * pos + wX * gaussian_wasserstein(X1, X2) + wg * abs(float(g1) - float(g2))


def cardinality_error(n_est: int, n_true: int) -> float:
    return float(abs(n_est - n_true))


def aggregate(runs: Sequence[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise mean and (population) standard deviation over runs."""
    if len(runs) == 0:
        raise ValueError("no runs")
    lengths = {len(r) for r in runs}
    if len(lengths) != 1:
        raise ValueError(f"runs differ in length: {sorted(lengths)}")
    A = np.asarray(runs, dtype=float)
    return A.mean(axis=0), A.std(axis=0)


HEADER = ["k", "card_err_mean", "card_err_std", "ospa_mean", "ospa_std"]
HEADER_EXT = ["ospa_ext_mean", "ospa_ext_std"]


def metrics_csv(card_runs, ospa_runs, ext_runs=None, k0: int = 0) -> str:
    """CSV text (LF line endings) with per-step mean and std of each metric."""
    cm, cs = aggregate(card_runs)
    om, os_ = aggregate(ospa_runs)
    cols = [cm, cs, om, os_]
    header = list(HEADER)
    if ext_runs is not None:
        em, es = aggregate(ext_runs)
        if len(em) != len(cm):
            raise ValueError("extended OSPA series length mismatch")
        cols += [em, es]
        header += HEADER_EXT
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(len(cm)):
        w.writerow([k0 + i] + [repr(float(c[i])) for c in cols])
    return buf.getvalue()


def read_metrics_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[j]) for r in body]) for j, h in enumerate(header)}
