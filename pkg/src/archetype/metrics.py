"""Accuracy against ground truth: abundance RMSE (percent), endmember SAD
(degrees) and endmember matching."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from archetype.core import DataError, as_matrix

BRUTE_FORCE_MAX_P = 8
GT_SUM_TOL = 1e-6


@dataclass
class EvaluationResult:
    overall_rmse: float
    overall_sad: float
    per_endmember: list[tuple[str, float, float]]
    permutation: list[int]
    """``permutation[k]`` is the estimated endmember matched to ground truth k."""

    def to_dict(self) -> dict:
        return {
            "overall_rmse": self.overall_rmse,
            "overall_sad": self.overall_sad,
            "per_endmember": [
                {"name": name, "rmse": r, "sad": s} for name, r, s in self.per_endmember
            ],
            "permutation": list(self.permutation),
        }

    def format_table(self) -> str:
        width = max([len("Overall")] + [len(n) for n, _, _ in self.per_endmember])
        lines = [f"{'':<{width}}  {'RMSE (%)':>10}  {'SAD (deg)':>10}"]
        for name, r, s in self.per_endmember:
            lines.append(f"{name:<{width}}  {r:>10.2f}  {s:>10.2f}")
        lines.append("-" * len(lines[0]))
        lines.append(f"{'Overall':<{width}}  {self.overall_rmse:>10.2f}  {self.overall_sad:>10.2f}")
        return "\n".join(lines)


def _pair(gt, est, what):
    gt = as_matrix(gt, f"ground-truth {what}")
    est = as_matrix(est, f"estimated {what}")
    if gt.shape != est.shape:
        raise DataError(f"{what} shapes differ: {gt.shape} vs {est.shape}")
    return gt, est


def _unit_columns(m):
    norms = np.linalg.norm(m, axis=0)
    if np.any(norms == 0):
        raise DataError("SAD undefined for zero spectrum")
    return m / norms


def sad_matrix(gt, est) -> np.ndarray:
    """Angles in degrees between every ground-truth column (rows) and every
    estimated column (columns)."""
    cos = _unit_columns(gt).T @ _unit_columns(est)
    return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))


def sad_terms(gt, est) -> np.ndarray:
    gt, est = _pair(gt, est, "endmembers")
    cos = np.sum(_unit_columns(gt) * _unit_columns(est), axis=0)
    return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))


def sad(gt, est) -> float:
    """Mean spectral angle in degrees between matched columns."""
    return float(sad_terms(gt, est).mean())


def rmse_terms(gt, est) -> np.ndarray:
    """Per-endmember RMSE in percent, averaging over the N pixels of each row."""
    gt, est = _pair(gt, est, "abundances")
    return 100.0 * np.sqrt(np.mean((gt - est) ** 2, axis=1))


def rmse(gt, est) -> float:
    gt, est = _pair(gt, est, "abundances")
    return float(100.0 * np.sqrt(np.mean((gt - est) ** 2)))


def match_endmembers(est, gt) -> np.ndarray:
    """Order of estimated columns minimizing the total SAD to ``gt``.

    ``est[:, order]`` lines up with ``gt``. Exhaustive for p <= 8, optimal
    assignment beyond.
    """
    est = as_matrix(est, "estimated endmembers")
    gt = as_matrix(gt, "ground-truth endmembers")
    if est.shape[1] != gt.shape[1]:
        raise DataError(f"endmember counts differ: {est.shape[1]} vs {gt.shape[1]}")
    cost = sad_matrix(gt, est)
    p = cost.shape[0]
    if p <= BRUTE_FORCE_MAX_P:
        perms = np.array(list(itertools.permutations(range(p))))
        totals = cost[np.arange(p), perms].sum(axis=1)
        return perms[int(np.argmin(totals))]
    _, cols = linear_sum_assignment(cost)
    return cols


def _renormalized(gt_a):
    sums = gt_a.sum(axis=0)
    if np.max(np.abs(sums - 1.0)) > GT_SUM_TOL:
        warnings.warn(
            f"ground-truth abundances deviate from the simplex by up to {np.max(np.abs(sums - 1.0)):.3g};"
            " renormalizing columns",
            stacklevel=3,
        )
        if np.any(sums <= 0):
            raise DataError("ground-truth abundance column with non-positive sum")
        gt_a = np.clip(gt_a, 0.0, None)
        gt_a = gt_a / gt_a.sum(axis=0)
    return gt_a


def evaluate(gt_endmembers, gt_abundances, est_endmembers, est_abundances, names=None) -> EvaluationResult:
    gt_e = as_matrix(gt_endmembers, "ground-truth endmembers")
    est_e = as_matrix(est_endmembers, "estimated endmembers")
    gt_a = _renormalized(as_matrix(gt_abundances, "ground-truth abundances"))
    est_a = as_matrix(est_abundances, "estimated abundances")
    order = match_endmembers(est_e, gt_e)
    est_e, est_a = est_e[:, order], est_a[order, :]
    r_terms = rmse_terms(gt_a, est_a)
    s_terms = sad_terms(gt_e, est_e)
    p = gt_e.shape[1]
    if names is None:
        names = [str(k) for k in range(p)]
    elif len(names) != p:
        raise DataError(f"got {len(names)} names for {p} endmembers")
    return EvaluationResult(
        overall_rmse=rmse(gt_a, est_a),
        overall_sad=float(s_terms.mean()),
        per_endmember=[(str(n), float(r), float(s)) for n, r, s in zip(names, r_terms, s_terms)],
        permutation=[int(i) for i in order],
    )
