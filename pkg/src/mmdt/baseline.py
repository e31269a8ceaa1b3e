"""Greedy mistake-minimizing baseline tree (IMM) over a centered dataset.

At every node the builder scans axis-aligned candidate cuts that separate at
least one pair of remaining reference centers and picks the one separating
the fewest points from their assigned center (ties: lowest axis, then lowest
threshold).  Candidate thresholds are midpoints between consecutive distinct
coordinates of the node's points, extended with midpoints between
consecutive center projections so a separating cut always exists.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import IncompatibilityError, ValidationError
from .tree import AxisCut, AxisTree, TreeNode, assign_components


@dataclass(frozen=True)
class CenteredDataset:
    """Points plus K reference centers; assignment is nearest center in l2
    with ties going to the lower index."""

    points: np.ndarray
    centers: np.ndarray
    assignment: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        ctr = np.asarray(self.centers, dtype=float)
        if pts.ndim != 2 or ctr.ndim != 2 or pts.shape[1] != ctr.shape[1]:
            raise ValidationError("points and centers must be 2-D with matching dimension")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(ctr))):
            raise ValidationError("points and centers must be finite")
        for a in range(ctr.shape[0]):
            for b in range(a + 1, ctr.shape[0]):
                if np.array_equal(ctr[a], ctr[b]):
                    raise ValidationError(f"centers {a} and {b} are duplicates")
        assign = np.asarray(self.assignment, dtype=int)
        expected = nearest_center(pts, ctr)
        if not np.array_equal(assign, expected):
            raise ValidationError("assignment does not follow the nearest-center rule")
        for arr in (pts, ctr, assign):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "centers", ctr)
        object.__setattr__(self, "assignment", assign)

    @staticmethod
    def create(points, centers) -> "CenteredDataset":
        points = np.asarray(points, dtype=float)
        centers = np.asarray(centers, dtype=float)
        return CenteredDataset(
            points=points, centers=centers, assignment=nearest_center(points, centers)
        )

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def nearest_center(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the closest center in l2; argmin takes the lower index."""
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def centers_fingerprint(centers: np.ndarray) -> str:
    payload = json.dumps(np.asarray(centers, dtype=float).tolist(), separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _best_cut(
    points: np.ndarray, assign: np.ndarray, centers: np.ndarray, center_idx: list[int]
) -> tuple[int, float, int]:
    """Minimal-mistake cut over all candidate (axis, theta); returns
    (axis, theta, mistakes).  Points counted are those whose assigned center
    is still at the node."""
    alive = np.isin(assign, center_idx)
    best: tuple[int, float, int] | None = None
    for axis in range(points.shape[1]):
        c_proj = centers[center_idx, axis]
        c_lo, c_hi = c_proj.min(), c_proj.max()
        coords = np.unique(points[:, axis]) if points.size else np.empty(0)
        cands = 0.5 * (coords[:-1] + coords[1:]) if coords.size > 1 else np.empty(0)
        c_sorted = np.unique(c_proj)
        cands = np.union1d(cands, 0.5 * (c_sorted[:-1] + c_sorted[1:]))
        cands = cands[(cands >= c_lo) & (cands < c_hi)]
        if cands.size == 0:
            continue
        # Per candidate: a center on each side, else the cut is not splitting.
        left_centers = np.searchsorted(np.sort(c_proj), cands, side="right")
        valid = (left_centers > 0) & (left_centers < len(center_idx))
        cands = cands[valid]
        if cands.size == 0:
            continue
        mistakes = np.zeros(cands.size, dtype=int)
        for k in center_idx:
            rows = np.sort(points[alive & (assign == k), axis])
            left_count = np.searchsorted(rows, cands, side="right")
            center_left = centers[k, axis] <= cands
            mistakes += np.where(center_left, rows.size - left_count, left_count)
        j = int(np.argmin(mistakes))
        cand = (axis, float(cands[j]), int(mistakes[j]))
        if best is None or (cand[2], cand[0], cand[1]) < (best[2], best[0], best[1]):
            best = cand
    if best is None:
        raise ValidationError("no candidate cut separates the remaining centers")
    return best


def build_imm(data: CenteredDataset) -> AxisTree:
    """Build the mistake-minimizing tree down to one center per leaf."""
    if data.k < 2:
        raise ValidationError("need at least two centers")

    def grow(point_idx: np.ndarray, center_idx: list[int], parent) -> TreeNode:
        if parent is not None:
            # A cut's mistake count is monotone non-increasing when
            # restricted to the points reaching a descendant node.
            p_axis, p_theta, p_centers, p_count = parent
            assert _cut_mistakes(data, point_idx, p_centers, p_axis, p_theta) <= p_count
        if len(center_idx) == 1:
            return TreeNode(leaf=center_idx[0])
        pts = data.points[point_idx]
        assign = data.assignment[point_idx]
        axis, theta, mistakes = _best_cut(pts, assign, data.centers, center_idx)
        assert mistakes <= len(point_idx)
        left_pts = point_idx[pts[:, axis] <= theta]
        right_pts = point_idx[pts[:, axis] > theta]
        left_centers = [k for k in center_idx if data.centers[k, axis] <= theta]
        right_centers = [k for k in center_idx if data.centers[k, axis] > theta]
        assert left_centers and right_centers
        here = (axis, theta, center_idx, mistakes)
        return TreeNode(
            cut=AxisCut(axis=axis, theta=theta),
            left=grow(left_pts, left_centers, here),
            right=grow(right_pts, right_centers, here),
        )

    root = grow(np.arange(data.points.shape[0]), list(range(data.k)), None)
    return AxisTree(
        root=root,
        dim=data.dim,
        n_leaves=data.k,
        model_fingerprint=centers_fingerprint(data.centers),
    )


def _cut_mistakes(
    data: CenteredDataset, point_idx: np.ndarray, center_idx: list[int], axis: int, theta: float
) -> int:
    alive = np.isin(data.assignment[point_idx], center_idx)
    pts = data.points[point_idx][alive]
    ctr = data.centers[data.assignment[point_idx][alive]]
    return int(np.sum((pts[:, axis] <= theta) != (ctr[:, axis] <= theta)))


def cut_mistakes_on_subset(data: CenteredDataset, point_idx, center_idx, axis, theta) -> int:
    """Mistakes of a fixed cut restricted to a subset of points (for the
    monotonicity property: a cut's count never grows on subsets)."""
    return _cut_mistakes(data, np.asarray(point_idx, dtype=int), list(center_idx), axis, theta)


def empirical_price(
    data: CenteredDataset, tree: AxisTree, norm: str = "l1", return_details: bool = False
):
    """Ratio of tree cost to baseline cost on the dataset.

    l1 uses coordinate-wise medians of leaf groups against medians of the
    assignment groups; l2sq uses means against means.  Empty leaves fall
    back to the leaf's reference center (recorded in the details).
    """
    if norm not in ("l1", "l2sq"):
        raise ValidationError(f"norm must be 'l1' or 'l2sq', got {norm!r}")
    if tree.dim != data.dim:
        raise IncompatibilityError("tree dimension does not match dataset")
    if tree.n_leaves != data.k:
        raise IncompatibilityError("tree leaf count does not match centers")
    leaf_of = assign_components(tree, data.points)
    stat = np.median if norm == "l1" else np.mean

    def group_cost(groups: np.ndarray) -> tuple[float, list[int]]:
        total = 0.0
        fallbacks = []
        for g in range(data.k):
            rows = data.points[groups == g]
            if rows.shape[0] == 0:
                fallbacks.append(g)
                continue
            center = stat(rows, axis=0)
            if norm == "l1":
                total += float(np.abs(rows - center).sum())
            else:
                total += float(((rows - center) ** 2).sum())
        return total, fallbacks

    tree_cost, fallbacks = group_cost(leaf_of)
    base_cost, _ = group_cost(data.assignment)
    price = tree_cost / base_cost
    if return_details:
        return price, {"fallback_leaves": fallbacks, "tree_cost": tree_cost, "baseline_cost": base_cost}
    return price
