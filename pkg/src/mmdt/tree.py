"""Axis-aligned decision trees over mixture components.

The builder repeatedly picks the axis with the largest noise-normalized mean
spread among the components remaining at a node, then places a one-sided cut
``x_i <= theta`` at the threshold minimizing a separation-probability
objective.  Three objectives are supported:

* ``exact-discrete`` -- the exact separation probability, enumerated over
  support points (all components at the node must be finite-discrete);
* ``chebyshev`` -- sum of per-component Chebyshev tail bounds
  ``min(1, sigma_i^2 / (mu_i - theta)^2)``, each clamped at one since it
  bounds a probability;
* ``gaussian`` -- sum of exact Gaussian upper tails at the normalized
  distance from each component mean to the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import IncompatibilityError, ValidationError
from .mixture import DISCRETE, GAUSSIAN, MixtureModel

OBJECTIVES = ("exact-discrete", "chebyshev", "gaussian")

# Ternary-search stopping rule for the continuous objectives.
_TERNARY_MAX_ITERS = 200
_TERNARY_WIDTH = 1e-12

# Mathematically tied scores and objective values (symmetric configurations)
# differ by rounding noise that need not survive affine rescaling; candidates
# this close are treated as tied and resolved by the deterministic rule.
_TIE_REL = 1e-12


def normal_upper_tail(t):
    """P(Z > t) for standard normal Z, via the complementary error function."""
    return 0.5 * erfc(np.asarray(t, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class AxisCut:
    """One-sided threshold cut: x_axis <= theta goes left."""

    axis: int
    theta: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValidationError("threshold must be finite")


@dataclass(frozen=True)
class TreeNode:
    """Internal node (cut plus two children) or leaf (component index)."""

    cut: AxisCut | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    leaf: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": int(self.leaf)}
        return {
            "axis": int(self.cut.axis),
            "theta": float(self.cut.theta),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "TreeNode":
        if "leaf" in d:
            return TreeNode(leaf=int(d["leaf"]))
        return TreeNode(
            cut=AxisCut(axis=int(d["axis"]), theta=float(d["theta"])),
            left=TreeNode.from_dict(d["left"]),
            right=TreeNode.from_dict(d["right"]),
        )


@dataclass(frozen=True)
class BuildOptions:
    """Options for build_mmdt.

    Ties in axis or threshold choice are broken deterministically (lowest
    axis index, then lowest theta); the seed is kept for sampling-based paths
    and recorded in the serialized tree.
    """

    objective: str = "chebyshev"
    seed: int = 0
    intervals_per_gap: int = 16

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.intervals_per_gap < 3:
            raise ValidationError("intervals-per-gap must be >= 3")

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "seed": int(self.seed),
            "intervals_per_gap": int(self.intervals_per_gap),
        }

    @staticmethod
    def from_dict(d: dict) -> "BuildOptions":
        return BuildOptions(
            objective=d["objective"],
            seed=int(d.get("seed", 0)),
            intervals_per_gap=int(d.get("intervals_per_gap", 16)),
        )


@dataclass(frozen=True)
class AxisTree:
    """Binary tree with K leaves, one per component index."""

    root: TreeNode
    dim: int
    n_leaves: int
    model_fingerprint: str = ""
    options: BuildOptions | None = None

    def leaves(self) -> list[int]:
        out: list[int] = []

        def walk(node: TreeNode):
            if node.is_leaf:
                out.append(node.leaf)
            else:
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out

    def to_dict(self) -> dict:
        out: dict = {
            "format_version": 1,
            "kind": "axis",
            "dim": int(self.dim),
            "n_leaves": int(self.n_leaves),
            "model_fingerprint": self.model_fingerprint,
            "root": self.root.to_dict(),
        }
        if self.options is not None:
            out["options"] = self.options.to_dict()
        return out

    @staticmethod
    def from_dict(d: dict) -> "AxisTree":
        options = BuildOptions.from_dict(d["options"]) if "options" in d else None
        return AxisTree(
            root=TreeNode.from_dict(d["root"]),
            dim=int(d["dim"]),
            n_leaves=int(d["n_leaves"]),
            model_fingerprint=d.get("model_fingerprint", ""),
            options=options,
        )


def predict(tree: AxisTree, x) -> int:
    """Route a point through the tree; boundary x_i == theta goes left."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.dim,):
        raise IncompatibilityError(f"point has shape {x.shape}, tree expects ({tree.dim},)")
    node = tree.root
    while not node.is_leaf:
        node = node.left if x[node.cut.axis] <= node.cut.theta else node.right
    return int(node.leaf)


def assign_components(tree: AxisTree, points: np.ndarray) -> np.ndarray:
    """Vectorized predict over an (n, d) array of points."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != tree.dim:
        raise IncompatibilityError(f"points have shape {points.shape}, tree expects (*, {tree.dim})")
    out = np.empty(points.shape[0], dtype=int)
    stack = [(tree.root, np.arange(points.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if node.is_leaf:
            out[idx] = node.leaf
            continue
        go_left = points[idx, node.cut.axis] <= node.cut.theta
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def select_axis(model: MixtureModel, node_components) -> tuple[int, float]:
    """Axis maximizing (max - min projected mean) / sigma; ties pick the
    lowest axis.  Returns the axis and the winning (unnormalized) spread."""
    comps = list(node_components)
    if len(comps) < 2:
        raise ValidationError("need at least two components at the node")
    proj = model.means()[comps]
    spread = proj.max(axis=0) - proj.min(axis=0)
    scores = spread / model.sigma
    best = float(scores.max())
    axis = int(np.argmax(scores >= best * (1.0 - _TIE_REL)))
    return axis, float(spread[axis])


def _node_weights(model: MixtureModel, comps: list[int]) -> np.ndarray:
    w = model.weights[comps]
    return w / w.sum()


def _check_theta_off_means(proj_means: np.ndarray, theta) -> None:
    if np.any(np.asarray(theta)[..., None] == proj_means):
        raise ValidationError("threshold on a mean")


def chebyshev_objective(model: MixtureModel, node_components, axis: int, theta):
    """Clamped Chebyshev bound on the probability that a point from the
    node-conditional mixture is separated from its own mean by theta."""
    comps = list(node_components)
    proj = model.means()[comps, axis]
    theta_arr = np.asarray(theta, dtype=float)
    _check_theta_off_means(proj, theta_arr)
    w = _node_weights(model, comps)
    sigma2 = model.sigma[axis] ** 2
    with np.errstate(divide="ignore", over="ignore"):
        terms = np.minimum(1.0, sigma2 / (proj - theta_arr[..., None]) ** 2)
    return terms @ w if theta_arr.ndim else float(terms @ w)


def gaussian_objective(model: MixtureModel, node_components, axis: int, theta):
    """Exact Gaussian tail version of the separation bound; requires all node
    components to be diagonal Gaussians."""
    comps = list(node_components)
    for k in comps:
        if model.components[k].kind != GAUSSIAN:
            raise ValidationError("gaussian objective requires gaussian components")
    proj = model.means()[comps, axis]
    theta_arr = np.asarray(theta, dtype=float)
    _check_theta_off_means(proj, theta_arr)
    w = _node_weights(model, comps)
    stds = np.array([model.components[k].stddev[axis] for k in comps])
    tails = normal_upper_tail(np.abs(proj - theta_arr[..., None]) / stds)
    return tails @ w if theta_arr.ndim else float(tails @ w)


def exact_discrete_objective(model: MixtureModel, node_components, axis: int, theta):
    """Exact separation probability by enumerating support points; requires
    all node components to be finite-discrete."""
    comps = list(node_components)
    for k in comps:
        if model.components[k].kind != DISCRETE:
            raise ValidationError("exact-discrete objective requires discrete components")
    proj = model.means()[comps, axis]
    theta_arr = np.asarray(theta, dtype=float)
    _check_theta_off_means(proj, theta_arr)
    w = _node_weights(model, comps)
    terms = []
    for k in comps:
        comp = model.components[k]
        pts = comp.support[:, axis]
        mean_left = comp.mean[axis] <= theta_arr[..., None]
        point_left = pts <= theta_arr[..., None]
        separated = mean_left != point_left
        terms.append(separated @ comp.mass)
    total = np.stack(terms, axis=-1) @ w
    return total if theta_arr.ndim else float(total)


def _objective_fn(objective: str):
    return {
        "exact-discrete": exact_discrete_objective,
        "chebyshev": chebyshev_objective,
        "gaussian": gaussian_objective,
    }[objective]


def _ternary_search(f_many, lo: float, hi: float) -> tuple[float, float]:
    # f_many maps a 1-D array of thresholds to objective values.
    v_lo, v_hi = f_many(np.array([lo, hi]))
    best_x, best_v = (lo, v_lo) if v_lo <= v_hi else (hi, v_hi)
    for _ in range(_TERNARY_MAX_ITERS):
        if hi - lo <= _TERNARY_WIDTH:
            break
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        v1, v2 = f_many(np.array([m1, m2]))
        if v1 < best_v:
            best_x, best_v = m1, v1
        if v2 < best_v:
            best_x, best_v = m2, v2
        if v1 < v2:
            hi = m2
        else:
            lo = m1
    mid = 0.5 * (lo + hi)
    v_mid = f_many(np.array([mid]))[0]
    if v_mid < best_v:
        best_x, best_v = mid, v_mid
    return best_x, float(best_v)


def minimize_threshold(
    model: MixtureModel,
    node_components,
    axis: int,
    objective: str,
    options: BuildOptions | None = None,
) -> tuple[float, float]:
    """Minimize the chosen objective over the open interval between the
    smallest and largest projected mean.

    The exact-discrete objective is piecewise constant, so candidate
    thresholds are midpoints between consecutive distinct support (and mean)
    projections.  The continuous objectives are minimized per gap between
    consecutive distinct projected means with a coarse bracket grid followed
    by ternary search.  Value ties resolve to the lowest theta.
    """
    options = options or BuildOptions(objective=objective)
    comps = list(node_components)
    proj = model.means()[comps, axis]
    m_lo, m_hi = float(proj.min()), float(proj.max())
    if not m_lo < m_hi:
        raise ValidationError("need at least two distinct projected means on the axis")
    f = _objective_fn(objective)

    if objective == "exact-discrete":
        values = [proj]
        for k in comps:
            values.append(model.components[k].support[:, axis])
        breaks = np.unique(np.concatenate(values))
        breaks = breaks[(breaks >= m_lo) & (breaks <= m_hi)]
        candidates = 0.5 * (breaks[:-1] + breaks[1:])
        vals = f(model, comps, axis, candidates)
        best = int(np.argmin(vals))
        # np.argmin returns the first minimum; candidates are sorted, so this
        # is already the lowest-theta tie rule.
        return float(candidates[best]), float(vals[best])

    # Precomputed evaluator: grid points and probes stay strictly inside the
    # open gaps, so no threshold can collide with a projected mean.
    w = model.weights[comps]
    w = w / w.sum()
    if objective == "chebyshev":
        sigma2 = float(model.sigma[axis] ** 2)

        def f_many(ts: np.ndarray) -> np.ndarray:
            with np.errstate(divide="ignore", over="ignore"):
                terms = np.minimum(1.0, sigma2 / (proj[None, :] - ts[:, None]) ** 2)
            return terms @ w
    else:
        stds = np.array([model.components[k].stddev[axis] for k in comps])

        def f_many(ts: np.ndarray) -> np.ndarray:
            z = np.abs(proj[None, :] - ts[:, None]) / stds[None, :]
            return normal_upper_tail(z) @ w

    distinct = np.unique(proj)
    grid_n = options.intervals_per_gap
    candidates: list[tuple[float, float]] = []  # (value, theta)
    for a, b in zip(distinct[:-1], distinct[1:]):
        span = b - a
        xs = a + span * np.arange(1, grid_n) / grid_n
        vals = f_many(xs)
        vmin = float(vals.min())
        # Refine every bracket whose grid value ties the gap minimum, so a
        # symmetric landscape yields both co-minima and the lowest-theta rule
        # decides, independent of which side rounding favors.
        tied = np.flatnonzero(vals <= vmin + _TIE_REL * max(1.0, abs(vmin)))
        for j in map(int, tied):
            lo = xs[j - 1] if j > 0 else max(a + span * 1e-12, np.nextafter(a, b))
            hi = xs[j + 1] if j < xs.size - 1 else min(b - span * 1e-12, np.nextafter(b, a))
            theta_gap, val_gap = _ternary_search(f_many, float(lo), float(hi))
            if vals[j] < val_gap:
                theta_gap, val_gap = float(xs[j]), float(vals[j])
            candidates.append((val_gap, theta_gap))
    best_val = min(v for v, _ in candidates)
    tol = _TIE_REL * max(1.0, abs(best_val))
    best_theta = min(theta for v, theta in candidates if v <= best_val + tol)
    best_val = next(v for v, theta in candidates if theta == best_theta)
    return float(best_theta), float(best_val)


def _check_objective_compatible(model: MixtureModel, objective: str) -> None:
    if objective == "exact-discrete" and not model.all_discrete():
        raise ValidationError("exact-discrete objective requires discrete components")
    if objective == "gaussian" and not model.all_gaussian():
        raise ValidationError("gaussian objective requires gaussian components")


def build_mmdt(model: MixtureModel, options: BuildOptions | None = None) -> AxisTree:
    """Build the K-leaf tree: per node, select the best axis, minimize the
    threshold objective, and partition the remaining components by mean side.
    Deterministic given (model, options)."""
    options = options or BuildOptions()
    if model.k < 2:
        raise ValidationError("need at least two components")
    _check_objective_compatible(model, options.objective)
    means = model.means()

    def grow(comps: list[int]) -> TreeNode:
        if len(comps) == 1:
            return TreeNode(leaf=comps[0])
        axis, _ = select_axis(model, comps)
        theta, _ = minimize_threshold(model, comps, axis, options.objective, options)
        left = [k for k in comps if means[k, axis] <= theta]
        right = [k for k in comps if means[k, axis] > theta]
        assert left and right, "threshold failed to separate component means"
        return TreeNode(cut=AxisCut(axis=axis, theta=theta), left=grow(left), right=grow(right))

    root = grow(list(range(model.k)))
    return AxisTree(
        root=root,
        dim=model.dim,
        n_leaves=model.k,
        model_fingerprint=model.fingerprint(),
        options=options,
    )


def check_structure(tree: AxisTree, means: np.ndarray) -> None:
    """Assert the structural invariants against component means (K x d):
    exactly K leaves mapped bijectively onto components, every leaf cell
    containing its component mean, every internal split nonempty."""
    k, d = means.shape
    if tree.dim != d:
        raise IncompatibilityError("tree dimension does not match means")
    seen: list[int] = []

    def walk(node: TreeNode, lo: np.ndarray, hi: np.ndarray) -> list[int]:
        if node.is_leaf:
            if not (k > node.leaf >= 0):
                raise ValidationError(f"leaf index {node.leaf} out of range")
            m = means[node.leaf]
            if not (np.all(m > lo) and np.all(m <= hi)):
                raise ValidationError(f"leaf cell does not contain mean of component {node.leaf}")
            seen.append(node.leaf)
            return [node.leaf]
        cut = node.cut
        if not lo[cut.axis] < cut.theta < hi[cut.axis]:
            raise ValidationError("cut threshold outside the cell of its node")
        hi_left = hi.copy()
        hi_left[cut.axis] = cut.theta
        lo_right = lo.copy()
        lo_right[cut.axis] = cut.theta
        got_left = walk(node.left, lo, hi_left)
        got_right = walk(node.right, lo_right, hi)
        if not got_left or not got_right:
            raise ValidationError("internal node with an empty side")
        return got_left + got_right

    walk(tree.root, np.full(d, -np.inf), np.full(d, np.inf))
    if sorted(seen) != list(range(k)):
        raise ValidationError(f"leaves {sorted(seen)} are not a bijection onto components")


def export_dot(tree: AxisTree) -> str:
    """Graphviz DOT rendering with cut labels like ``x_2 <= 0.5``."""
    lines = ["digraph tree {", "  node [shape=box];"]
    counter = [0]

    def walk(node: TreeNode) -> int:
        idx = counter[0]
        counter[0] += 1
        if node.is_leaf:
            lines.append(f'  n{idx} [label="component {node.leaf}", shape=ellipse];')
            return idx
        lines.append(f'  n{idx} [label="x{node.cut.axis + 1} <= {node.cut.theta:.6g}"];')
        l = walk(node.left)
        r = walk(node.right)
        lines.append(f'  n{idx} -> n{l} [label="yes"];')
        lines.append(f'  n{idx} -> n{r} [label="no"];')
        return idx

    walk(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"
