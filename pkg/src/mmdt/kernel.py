"""Product kernels, embedding statistics, and the kernel tree builder.

The kernel is a product over axes of monotone decreasing profiles
``g_i(|x_i - y_i|)`` with g_i(0) = 1 (gaussian ``exp(-gamma t^2)`` or
laplace ``exp(-gamma t)`` profiles).  The tree cuts on per-axis kernel
similarity to a sampled prototype point: ``kappa_i(x, prototype) < theta``
goes left, so a cut is equivalently a two-sided input-space interval.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import IncompatibilityError, ValidationError
from .mixture import MixtureModel

PROFILES = ("gaussian", "laplace")


@dataclass(frozen=True)
class KernelSpec:
    """Per-axis profile ids and positive scale parameters gamma."""

    profiles: tuple[str, ...]
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        profiles = tuple(self.profiles)
        if len(profiles) != g.shape[0]:
            raise ValidationError("profiles and gamma lengths differ")
        for p in profiles:
            if p not in PROFILES:
                raise ValidationError(f"unknown kernel profile {p!r}")
        if np.any(g <= 0) or not np.all(np.isfinite(g)):
            raise ValidationError("gamma must be positive and finite")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "profiles", profiles)
        object.__setattr__(self, "gamma", g)

    @staticmethod
    def uniform(profile: str, gamma, dim: int) -> "KernelSpec":
        g = np.broadcast_to(np.asarray(gamma, dtype=float), (dim,))
        return KernelSpec(profiles=(profile,) * dim, gamma=g)

    @property
    def dim(self) -> int:
        return len(self.profiles)

    def profile_value(self, axis: int, t):
        """g_i evaluated at non-negative distances t."""
        t = np.asarray(t, dtype=float)
        if self.profiles[axis] == "gaussian":
            return np.exp(-self.gamma[axis] * t**2)
        return np.exp(-self.gamma[axis] * t)

    def profile_inverse(self, axis: int, value: float) -> float:
        """Distance r with g_i(r) = value, for value in (0, 1]."""
        if not 0.0 < value <= 1.0:
            raise ValidationError("profile values lie in (0, 1]")
        u = -math.log(value)
        if self.profiles[axis] == "gaussian":
            return math.sqrt(u / self.gamma[axis])
        return u / self.gamma[axis]

    def axis_similarity(self, axis: int, x_axis, y_axis):
        return self.profile_value(axis, np.abs(np.subtract(x_axis, y_axis)))

    def similarity(self, x, y):
        """Full product kernel kappa(x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = 1.0
        for i in range(self.dim):
            out = out * self.axis_similarity(i, x[..., i], y[..., i])
        return out

    def to_dict(self) -> dict:
        return {"profiles": list(self.profiles), "gamma": self.gamma.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "KernelSpec":
        return KernelSpec(profiles=tuple(d["profiles"]), gamma=d["gamma"])

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _ratio(num: float, den: float) -> float:
    # Zero-noise models have zero baseline cost; a zero-cost tree prices at 1.
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def _require_discrete(model: MixtureModel, what: str) -> None:
    if not model.all_discrete():
        raise ValidationError(f"{what} in exact mode requires finite-discrete components")


def _check_kernel_dim(model: MixtureModel, kernel: KernelSpec) -> None:
    if kernel.dim != model.dim:
        raise IncompatibilityError(
            f"kernel dimension {kernel.dim} does not match model dimension {model.dim}"
        )


def _axis_gram(kernel: KernelSpec, axis: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return kernel.profile_value(axis, np.abs(u[:, None] - v[None, :]))


def _full_gram(kernel: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.ones((a.shape[0], b.shape[0]))
    for i in range(kernel.dim):
        out *= _axis_gram(kernel, i, a[:, i], b[:, i])
    return out


def _pair_samples(
    model: MixtureModel, k: int, l: int, n_pairs: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=(k, l)))
    x = model.components[k].sample(rng, n_pairs)
    y = model.components[l].sample(rng, n_pairs)
    return x, y


def xi(
    model: MixtureModel,
    kernel: KernelSpec,
    i: int,
    k: int,
    l: int,
    mode: str = "exact",
    n_pairs: int = 10_000,
    seed: int = 0,
) -> float:
    """Expected per-axis similarity E[kappa_i(x, y)] for x ~ component k and
    y ~ component l; exact double sum for discrete components, MC otherwise."""
    _check_kernel_dim(model, kernel)
    if not (0 <= i < model.dim and 0 <= k < model.k and 0 <= l < model.k):
        raise ValidationError("xi index out of range")
    if mode == "exact":
        _require_discrete(model, "xi")
        ck, cl = model.components[k], model.components[l]
        gram = _axis_gram(kernel, i, ck.support[:, i], cl.support[:, i])
        return float(ck.mass @ gram @ cl.mass)
    x, y = _pair_samples(model, k, l, n_pairs, seed)
    return float(np.mean(kernel.axis_similarity(i, x[:, i], y[:, i])))


def _cross_expectation(
    model: MixtureModel, kernel: KernelSpec, k: int, l: int, mode: str, n_pairs: int, seed: int
) -> float:
    """E[kappa(x, y)] under the full product kernel."""
    if mode == "exact":
        ck, cl = model.components[k], model.components[l]
        return float(ck.mass @ _full_gram(kernel, ck.support, cl.support) @ cl.mass)
    x, y = _pair_samples(model, k, l, n_pairs, seed)
    return float(np.mean(kernel.similarity(x, y)))


@dataclass(frozen=True)
class KernelStats:
    """Embedding statistics of a (model, kernel) pair.

    sigma2 is the smallest component self-similarity E[kappa(x, x')] (the
    per-component values and their spread are kept since the bounds assume
    they coincide); eps2 bounds the variance of every per-axis kernel;
    tau is the axis-aligned similarity max_{k != l} min_i xi(i, k, l).
    """

    sigma2: float
    sigma2_per_component: np.ndarray
    eps2: float
    tau: float
    xi_table: np.ndarray
    mode: str
    n_pairs: int
    seed: int
    model_fingerprint: str
    kernel_fingerprint: str

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError("tau outside [0, 1]")
        if not 0.0 < self.sigma2 <= 1.0:
            raise ValidationError("sigma2 outside (0, 1]")
        if not 0.0 <= self.eps2 <= 1.0:
            raise ValidationError("eps2 outside [0, 1]")
        # Entries are positive in exact arithmetic but may underflow to 0.
        if np.any(self.xi_table < 0) or np.any(self.xi_table > 1.0 + 1e-12):
            raise ValidationError("xi entries outside [0, 1]")

    @property
    def sigma2_spread(self) -> float:
        return float(self.sigma2_per_component.max() - self.sigma2_per_component.min())


def kernel_stats(
    model: MixtureModel,
    kernel: KernelSpec,
    mode: str = "exact",
    n_pairs: int = 10_000,
    seed: int = 0,
) -> KernelStats:
    """Fill sigma2, eps2, tau, and the full xi table (axes x K x K)."""
    _check_kernel_dim(model, kernel)
    if mode not in ("exact", "mc"):
        raise ValidationError(f"mode must be 'exact' or 'mc', got {mode!r}")
    if mode == "exact":
        _require_discrete(model, "kernel_stats")
    d, K = model.dim, model.k

    xi_table = np.empty((d, K, K))
    eps2 = 0.0
    for k in range(K):
        for l in range(k, K):
            if mode == "exact":
                ck, cl = model.components[k], model.components[l]
                for i in range(d):
                    gram = _axis_gram(kernel, i, ck.support[:, i], cl.support[:, i])
                    mean = float(ck.mass @ gram @ cl.mass)
                    mean_sq = float(ck.mass @ gram**2 @ cl.mass)
                    xi_table[i, k, l] = xi_table[i, l, k] = mean
                    eps2 = max(eps2, mean_sq - mean**2)
            else:
                x, y = _pair_samples(model, k, l, n_pairs, seed)
                for i in range(d):
                    vals = kernel.axis_similarity(i, x[:, i], y[:, i])
                    xi_table[i, k, l] = xi_table[i, l, k] = float(vals.mean())
                    eps2 = max(eps2, float(vals.var()))

    sigma2_per = np.array(
        [_cross_expectation(model, kernel, k, k, mode, n_pairs, seed) for k in range(K)]
    )
    spread = float(sigma2_per.max() - sigma2_per.min())
    # In MC mode equal values still spread by sampling noise ~ 1/sqrt(pairs).
    spread_tol = 1e-6 if mode == "exact" else max(1e-6, 4.0 / math.sqrt(n_pairs))
    if spread > spread_tol:
        warnings.warn(
            f"component self-similarities differ by {spread:.3g}; "
            "bounds use the minimum",
            stacklevel=2,
        )

    tau = 0.0
    for k in range(K):
        for l in range(K):
            if k != l:
                tau = max(tau, float(xi_table[:, k, l].min()))

    return KernelStats(
        sigma2=float(sigma2_per.min()),
        sigma2_per_component=sigma2_per,
        eps2=min(1.0, eps2),
        tau=tau,
        xi_table=xi_table,
        mode=mode,
        n_pairs=n_pairs if mode == "mc" else 0,
        seed=seed,
        model_fingerprint=model.fingerprint(),
        kernel_fingerprint=kernel.fingerprint(),
    )


def mmd(
    model: MixtureModel,
    kernel: KernelSpec,
    k: int,
    l: int,
    mode: str = "exact",
    n_pairs: int = 10_000,
    seed: int = 0,
) -> float:
    """Maximum mean discrepancy between two components (clamped at zero
    before the square root to absorb MC noise)."""
    _check_kernel_dim(model, kernel)
    if k == l:
        return 0.0
    s_k = _cross_expectation(model, kernel, k, k, mode, n_pairs, seed)
    s_l = _cross_expectation(model, kernel, l, l, mode, n_pairs, seed)
    c_kl = _cross_expectation(model, kernel, k, l, mode, n_pairs, seed)
    return math.sqrt(max(0.0, s_k + s_l - 2.0 * c_kl))


@dataclass(frozen=True)
class KernelCut:
    """Similarity cut: kappa_axis(x, prototype) < theta goes left."""

    axis: int
    prototype: np.ndarray
    theta: float
    anchor: int

    def __post_init__(self):
        proto = np.asarray(self.prototype, dtype=float).copy()
        proto.setflags(write=False)
        object.__setattr__(self, "prototype", proto)
        if not 0.0 < self.theta < 1.0:
            raise ValidationError("kernel threshold must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "axis": int(self.axis),
            "prototype": self.prototype.tolist(),
            "theta": float(self.theta),
            "anchor": int(self.anchor),
        }


@dataclass(frozen=True)
class KernelNode:
    cut: KernelCut | None = None
    left: "KernelNode | None" = None
    right: "KernelNode | None" = None
    leaf: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": int(self.leaf)}
        out = self.cut.to_dict()
        out["left"] = self.left.to_dict()
        out["right"] = self.right.to_dict()
        return out

    @staticmethod
    def from_dict(d: dict) -> "KernelNode":
        if "leaf" in d:
            return KernelNode(leaf=int(d["leaf"]))
        cut = KernelCut(
            axis=int(d["axis"]),
            prototype=d["prototype"],
            theta=float(d["theta"]),
            anchor=int(d["anchor"]),
        )
        return KernelNode(
            cut=cut, left=KernelNode.from_dict(d["left"]), right=KernelNode.from_dict(d["right"])
        )


@dataclass(frozen=True)
class KernelTree:
    """Binary tree of kernel-similarity cuts with K leaves."""

    root: KernelNode
    dim: int
    n_leaves: int
    kernel: KernelSpec
    model_fingerprint: str = ""
    seed: int = 0

    def leaves(self) -> list[int]:
        out: list[int] = []

        def walk(node: KernelNode):
            if node.is_leaf:
                out.append(node.leaf)
            else:
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "kind": "kernel",
            "dim": int(self.dim),
            "n_leaves": int(self.n_leaves),
            "kernel": self.kernel.to_dict(),
            "model_fingerprint": self.model_fingerprint,
            "seed": int(self.seed),
            "root": self.root.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "KernelTree":
        return KernelTree(
            root=KernelNode.from_dict(d["root"]),
            dim=int(d["dim"]),
            n_leaves=int(d["n_leaves"]),
            kernel=KernelSpec.from_dict(d["kernel"]),
            model_fingerprint=d.get("model_fingerprint", ""),
            seed=int(d.get("seed", 0)),
        )


def build_kernel_mmdt(
    model: MixtureModel, kernel: KernelSpec, stats: KernelStats, seed: int = 0
) -> KernelTree:
    """Grow the similarity tree.

    Per node: choose the (axis, pair) minimizing xi over the remaining set,
    anchor on the pair's lower index, put theta at the midpoint of the
    largest gap among the sorted {xi(axis, anchor, m)}, and sample a
    prototype from the anchor component with a seed derived from the build
    seed and the node's pre-order index.
    """
    _check_kernel_dim(model, kernel)
    if model.k < 2:
        raise ValidationError("need at least two components")
    if stats.model_fingerprint != model.fingerprint() or stats.kernel_fingerprint != kernel.fingerprint():
        raise IncompatibilityError("stats were computed for a different model or kernel")
    node_counter = [0]

    def grow(comps: list[int]) -> KernelNode:
        node_index = node_counter[0]
        node_counter[0] += 1
        if len(comps) == 1:
            return KernelNode(leaf=comps[0])

        best = None  # (xi value, axis, k, l)
        for i in range(model.dim):
            for a_idx, k in enumerate(comps):
                for l in comps[a_idx + 1 :]:
                    cand = (float(stats.xi_table[i, k, l]), i, k, l)
                    if best is None or cand < best:
                        best = cand
        _, axis, anchor, _ = best

        values = np.array([float(stats.xi_table[axis, anchor, m]) for m in comps])
        order = np.argsort(values, kind="stable")
        sorted_vals = values[order]
        gaps = np.diff(sorted_vals)
        g = int(np.argmax(gaps))
        if gaps[g] <= 0.0:
            raise ValidationError("identical axis similarities; components cannot be separated")
        theta = 0.5 * (sorted_vals[g] + sorted_vals[g + 1])

        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=(node_index,))
        )
        prototype = model.components[anchor].sample(rng, 1)[0]

        left = [m for m, v in zip(comps, values) if v < theta]
        right = [m for m, v in zip(comps, values) if v > theta]
        assert left and right, "kernel threshold failed to separate components"
        cut = KernelCut(axis=axis, prototype=prototype, theta=theta, anchor=anchor)
        return KernelNode(cut=cut, left=grow(left), right=grow(right))

    root = grow(list(range(model.k)))
    return KernelTree(
        root=root,
        dim=model.dim,
        n_leaves=model.k,
        kernel=kernel,
        model_fingerprint=model.fingerprint(),
        seed=seed,
    )


def kernel_predict(tree: KernelTree, x) -> int:
    """Route a point: kappa_axis(x, prototype) < theta goes left, boundary
    equality goes right."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.dim,):
        raise IncompatibilityError(f"point has shape {x.shape}, tree expects ({tree.dim},)")
    node = tree.root
    while not node.is_leaf:
        cut = node.cut
        sim = float(tree.kernel.axis_similarity(cut.axis, x[cut.axis], cut.prototype[cut.axis]))
        node = node.left if sim < cut.theta else node.right
    return int(node.leaf)


def kernel_assign(tree: KernelTree, points: np.ndarray) -> np.ndarray:
    """Vectorized kernel_predict over an (n, d) array."""
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
        cut = node.cut
        sims = tree.kernel.axis_similarity(cut.axis, points[idx, cut.axis], cut.prototype[cut.axis])
        go_left = sims < cut.theta
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def cut_interval(cut: KernelCut, kernel: KernelSpec) -> float:
    """Input-space radius r with: |x_axis - prototype_axis| > r goes left."""
    return kernel.profile_inverse(cut.axis, cut.theta)


def interval_predict(tree: KernelTree, x) -> int:
    """Route via the input-space interval form of every cut; must agree with
    kernel_predict exactly."""
    x = np.asarray(x, dtype=float)
    node = tree.root
    while not node.is_leaf:
        cut = node.cut
        r = cut_interval(cut, tree.kernel)
        node = node.left if abs(x[cut.axis] - cut.prototype[cut.axis]) > r else node.right
    return int(node.leaf)


@dataclass(frozen=True)
class KernelPriceReport:
    """Embedding-space price of a kernel tree."""

    price: float
    price_hat: float
    error_rate: float
    baseline_cost: float
    tree_cost: float
    mc_samples: int
    mc_seed: int
    fallback_leaves: tuple = ()

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "price": self.price,
            "price_hat": self.price_hat,
            "error_rate": self.error_rate,
            "baseline_cost": self.baseline_cost,
            "tree_cost": self.tree_cost,
            "mc_samples": self.mc_samples,
            "mc_seed": self.mc_seed,
            "fallback_leaves": list(self.fallback_leaves),
        }


def kernel_price(
    model: MixtureModel,
    kernel: KernelSpec,
    tree: KernelTree,
    n: int = 0,
    seed: int = 0,
    mode: str = "exact",
    leaf_subsample: int = 2048,
) -> KernelPriceReport:
    """Price of the kernel tree in the embedding space.

    Baseline: E||phi(x) - phi_{component(x)}||^2.  The tree cost is reported
    both with leaf-conditional mean embeddings (price) and with the assigned
    component embedding (price_hat).  Exact for all-discrete models; the MC
    path plugs in empirical leaf embeddings, subsampling each leaf's
    quadratic term at ``leaf_subsample`` points.
    """
    _check_kernel_dim(model, kernel)
    if tree.dim != model.dim or tree.n_leaves != model.k:
        raise IncompatibilityError("tree does not match the model")

    if mode == "exact":
        _require_discrete(model, "kernel_price")
        pts, w, comp = [], [], []
        for k, c in enumerate(model.components):
            pts.append(c.support)
            w.append(model.weights[k] * c.mass)
            comp.append(np.full(c.support.shape[0], k, dtype=int))
        pts = np.vstack(pts)
        w = np.concatenate(w)
        comp = np.concatenate(comp)
    else:
        if n < 100:
            raise ValidationError("kernel_price in mc mode needs n >= 100")
        rng = np.random.default_rng(seed)
        labels = rng.choice(model.k, size=n, p=model.weights)
        pts = np.empty((n, model.dim))
        for k, c in enumerate(model.components):
            mask = labels == k
            if mask.any():
                pts[mask] = c.sample(rng, int(mask.sum()))
        w = np.full(n, 1.0 / n)
        comp = labels

    assigned = kernel_assign(tree, pts)

    # Per-component statistics; for mc mode these are empirical per class.
    if mode == "exact":
        comp_support = [c.support for c in model.components]
        comp_mass = [c.mass for c in model.components]
    else:
        comp_support, comp_mass = [], []
        for k in range(model.k):
            rows = pts[comp == k]
            if rows.shape[0] == 0:
                rows = model.components[k].sample(np.random.default_rng(seed ^ (k + 1)), 2)
            if rows.shape[0] > leaf_subsample:
                sel = np.random.default_rng(seed ^ (k + 101)).choice(
                    rows.shape[0], leaf_subsample, replace=False
                )
                rows = rows[sel]
            comp_support.append(rows)
            comp_mass.append(np.full(rows.shape[0], 1.0 / rows.shape[0]))

    self_sim = np.array(
        [comp_mass[k] @ _full_gram(kernel, comp_support[k], comp_support[k]) @ comp_mass[k]
         for k in range(model.k)]
    )

    def cross_to_component(points: np.ndarray, k: int) -> np.ndarray:
        return _full_gram(kernel, points, comp_support[k]) @ comp_mass[k]

    # ||phi(x) - phi_k||^2 = 1 + ||phi_k||^2 - 2 E_y kappa(x, y)
    cost_own = np.empty(pts.shape[0])
    cost_hat = np.empty(pts.shape[0])
    for k in range(model.k):
        mask_own = comp == k
        if mask_own.any():
            cost_own[mask_own] = 1.0 + self_sim[k] - 2.0 * cross_to_component(pts[mask_own], k)
        mask_hat = assigned == k
        if mask_hat.any():
            cost_hat[mask_hat] = 1.0 + self_sim[k] - 2.0 * cross_to_component(pts[mask_hat], k)

    # Leaf-conditional embeddings.
    cost_tilde = np.empty(pts.shape[0])
    fallbacks: list[int] = []
    for leaf in range(model.k):
        mask = assigned == leaf
        if not mask.any():
            fallbacks.append(leaf)
            continue
        rows, rw = pts[mask], w[mask]
        if rows.shape[0] > leaf_subsample:
            sel = np.random.default_rng(seed ^ (leaf + 7919)).choice(
                rows.shape[0], leaf_subsample, replace=False, p=rw / rw.sum()
            )
            q_pts, q = rows[sel], np.full(leaf_subsample, 1.0 / leaf_subsample)
        else:
            q_pts, q = rows, rw / rw.sum()
        leaf_norm = float(q @ _full_gram(kernel, q_pts, q_pts) @ q)
        cross = _full_gram(kernel, rows, q_pts) @ q
        cost_tilde[mask] = 1.0 + leaf_norm - 2.0 * cross

    baseline = float(w @ cost_own)
    tree_cost = float(w @ cost_tilde)
    return KernelPriceReport(
        price=_ratio(tree_cost, baseline),
        price_hat=_ratio(float(w @ cost_hat), baseline),
        error_rate=float(w @ (assigned != comp)),
        baseline_cost=baseline,
        tree_cost=tree_cost,
        mc_samples=0 if mode == "exact" else n,
        mc_seed=seed,
        fallback_leaves=tuple(fallbacks),
    )


def thm5_bound(alpha: float, k: int, sigma2: float, eps2: float, tau: float) -> float:
    """Kernel price upper bound
    1 + ((1 + sigma2) / (1 - sigma2)) * max(1, C * alpha * eps2 * K(K-1) / (sigma2 - tau))."""
    from .evaluate import BOUND_CONSTANT

    if not 0.0 < sigma2 < 1.0:
        raise ValidationError("sigma2 must lie in (0, 1)")
    if tau >= sigma2:
        raise ValidationError("similarity exceeds self-similarity")
    if alpha < 1 or k < 2 or eps2 < 0:
        raise ValidationError("need alpha >= 1, K >= 2, eps2 >= 0")
    inner = BOUND_CONSTANT * alpha * eps2 * k * (k - 1) / (sigma2 - tau)
    return 1.0 + (1.0 + sigma2) / (1.0 - sigma2) * max(1.0, inner)


def check_structure(tree: KernelTree, stats: KernelStats) -> None:
    """Assert structural invariants: K leaves mapped bijectively onto
    components and, at every internal node, the xi values of the two sides
    strictly straddle the threshold (so each component's path is consistent
    with its similarity to the anchor)."""
    seen: list[int] = []

    def walk(node: KernelNode, comps: list[int]) -> None:
        if node.is_leaf:
            if comps != [node.leaf]:
                raise ValidationError(f"leaf {node.leaf} does not match remaining set {comps}")
            seen.append(node.leaf)
            return
        cut = node.cut
        if cut.anchor not in comps:
            raise ValidationError("cut anchor is not among the node's components")
        left = [m for m in comps if stats.xi_table[cut.axis, cut.anchor, m] < cut.theta]
        right = [m for m in comps if stats.xi_table[cut.axis, cut.anchor, m] > cut.theta]
        if sorted(left + right) != sorted(comps) or not left or not right:
            raise ValidationError("threshold does not split the node's components")
        walk(node.left, left)
        walk(node.right, right)

    walk(tree.root, list(range(tree.n_leaves)))
    if sorted(seen) != list(range(tree.n_leaves)):
        raise ValidationError("leaves are not a bijection onto components")


def export_dot(tree: KernelTree) -> str:
    """DOT rendering with interval labels ``|x_i - p| > r`` on the yes edge."""
    lines = ["digraph kernel_tree {", "  node [shape=box];"]
    counter = [0]

    def walk(node: KernelNode) -> int:
        idx = counter[0]
        counter[0] += 1
        if node.is_leaf:
            lines.append(f'  n{idx} [label="component {node.leaf}", shape=ellipse];')
            return idx
        cut = node.cut
        r = cut_interval(cut, tree.kernel)
        proto = cut.prototype[cut.axis]
        lines.append(f'  n{idx} [label="|x{cut.axis + 1} - {proto:.6g}| > {r:.6g}"];')
        l = walk(node.left)
        rr = walk(node.right)
        lines.append(f'  n{idx} -> n{l} [label="yes"];')
        lines.append(f'  n{idx} -> n{rr} [label="no"];')
        return idx

    walk(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"
