"""Mixture models: representation, sampling, moment summaries, and EM estimation.

A mixture is a weighted collection of components, each either a diagonal
Gaussian or a finite discrete distribution.  Besides the component
parameters, the model carries per-axis mixture standard deviations (the
pooled within-component noise scale used by the tree builder) and the
weight-cap parameter alpha with p_k <= alpha / K.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

GAUSSIAN = "gaussian-diagonal"
DISCRETE = "finite-discrete"

# The model assumes strictly positive noise scales; degenerate data is
# floored here instead of dividing by zero downstream.
VARIANCE_FLOOR = 1e-12

_MASS_TOL = 1e-9


def _as_float_array(x, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Component:
    """One mixture component: a diagonal Gaussian or a finite discrete law.

    Gaussian components carry per-axis standard deviations; discrete
    components carry support points and probability masses.  The stored mean
    must equal the distribution mean (checked to 1e-9 for discrete ones).
    """

    kind: str
    mean: np.ndarray
    stddev: np.ndarray | None = None
    support: np.ndarray | None = None
    mass: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_float_array(self.mean, "mean", 1))
        if self.kind == GAUSSIAN:
            if self.stddev is None:
                raise ValidationError("gaussian-diagonal component needs stddev")
            std = _as_float_array(self.stddev, "stddev", 1)
            if std.shape != self.mean.shape:
                raise ValidationError("stddev and mean dimensions differ")
            if np.any(std <= 0):
                raise ValidationError("gaussian stddev must be strictly positive")
            object.__setattr__(self, "stddev", std)
        elif self.kind == DISCRETE:
            if self.support is None or self.mass is None:
                raise ValidationError("finite-discrete component needs support and mass")
            sup = _as_float_array(self.support, "support", 2)
            mass = _as_float_array(self.mass, "mass", 1)
            if sup.shape[0] != mass.shape[0] or sup.shape[0] == 0:
                raise ValidationError("support and mass sizes differ or are empty")
            if sup.shape[1] != self.mean.shape[0]:
                raise ValidationError("support dimension does not match mean")
            if np.any(mass <= 0):
                raise ValidationError("all masses must be positive")
            if abs(mass.sum() - 1.0) > _MASS_TOL:
                raise ValidationError(f"masses sum to {mass.sum()!r}, expected 1")
            implied = mass @ sup
            if np.max(np.abs(implied - self.mean)) > _MASS_TOL:
                raise ValidationError("mean field does not match mass-weighted support average")
            object.__setattr__(self, "support", sup)
            object.__setattr__(self, "mass", mass)
        else:
            raise ValidationError(f"unknown component kind {self.kind!r}")

    @staticmethod
    def gaussian(mean, stddev) -> "Component":
        return Component(kind=GAUSSIAN, mean=mean, stddev=stddev)

    @staticmethod
    def discrete(support, mass, mean=None) -> "Component":
        support = np.asarray(support, dtype=float)
        mass = np.asarray(mass, dtype=float)
        if mean is None:
            mean = mass @ support
        return Component(kind=DISCRETE, mean=mean, support=support, mass=mass)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def variances(self) -> np.ndarray:
        """Per-axis variance of the component (floored)."""
        if self.kind == GAUSSIAN:
            var = self.stddev**2
        else:
            var = self.mass @ (self.support - self.mean) ** 2
        return np.maximum(var, VARIANCE_FLOOR)

    def abs_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis (E|x - mean|, E|x - mean|^2), exact for both kinds."""
        if self.kind == GAUSSIAN:
            first = self.stddev * np.sqrt(2.0 / np.pi)
            second = self.stddev**2
        else:
            dev = np.abs(self.support - self.mean)
            first = self.mass @ dev
            second = self.mass @ dev**2
        return first, second

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == GAUSSIAN:
            return self.mean + self.stddev * rng.standard_normal((n, self.dim))
        idx = rng.choice(self.support.shape[0], size=n, p=self.mass)
        return self.support[idx]

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "mean": self.mean.tolist()}
        if self.kind == GAUSSIAN:
            out["stddev"] = self.stddev.tolist()
        else:
            out["support"] = self.support.tolist()
            out["mass"] = self.mass.tolist()
        return out

    @staticmethod
    def from_dict(d: dict) -> "Component":
        kind = d.get("kind")
        if kind == GAUSSIAN:
            return Component(kind=GAUSSIAN, mean=d["mean"], stddev=d["stddev"])
        if kind == DISCRETE:
            return Component(kind=DISCRETE, mean=d["mean"], support=d["support"], mass=d["mass"])
        raise ValidationError(f"unknown component kind {kind!r}")


@dataclass(frozen=True)
class MixtureModel:
    """K weighted components plus per-axis noise scales sigma and cap alpha.

    Invariants: weights sum to one, every weight respects p_k <= alpha / K,
    sigma > 0 per axis, and component means are pairwise distinct.  A single
    component is allowed for sampling/fitting; operations that require at
    least two components reject it themselves.
    """

    components: tuple[Component, ...]
    weights: np.ndarray
    sigma: np.ndarray
    alpha: float

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ValidationError("need at least one component")
        d = comps[0].dim
        if any(c.dim != d for c in comps):
            raise ValidationError("components have inconsistent dimensions")
        w = _as_float_array(self.weights, "weights", 1)
        if w.shape[0] != len(comps):
            raise ValidationError("weights length does not match component count")
        if np.any(w <= 0):
            raise ValidationError("weights must be positive")
        if abs(w.sum() - 1.0) > _MASS_TOL:
            raise ValidationError(f"weights sum to {w.sum()!r}, expected 1")
        if not np.isfinite(self.alpha) or self.alpha < 1.0:
            raise ValidationError("alpha must be a real >= 1")
        k = len(comps)
        if np.any(w > self.alpha / k + 1e-9):
            raise ValidationError("some weight exceeds alpha / K")
        sig = _as_float_array(self.sigma, "sigma", 1)
        if sig.shape[0] != d:
            raise ValidationError("sigma dimension does not match components")
        if np.any(sig <= 0):
            raise ValidationError("sigma must be strictly positive")
        means = np.array([c.mean for c in comps])
        for a in range(k):
            for b in range(a + 1, k):
                if np.array_equal(means[a], means[b]):
                    raise ValidationError(f"components {a} and {b} share the same mean")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "alpha", float(self.alpha))

    @staticmethod
    def create(components, weights, alpha: float | None = None, sigma=None) -> "MixtureModel":
        """Build a model, deriving sigma (pooled within-component std) and
        alpha (K * max weight) when not supplied."""
        comps = tuple(components)
        w = np.asarray(weights, dtype=float)
        if sigma is None:
            pooled = np.zeros(comps[0].dim)
            for c, p in zip(comps, w):
                pooled += p * c.variances()
            sigma = np.sqrt(np.maximum(pooled, VARIANCE_FLOOR))
        if alpha is None:
            alpha = max(1.0, len(comps) * float(np.max(w)))
        return MixtureModel(components=comps, weights=w, sigma=sigma, alpha=alpha)

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def means(self) -> np.ndarray:
        """Component means as a (K, d) array."""
        return np.array([c.mean for c in self.components])

    def all_discrete(self) -> bool:
        return all(c.kind == DISCRETE for c in self.components)

    def all_gaussian(self) -> bool:
        return all(c.kind == GAUSSIAN for c in self.components)

    def scale_shift(self, scale, shift) -> "MixtureModel":
        """Apply x_j -> a_j * x_j + b_j (a_j > 0) jointly to all parameters."""
        a = np.asarray(scale, dtype=float)
        b = np.asarray(shift, dtype=float)
        if np.any(a <= 0):
            raise ValidationError("scale factors must be positive")
        comps = []
        for c in self.components:
            if c.kind == GAUSSIAN:
                comps.append(Component.gaussian(a * c.mean + b, a * c.stddev))
            else:
                comps.append(Component.discrete(a * c.support + b, c.mass, mean=a * c.mean + b))
        return MixtureModel(
            components=tuple(comps), weights=self.weights, sigma=a * self.sigma, alpha=self.alpha
        )

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "dim": self.dim,
            "alpha": self.alpha,
            "weights": self.weights.tolist(),
            "sigma": self.sigma.tolist(),
            "components": [c.to_dict() for c in self.components],
        }

    @staticmethod
    def from_dict(d: dict) -> "MixtureModel":
        comps = tuple(Component.from_dict(c) for c in d["components"])
        sigma = d.get("sigma")
        alpha = d.get("alpha")
        model = MixtureModel.create(comps, d["weights"], alpha=alpha, sigma=sigma)
        if "dim" in d and int(d["dim"]) != model.dim:
            raise ValidationError(f"declared dim {d['dim']} does not match components")
        return model

    def fingerprint(self) -> str:
        """Stable hash of the canonical model JSON."""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LabeledDataset:
    """N x d points with optional integer component labels (0-based)."""

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = _as_float_array(self.points, "points", 2)
        if pts.shape[0] < 1:
            raise ValidationError("dataset needs at least one row")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=int)
            if lab.shape != (pts.shape[0],):
                raise ValidationError("labels length does not match points")
            if np.any(lab < 0):
                raise ValidationError("labels must be non-negative component indices")
            lab = lab.copy()
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def enr(model: MixtureModel) -> float:
    """Explainability-to-noise ratio: min over component pairs of the max
    per-axis squared mean gap divided by the axis variance."""
    if model.k < 2:
        raise ValidationError("need at least two components")
    means = model.means()
    inv_var = 1.0 / model.sigma**2
    best = np.inf
    for a in range(model.k):
        for b in range(a + 1, model.k):
            ratio = np.max((means[a] - means[b]) ** 2 * inv_var)
            best = min(best, ratio)
    return float(best)


def snr(model: MixtureModel) -> float:
    """Signal-to-noise ratio: min over pairs of the variance-weighted squared
    distance between means, summed over axes."""
    if model.k < 2:
        raise ValidationError("need at least two components")
    means = model.means()
    inv_var = 1.0 / model.sigma**2
    best = np.inf
    for a in range(model.k):
        for b in range(a + 1, model.k):
            total = np.sum((means[a] - means[b]) ** 2 * inv_var)
            best = min(best, total)
    return float(best)


def sample(model: MixtureModel, n: int, seed: int) -> LabeledDataset:
    """Draw n labeled points; bit-identical output for identical inputs."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.choice(model.k, size=n, p=model.weights)
    points = np.empty((n, model.dim))
    for k, comp in enumerate(model.components):
        mask = labels == k
        cnt = int(mask.sum())
        if cnt:
            points[mask] = comp.sample(rng, cnt)
    return LabeledDataset(points=points, labels=labels)


def _log_gaussian_diag(points: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    # (n, K) log densities for diagonal Gaussians.
    diff = points[:, None, :] - means[None, :, :]
    mahal = np.sum(diff**2 / variances[None, :, :], axis=2)
    logdet = np.sum(np.log(variances), axis=1)
    d = points.shape[1]
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet[None, :] + mahal)


def _farthest_point_seeds(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[chosen].copy()


def fit_gmm(
    data: LabeledDataset,
    k: int,
    seed: int = 0,
    max_iters: int = 200,
    tol: float = 1e-6,
    return_history: bool = False,
):
    """Diagonal-covariance EM.

    Means start from farthest-point seeding (first seed drawn from ``seed``),
    variances at unit scale.  Iterates until the total log-likelihood improves
    by less than ``tol`` or ``max_iters`` is hit.  An empty component is
    reseeded at the worst-explained point.  The log-likelihood trace is
    asserted non-decreasing except immediately after a reseed.
    """
    X = data.points
    n, d = X.shape
    if k < 1:
        raise ValidationError("k must be >= 1")
    if n < k:
        raise ValidationError(f"need at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)
    means = _farthest_point_seeds(X, k, rng)
    variances = np.ones((k, d))
    weights = np.full(k, 1.0 / k)

    history: list[float] = []
    prev_ll = -np.inf
    check_monotone = False
    for _ in range(max_iters):
        log_prob = _log_gaussian_diag(X, means, variances) + np.log(weights)[None, :]
        log_norm = np.logaddexp.reduce(log_prob, axis=1)
        ll = float(log_norm.sum())
        if check_monotone:
            assert ll >= prev_ll - 1e-7 * max(1.0, abs(prev_ll)), "EM log-likelihood decreased"
        history.append(ll)
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll
        check_monotone = True

        resp = np.exp(log_prob - log_norm[:, None])
        nk = resp.sum(axis=0)
        empty = nk < 1e-10
        if np.any(empty):
            # Reseed dead components at the point the model explains worst.
            worst = int(np.argmin(log_norm))
            global_var = np.maximum(X.var(axis=0), VARIANCE_FLOOR)
            for j in np.flatnonzero(empty):
                means[j] = X[worst]
                variances[j] = global_var
                weights[j] = 1.0 / n
            weights = weights / weights.sum()
            check_monotone = False
            prev_ll = -np.inf
            continue

        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        diff2 = (X[:, None, :] - means[None, :, :]) ** 2
        variances = np.einsum("nk,nkd->kd", resp, diff2) / nk[:, None]
        variances = np.maximum(variances, VARIANCE_FLOOR)

    comps = tuple(Component.gaussian(means[j], np.sqrt(variances[j])) for j in range(k))
    alpha = max(1.0, k * float(weights.max()))
    model = MixtureModel.create(comps, weights, alpha=alpha)
    if return_history:
        return model, history
    return model


def log_likelihood(model: MixtureModel, data: LabeledDataset) -> float:
    """Total log-likelihood of a Gaussian model on a dataset."""
    if not model.all_gaussian():
        raise ValidationError("log_likelihood requires gaussian components")
    means = model.means()
    variances = np.array([c.stddev**2 for c in model.components])
    log_prob = _log_gaussian_diag(data.points, means, variances) + np.log(model.weights)[None, :]
    return float(np.logaddexp.reduce(log_prob, axis=1).sum())


def empirical_moments(data: LabeledDataset, k: int) -> MixtureModel:
    """Ground-truth-label path: per-label discrete components with uniform
    mass, weights from label frequencies, sigma pooled within components."""
    if data.labels is None:
        raise ValidationError("empirical_moments requires labels")
    comps = []
    weights = []
    pooled = np.zeros(data.dim)
    n = data.n
    for label in range(k):
        rows = data.points[data.labels == label]
        if rows.shape[0] == 0:
            raise ValidationError(f"label class {label} has no points")
        # Shuffle-invariant support order.
        order = np.lexsort(rows.T[::-1])
        rows = rows[order]
        mass = np.full(rows.shape[0], 1.0 / rows.shape[0])
        comp = Component.discrete(rows, mass)
        comps.append(comp)
        weights.append(rows.shape[0] / n)
        pooled += (rows.shape[0] / n) * comp.variances()
    sigma = np.sqrt(np.maximum(pooled, VARIANCE_FLOOR))
    return MixtureModel.create(tuple(comps), np.array(weights), sigma=sigma)
