"""Shared generators for seeded model batteries."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from mmdt import Component, KernelSpec, MixtureModel, enr

DATA_DIR = Path(__file__).parent / "data"


def gaussian_battery(i: int) -> MixtureModel:
    """Seeded diagonal-Gaussian mixture with K in 2..5, d in 2..8 and the
    explainability-to-noise ratio placed log-uniformly in [1e2, 1e6]."""
    rng = np.random.default_rng(2000 + i)
    k = int(rng.integers(2, 6))
    d = int(rng.integers(2, 9))
    means = rng.uniform(-50.0, 50.0, size=(k, d))
    sigma = rng.uniform(0.5, 2.0, size=d)
    w = rng.dirichlet(np.full(k, 3.0))
    w = np.maximum(w, 0.02)
    w /= w.sum()
    target = 10.0 ** rng.uniform(2.0, 6.0)
    comps = tuple(Component.gaussian(means[j], sigma) for j in range(k))
    rough = MixtureModel.create(comps, w, sigma=sigma)
    scale = math.sqrt(enr(rough) / target)
    sigma = sigma * scale
    comps = tuple(Component.gaussian(means[j], sigma) for j in range(k))
    return MixtureModel.create(comps, w, sigma=sigma)


def translate_battery(seed: int, k_max: int = 4) -> tuple[MixtureModel, KernelSpec]:
    """Seeded all-discrete mixture whose components are translates of a
    common base law (equal kernel self-similarity by construction), shifted
    along one axis far enough that every pair is clearly separated there,
    plus a gaussian-profile kernel scaled to that separation."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, k_max + 1))
    d = int(rng.integers(1, 6))
    m = int(rng.integers(2, 6))
    diameter = 0.6
    base = rng.uniform(0.0, diameter, size=(m, d))
    mass = rng.integers(1, 6, size=m).astype(float)
    mass /= mass.sum()
    axis = int(rng.integers(0, d))
    gap = diameter + rng.uniform(1.5, 3.0)
    shifts = np.zeros((k, d))
    for j in range(k):
        shifts[j, axis] = j * gap
        for other in range(d):
            if other != axis:
                shifts[j, other] = rng.uniform(-0.1, 0.1)
    comps = tuple(Component.discrete(base + shifts[j], mass) for j in range(k))
    w = 1.0 + 0.2 * rng.uniform(0.0, 1.0, k)
    w /= w.sum()
    model = MixtureModel.create(comps, w)
    gamma = rng.uniform(2.3, 10.0) / gap**2
    return model, KernelSpec.uniform("gaussian", gamma, d)


def random_discrete_model(seed: int, k_max: int = 4, d_max: int = 4) -> MixtureModel:
    """Unstructured all-discrete mixture (component norms generally differ)."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, k_max + 1))
    d = int(rng.integers(1, d_max + 1))
    comps = []
    for j in range(k):
        m = int(rng.integers(2, 7))
        sup = rng.normal(scale=0.5, size=(m, d)) + rng.uniform(-4.0, 4.0, size=d)
        mass = rng.integers(1, 5, size=m).astype(float)
        mass /= mass.sum()
        comps.append(Component.discrete(sup, mass))
    w = rng.dirichlet(np.full(k, 4.0))
    w = np.maximum(w, 0.05)
    w /= w.sum()
    return MixtureModel.create(tuple(comps), w)
