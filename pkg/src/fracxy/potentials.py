"""Bond interaction potentials: base well profile, n-fold wells, truncation.

The base profile f is 2*pi-periodic, vanishes exactly on 2*pi*Z, dominates
1 - cos t, and is quadratic at the bottom of the wells. The n-fold profile
f(n t) has n wells per period; the truncated potential lifts every well
except the primary one to a flat floor at the truncation level, producing
a plateau on which bonds pay a fixed price.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Registry of base profiles: name -> (f, f'). Profiles must be 2*pi-periodic,
# vanish exactly on 2*pi*Z, and dominate 1 - cos t.
BASE_PROFILES = {
    "cosine": (lambda t: 1.0 - np.cos(t), np.sin),
}


def wrap_angle(t):
    """Representative of t mod 2*pi in (-pi, pi]."""
    t = np.asarray(t, dtype=float)
    w = np.mod(t + np.pi, TWO_PI) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def angle_dist(t):
    """Distance from t to the nearest multiple of 2*pi."""
    return np.abs(wrap_angle(t))


@dataclass(frozen=True)
class PotentialSpec:
    """Well count, truncation level, and base profile of the bond potential."""

    n: int
    epsilon: float
    base: str = "cosine"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"well count n must be >= 1, got {self.n}")
        if self.base not in BASE_PROFILES:
            raise ValueError(f"unknown base profile {self.base!r}")
        f, _ = BASE_PROFILES[self.base]
        if not 0.0 < self.epsilon < float(f(np.pi)):
            raise ValueError(
                f"truncation level must lie in (0, f(pi)) = (0, {float(f(np.pi))}), "
                f"got {self.epsilon}"
            )


def eval_base(spec: PotentialSpec, t):
    """Base profile f(t); nonnegative and 2*pi-periodic."""
    f, _ = BASE_PROFILES[spec.base]
    return f(np.asarray(t, dtype=float))


def eval_fn_eps(spec: PotentialSpec, t):
    """Truncated n-well potential.

    Equals f(n t) within the primary well band dist(t, 2*pi*Z) <= pi/n and
    max(f(n t), epsilon) outside it. For epsilon < f(pi) the two branches
    agree at the band edges, so the half-open endpoint convention of the
    truncation intervals is immaterial.
    """
    t = np.asarray(t, dtype=float)
    f, _ = BASE_PROFILES[spec.base]
    val = f(spec.n * t)
    outside = angle_dist(t) > np.pi / spec.n
    return np.where(outside, np.maximum(val, spec.epsilon), val)


def plateau_mask(spec: PotentialSpec, t):
    """True where the truncation floor is active: f(n t) < eps off the main band."""
    t = np.asarray(t, dtype=float)
    f, _ = BASE_PROFILES[spec.base]
    return (angle_dist(t) > np.pi / spec.n) & (f(spec.n * t) < spec.epsilon)


def subgradient_fn_eps(spec: PotentialSpec, t):
    """A subgradient selection for the truncated potential.

    Returns n*f'(n t) wherever the smooth branch is active (main band or
    f(n t) >= epsilon) and 0 on the open plateau. At the plateau edges the
    smooth-side value is returned.
    """
    t = np.asarray(t, dtype=float)
    _, fprime = BASE_PROFILES[spec.base]
    smooth = spec.n * fprime(spec.n * t)
    return np.where(plateau_mask(spec, t), 0.0, smooth)
