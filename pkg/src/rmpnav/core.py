"""Policy algebra: (acceleration, metric) pairs and their metric-weighted
combination.

A policy is an instantaneous acceleration together with a positive
semi-definite metric that says how strongly, and along which directions, that
acceleration should count when many policies are merged. Combination solves
the metric-weighted least-squares problem

    f_c = (sum_i A_i)^+  sum_i A_i f_i,      A_c = sum_i A_i

so a policy with a zero metric contributes nothing and a rank-one metric only
votes along its own direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Policy", "RobotState", "soft_normalize", "combine", "pinv_psd"]

# Relative eigenvalue cutoff for the pseudoinverse of a summed metric. Summed
# ray metrics are routinely rank-deficient (all hits on one side), so the
# inverse must zero the null space instead of exploding.
PINV_RCOND = 1e-8

_EIG_FLOOR = -1e-9


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    return a


@dataclass(frozen=True)
class Policy:
    """An acceleration request paired with its weight metric.

    The metric is symmetrized on construction; callers may hand in slightly
    asymmetric accumulations without ceremony.
    """

    accel: np.ndarray
    metric: np.ndarray

    def __post_init__(self):
        accel = _as_vec3(self.accel)
        metric = np.asarray(self.metric, dtype=float).reshape(3, 3)
        metric = 0.5 * (metric + metric.T)
        if not np.all(np.isfinite(accel)):
            raise ValueError("policy acceleration must be finite")
        if not np.all(np.isfinite(metric)):
            raise ValueError("policy metric must be finite")
        object.__setattr__(self, "accel", accel)
        object.__setattr__(self, "metric", metric)

    def is_psd(self, tol: float = -_EIG_FLOOR) -> bool:
        return bool(np.linalg.eigvalsh(self.metric).min() >= -tol)

    @staticmethod
    def zero() -> "Policy":
        return Policy(np.zeros(3), np.zeros((3, 3)))

    @staticmethod
    def identity_metric(accel) -> "Policy":
        return Policy(accel, np.eye(3))


@dataclass(frozen=True)
class RobotState:
    """Position and velocity of the point robot."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        pos = _as_vec3(self.position)
        vel = _as_vec3(self.velocity)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("robot state must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)


def soft_normalize(v, c: float) -> np.ndarray:
    """Smoothly normalize ``v``: near-linear at the origin, approaching the
    unit vector for large inputs, with norm strictly below 1.

        s(v) = v / (|v| + c * log(1 + exp(-2 c |v|)))

    The exponential acts on the scalar norm; ``c`` controls how quickly the
    output saturates. The zero vector maps to the zero vector.
    """
    if c <= 0:
        raise ValueError("soft_normalize requires c > 0")
    v = _as_vec3(v)
    n = float(np.linalg.norm(v))
    denom = n + c * np.log1p(np.exp(-2.0 * c * n))
    return v / denom


def pinv_psd(a: np.ndarray, rcond: float = PINV_RCOND) -> np.ndarray:
    """Pseudoinverse of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues at or below ``rcond * max_eig`` are treated as zero rank, so
    the zero matrix inverts to the zero matrix.
    """
    a = np.asarray(a, dtype=float)
    w, vecs = np.linalg.eigh(0.5 * (a + a.T))
    cutoff = rcond * max(float(w.max()), 0.0)
    keep = w > cutoff
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return (vecs * inv) @ vecs.T


def _pairwise_sum(stack: np.ndarray) -> np.ndarray:
    """Fixed-shape pairwise (tree) reduction along axis 0."""
    while stack.shape[0] > 1:
        n = stack.shape[0]
        half = n // 2
        folded = stack[: 2 * half : 2] + stack[1 : 2 * half : 2]
        if n % 2:
            folded = np.concatenate([folded, stack[-1:]], axis=0)
        stack = folded
    return stack[0]


def combine(policies: list[Policy]) -> Policy:
    """Merge policies into their metric-weighted mean.

    Accepts pre-reduced partial results as ordinary policies: a policy built
    from partial sums ``((sum A)^+ sum A f, sum A)`` recombines exactly, so
    parallel callers may tree-reduce in any grouping.
    """
    if not policies:
        raise ValueError("combine requires at least one policy")
    metrics = np.stack([p.metric for p in policies])
    weighted = np.stack([p.metric @ p.accel for p in policies])
    metric_sum = _pairwise_sum(metrics)
    accel_sum = _pairwise_sum(weighted)
    accel = pinv_psd(metric_sum) @ accel_sum
    return Policy(accel, metric_sum)
