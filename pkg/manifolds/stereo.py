"""
kappa-stereographic gyrovector operations.

One chart for all three geometries: kappa < 0 is the Poincare ball of radius
1/sqrt(-kappa), kappa = 0 is Euclidean space and kappa > 0 is the stereographic
sphere. Points are the rows of the last axis. Every function accepts numpy
arrays or autograd Tensors (curvature included) and returns the same kind.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from core import autograd as ag
from core.exceptions import DimensionMismatch, DomainError

MIN_NORM = 1e-15
SMALL_NORM = 1e-8
BALL_EPS = 1e-5
POLE_TOL = 1e-12
DENOM_TOL = 1e-15


def curvature_sign(kappa) -> int:
    k = float(ag.value_of(kappa))
    return 0 if k == 0.0 else (1 if k > 0.0 else -1)


def _sqrt_abs(kappa):
    return ag.sqrt(ag.abs(kappa))


def _sqnorm(x):
    return ag.sum(x * x, axis=-1, keepdims=True)


def _dot(x, y):
    return ag.sum(x * y, axis=-1, keepdims=True)


def _norm(x):
    return ag.norm(x, axis=-1, keepdims=True)


# -----------------------------
# Curvature-dependent trigonometry
# -----------------------------

def tan_k(u, kappa):
    """tan for kappa > 0, tanh for kappa < 0, identity for kappa = 0."""
    sign = curvature_sign(kappa)
    if sign > 0:
        if np.any(np.abs(np.cos(ag.value_of(u))) < POLE_TOL):
            raise DomainError("tan_k evaluated at a pole")
        return ag.tan(u)
    if sign < 0:
        return ag.tanh(u)
    return u


def arctan_k(u, kappa):
    """Inverse of tan_k."""
    sign = curvature_sign(kappa)
    if sign > 0:
        return ag.arctan(u)
    if sign < 0:
        if np.any(np.abs(ag.value_of(u)) >= 1.0):
            raise DomainError("arctanh argument outside (-1, 1); point left the ball")
        return ag.arctanh(u)
    return u


def _tan_ratio(n, kappa):
    """tan_k(sqrt|k| n) / (sqrt|k| n), continued by 1 at n = 0."""
    sk = _sqrt_abs(kappa)
    small = ag.value_of(n) < SMALL_NORM
    safe = ag.maximum(n, SMALL_NORM)
    return ag.where(small, 1.0, tan_k(sk * safe, kappa) / (sk * safe))


def _arctan_ratio(n, kappa):
    """arctan_k(sqrt|k| n) / (sqrt|k| n), continued by 1 at n = 0."""
    sk = _sqrt_abs(kappa)
    small = ag.value_of(n) < SMALL_NORM
    safe = ag.maximum(n, SMALL_NORM)
    return ag.where(small, 1.0, arctan_k(sk * safe, kappa) / (sk * safe))


# -----------------------------
# Point operations
# -----------------------------

def conformal_factor(x, kappa):
    """lambda_x = 2 / (1 + kappa |x|^2)."""
    return 2.0 / (1.0 + kappa * _sqnorm(x))


def project(x, kappa):
    """Pull ball points back inside radius (1 - 1e-5) / sqrt(-kappa); other geometries pass through."""
    if curvature_sign(kappa) >= 0:
        return x
    max_norm = (1.0 - BALL_EPS) / _sqrt_abs(kappa)
    n = _norm(x)
    outside = ag.value_of(n) > ag.value_of(max_norm)
    return x * ag.where(outside, max_norm / ag.maximum(n, MIN_NORM), 1.0)


def in_domain(x, kappa) -> bool:
    """-kappa |x|^2 < 1 for every row."""
    k = float(ag.value_of(kappa))
    sq = np.sum(np.asarray(ag.value_of(x)) ** 2, axis=-1)
    return bool(np.all(-k * sq < 1.0))


def mobius_add(x, y, kappa, projected: bool = True):
    """x (+)_k y; not associative, so folds are evaluated left to right."""
    if curvature_sign(kappa) == 0:
        return x + y
    xy = _dot(x, y)
    x2 = _sqnorm(x)
    y2 = _sqnorm(y)
    num = (1.0 - 2.0 * kappa * xy - kappa * y2) * x + (1.0 + kappa * x2) * y
    den = 1.0 - 2.0 * kappa * xy + kappa * kappa * x2 * y2
    if np.any(np.abs(ag.value_of(den)) < DENOM_TOL):
        raise DomainError("Mobius addition denominator vanished")
    out = num / den
    return project(out, kappa) if projected else out


def exp0(v, kappa):
    """Exponential map at the origin."""
    if curvature_sign(kappa) == 0:
        return v
    return project(_tan_ratio(_norm(v), kappa) * v, kappa)


def log0(y, kappa):
    """Logarithmic map at the origin."""
    if curvature_sign(kappa) == 0:
        return y
    return _arctan_ratio(_norm(y), kappa) * y


def exp_map(x, v, kappa):
    """exp_x(v) = x (+) tan_k(sqrt|k| lambda_x |v| / 2) v / (sqrt|k| |v|)."""
    if curvature_sign(kappa) == 0:
        return x + v
    lam = conformal_factor(x, kappa)
    step = _tan_ratio(0.5 * lam * _norm(v), kappa) * (0.5 * lam) * v
    return mobius_add(x, step, kappa)


def log_map(x, y, kappa):
    """Inverse of exp_map; y - x when kappa = 0."""
    if curvature_sign(kappa) == 0:
        return y - x
    w = mobius_add(-x, y, kappa, projected=False)
    lam = conformal_factor(x, kappa)
    return (2.0 / lam) * _arctan_ratio(_norm(w), kappa) * w


def distance(x, y, kappa):
    """
    Geodesic distance 2/sqrt|k| arctan_k(sqrt|k| |(-x) (+) y|); one value per row.

    Not continuous at kappa = 0: the curved branch uses the conformal metric
    (lambda = 2 at the origin) and tends to 2 |x - y| as kappa -> 0, while
    kappa = 0 returns the plain Euclidean |x - y|. Distances are only compared
    within one component, whose curvature sign never changes.
    """
    if curvature_sign(kappa) == 0:
        return ag.norm(x - y, axis=-1)
    w = mobius_add(-x, y, kappa, projected=False)
    n = _norm(w)
    d = 2.0 * _arctan_ratio(n, kappa) * n
    return ag.sum(d, axis=-1)


def kappa_scale(r, x, kappa):
    """r (x)_k x = exp0(r log0(x)); r may be a scalar or one value per row (shape (n, 1))."""
    return exp0(r * log0(x, kappa), kappa)


# -----------------------------
# Matrix operations
# -----------------------------

def kappa_right_matmul(X, W, kappa):
    """
    X (x)_k W row-wise: tan_k(|XW|/|X| arctan_k(sqrt|k| |X|)) XW / (sqrt|k| |XW|),
    written through per-row scalar ratios so zero rows stay at the origin.
    """
    XW = X @ W
    if curvature_sign(kappa) == 0:
        return XW
    inward = _arctan_ratio(_norm(X), kappa)
    outward = _tan_ratio(inward * _norm(XW), kappa)
    return project(outward * inward * XW, kappa)


def _dense(A):
    if sparse.issparse(A):
        return A.toarray()
    return A if ag.is_tensor(A) else np.asarray(A, dtype=np.float64)


def _midpoints(A, X, kappa):
    """
    Row i: weighted gyromidpoint of the rows of X with weights A[i]. On the
    sphere the denominator crosses zero where kappa |x|^2 = 1; it is held at
    +-1e-15 there, which sends the inner point towards the antipodal pole and
    leaves the halved point finite.
    """
    lam = conformal_factor(X, kappa)
    numer = A @ (lam * X)
    denom = A @ (lam - 1.0)
    d = np.asarray(ag.value_of(denom))
    empty = np.all(np.asarray(ag.value_of(A)) == 0.0, axis=1, keepdims=True)
    held = np.where(d < 0.0, -DENOM_TOL, DENOM_TOL)
    denom = ag.where(np.abs(d) < DENOM_TOL, held, denom)
    inner = numer / ag.where(empty, 1.0, denom)
    return kappa_scale(0.5, project(inner, kappa), kappa)


def gyromidpoint(X, a, kappa):
    """m_k(x_1..x_n; a) = 1/2 (x)_k (sum_i a_i lambda_i x_i / sum_j a_j (lambda_j - 1))."""
    a = np.asarray(a, dtype=np.float64).reshape(1, -1)
    if curvature_sign(kappa) == 0:
        total = a.sum()
        if total == 0:
            raise DomainError("gyromidpoint weights sum to zero")
        return ((a / total) @ X)[0]
    return _midpoints(a, X, kappa)[0]


def kappa_left_matmul(A, X, kappa):
    """(A [x]_k X)_i = (sum_j A_ij) (x)_k m_k(X; A_i); plain A X when kappa = 0."""
    A = _dense(A)
    if A.shape[1] != X.shape[0]:
        raise DimensionMismatch(f"cannot multiply {A.shape} by {X.shape}")
    if curvature_sign(kappa) == 0:
        return A @ X
    row_sum = np.asarray(ag.value_of(A)).sum(axis=1, keepdims=True)
    return kappa_scale(row_sum, _midpoints(A, X, kappa), kappa)


# -----------------------------
# Point wrapper
# -----------------------------

@dataclass(frozen=True, eq=False)
class StereoPoint:
    """A single point with its curvature; checks domain membership and pairing."""
    coords: np.ndarray
    kappa: float

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 1:
            raise DimensionMismatch("a point is a vector")
        if not in_domain(coords, self.kappa):
            raise DomainError(f"point outside the kappa={self.kappa} domain")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "kappa", float(self.kappa))

    @classmethod
    def origin(cls, dim: int, kappa: float) -> "StereoPoint":
        return cls(np.zeros(dim), kappa)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def _pair(self, other: "StereoPoint") -> None:
        if other.kappa != self.kappa or other.dim != self.dim:
            raise DimensionMismatch(
                f"points differ: kappa {self.kappa} vs {other.kappa}, dim {self.dim} vs {other.dim}"
            )

    def _tangent(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != self.coords.shape:
            raise DimensionMismatch(f"tangent shape {v.shape} != {self.coords.shape}")
        return v

    def mobius_add(self, other: "StereoPoint") -> "StereoPoint":
        self._pair(other)
        return StereoPoint(mobius_add(self.coords, other.coords, self.kappa), self.kappa)

    def exp_map(self, v) -> "StereoPoint":
        return StereoPoint(exp_map(self.coords, self._tangent(v), self.kappa), self.kappa)

    def log_map(self, other: "StereoPoint") -> np.ndarray:
        self._pair(other)
        return log_map(self.coords, other.coords, self.kappa)

    def distance(self, other: "StereoPoint") -> float:
        self._pair(other)
        return float(distance(self.coords, other.coords, self.kappa))

    def scale(self, r: float) -> "StereoPoint":
        return StereoPoint(kappa_scale(r, self.coords, self.kappa), self.kappa)

    def __neg__(self) -> "StereoPoint":
        return StereoPoint(-self.coords, self.kappa)
