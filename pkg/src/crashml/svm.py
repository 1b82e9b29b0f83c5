"""Binary SVM trained by sequential minimal optimisation.

Each step optimises two Lagrange multipliers analytically.  The pair is
the maximal violating pair over the error cache (Keerthi et al.'s
refinement of Platt's selection), so the stopping test is exactly "every
row meets the KKT conditions within ``tol``".  Probabilities come from a
sigmoid fitted to the training decision values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, FeatureMatrix, Schema, encode_codes, one_hot_encode
from .errors import CalibrationError, ModelStateError, ShapeError, TrainingError
from .seeding import substream

log = logging.getLogger(__name__)

# curvature floor for pairs of identical rows
TAU = 1e-12
# alphas this close (relative to C) to a bound are put on it
BOUND_EPS = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    degree: int = 1
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial"):
            raise ValueError(f"unsupported kernel {self.kind!r}")
        if self.degree < 1:
            raise ValueError("degree must be at least 1")

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        dot = A @ B.T
        if self.kind == "linear":
            return dot
        return (dot + self.coef0) ** self.degree


@dataclass(frozen=True)
class SmoParams:
    C: float = 1.0
    tol: float = 1e-3
    max_passes: int = 10
    max_iter: int = 200_000

    def __post_init__(self):
        if self.C <= 0 or self.tol <= 0:
            raise ValueError("C and tol must be positive")


@dataclass
class SvmModel:
    alphas: np.ndarray  # support coefficients only
    labels: np.ndarray  # +/-1 per support row
    support_rows: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float
    calibration: tuple[float, float] | None = None
    converged: bool = True
    n_updates: int = 0
    schema: Schema | None = field(default=None, repr=False)

    @property
    def width(self) -> int:
        return int(self.support_rows.shape[1])

    def _features(self, x) -> np.ndarray:
        if isinstance(x, Dataset):
            if self.schema is not None and x.schema != self.schema:
                raise ShapeError("dataset schema differs from the training schema")
            return encode_codes(x.schema, x.codes)
        if isinstance(x, FeatureMatrix):
            x = x.X
        X = np.asarray(x, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.width:
            raise ShapeError(f"expected {self.width} features, got {X.shape[1]}")
        return X

    def decision_function(self, x) -> np.ndarray:
        X = self._features(x)
        return self.kernel(X, self.support_rows) @ (self.alphas * self.labels) + self.bias

    def predict_proba(self, x) -> np.ndarray:
        """``(n, 2)`` array of ``(p_not_fatal, p_fatal)``."""
        if self.calibration is None:
            raise ModelStateError("the model has no sigmoid calibration")
        p = sigmoid_proba(self.decision_function(x), *self.calibration)
        return np.stack([1.0 - p, p], axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": "smo_svm",
            "kernel": {"kind": self.kernel.kind, "degree": self.kernel.degree, "coef0": self.kernel.coef0},
            "C": self.C,
            "bias": self.bias,
            "alphas": self.alphas.tolist(),
            "labels": self.labels.astype(int).tolist(),
            "support_rows": self.support_rows.astype(int).tolist()
            if np.array_equal(self.support_rows, np.round(self.support_rows))
            else self.support_rows.tolist(),
            "calibration": None if self.calibration is None else list(self.calibration),
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict, schema: Schema | None = None) -> "SvmModel":
        k = data["kernel"]
        width = schema.width if schema is not None else 0
        rows = np.array(data["support_rows"], dtype=np.float64).reshape(len(data["alphas"]), -1)
        if rows.shape[1] == 0 and width:
            rows = np.zeros((0, width))
        return cls(
            alphas=np.array(data["alphas"], dtype=np.float64),
            labels=np.array(data["labels"], dtype=np.float64),
            support_rows=rows,
            bias=float(data["bias"]),
            kernel=KernelSpec(k["kind"], int(k["degree"]), float(k["coef0"])),
            C=float(data["C"]),
            calibration=None if data["calibration"] is None else tuple(data["calibration"]),
            converged=bool(data.get("converged", True)),
            schema=schema,
        )


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def _pair_update(alpha, y, K, C, i, j, Fi, Fj):
    """Optimal clipped step for the pair ``(i, j)``; returns the new alphas.

    ``F`` is the error cache without bias, ``F_k = sum_l a_l y_l K_kl - y_k``.
    A non-positive curvature (duplicate rows) is replaced by a tiny positive
    one, which sends the step to the box boundary along an ascent direction.
    """
    ai, aj = alpha[i], alpha[j]
    yi, yj = y[i], y[j]
    if yi != yj:
        L, H = max(0.0, aj - ai), min(C, C + aj - ai)
    else:
        L, H = max(0.0, ai + aj - C), min(C, ai + aj)
    eta = max(K[i, i] + K[j, j] - 2.0 * K[i, j], TAU)
    new_j = min(max(aj + yj * (Fi - Fj) / eta, L), H)
    new_i = ai + yi * yj * (aj - new_j)
    return _snap(new_i, C), _snap(new_j, C)


def _snap(a: float, C: float) -> float:
    """Clamp to the box, absorbing rounding residue at either bound."""
    if a <= BOUND_EPS * C:
        return 0.0
    if a >= C * (1.0 - BOUND_EPS):
        return C
    return a


def _sides(a: float, positive: bool, C: float) -> tuple[bool, bool]:
    """Membership of one row in the (up, low) index sets."""
    if positive:
        return a < C, a > 0
    return a > 0, a < C


def _solve(K, y, C, tol, max_iter, debug):
    """Maximal-violating-pair SMO.  Ties in the pair choice go to the lowest
    index, so callers permute rows beforehand to make them seed-dependent."""
    n = len(y)
    alpha = np.zeros(n)
    F = -y.astype(np.float64)
    pos = y > 0
    up = pos.copy()
    low = ~pos
    F_up = np.where(up, F, np.inf)
    F_low = np.where(low, F, -np.inf)
    delta = np.empty(n)
    scratch = np.empty(n)
    updates = 0
    converged = False
    while True:
        i = int(np.argmin(F_up))
        j = int(np.argmax(F_low))
        if F_low[j] - F_up[i] <= 2.0 * tol:
            converged = True
            break
        if updates >= max_iter:
            break
        new_i, new_j = _pair_update(alpha, y, K, C, i, j, F[i], F[j])
        di, dj = y[i] * (new_i - alpha[i]), y[j] * (new_j - alpha[j])
        if di == 0.0 and dj == 0.0:
            # cannot happen for a true violating pair once alphas are snapped
            log.warning("SMO made no progress on pair (%d, %d)", i, j)
            break
        before = dual_objective(alpha, y, K) if debug else None
        alpha[i], alpha[j] = new_i, new_j
        np.multiply(K[i], di, out=delta)
        np.multiply(K[j], dj, out=scratch)
        delta += scratch
        # the masked copies take the same delta; +/-inf entries stay infinite
        F += delta
        F_up += delta
        F_low += delta
        for k in (i, j):
            up[k], low[k] = _sides(alpha[k], pos[k], C)
            F_up[k] = F[k] if up[k] else np.inf
            F_low[k] = F[k] if low[k] else -np.inf
        updates += 1
        if debug:
            after = dual_objective(alpha, y, K)
            assert after >= before - 1e-9 * max(1.0, abs(before)), (before, after)
            assert abs(float(alpha @ y)) <= 1e-8
    b_up = F[up].min() if up.any() else F[low].max()
    b_low = F[low].max() if low.any() else F[up].min()
    bias = -0.5 * (b_up + b_low)
    return alpha, bias, F + y + bias, updates, converged


def kkt_residuals(alpha, y, f, C) -> np.ndarray:
    """Per-row KKT violation of ``y_i f(x_i)`` (0 when satisfied)."""
    margin = y * f
    lower = np.where(alpha < C, np.maximum(0.0, 1.0 - margin), 0.0)
    upper = np.where(alpha > 0, np.maximum(0.0, margin - 1.0), 0.0)
    return np.maximum(lower, upper)


def train_smo(
    features: FeatureMatrix,
    params: SmoParams = SmoParams(),
    kernel: KernelSpec = KernelSpec(),
    seed: int = 0,
    debug: bool = False,
    schema: Schema | None = None,
    calibrate: bool = True,
) -> SvmModel:
    """Solve the SVM dual by pairwise updates and fit the probability sigmoid.

    Each update takes the most violating index on one side of the KKT
    conditions and, as partner, the index on the other side with the largest
    ``|E1 - E2|``; the pair is then optimised analytically and clipped to
    the box.  Training stops when every row satisfies the KKT conditions
    within ``tol`` (``converged``) or after ``max_iter`` updates.  ``debug``
    asserts dual ascent and the equality constraint after every update.
    """
    X = np.asarray(features.X, dtype=np.float64)
    y = np.asarray(features.y, dtype=np.float64)
    if X.shape[0] < 2 or len(np.unique(y)) < 2:
        raise TrainingError("SMO needs at least two rows and both classes")
    order = substream(seed, "smo").permutation(len(y))
    Xo, yo = X[order], y[order]
    alpha_o, bias, f_o, updates, converged = _solve(kernel(Xo, Xo), yo, params.C, params.tol, params.max_iter, debug)
    alpha = np.empty_like(alpha_o)
    alpha[order] = alpha_o
    f = np.empty_like(f_o)
    f[order] = f_o
    if not converged:
        log.warning("SMO stopped after %d updates without meeting tol=%g", updates, params.tol)

    sv = alpha > 0
    model = SvmModel(
        alphas=alpha[sv].copy(),
        labels=y[sv].copy(),
        support_rows=X[sv].copy(),
        bias=float(bias),
        kernel=kernel,
        C=params.C,
        converged=converged,
        n_updates=updates,
        schema=schema,
    )
    model.train_alphas = alpha
    if calibrate:
        model.calibration = platt_calibrate(f, y)
    return model


def train_svm(dataset: Dataset, params: SmoParams = SmoParams(), kernel: KernelSpec = KernelSpec(), seed: int = 0) -> SvmModel:
    return train_smo(one_hot_encode(dataset), params, kernel, seed, schema=dataset.schema)


def decision_value(model: SvmModel, x) -> float:
    return float(model.decision_function(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def sigmoid_proba(f, A: float, B: float) -> np.ndarray:
    """``1 / (1 + exp(A f + B))`` evaluated without overflow."""
    z = A * np.asarray(f, dtype=np.float64) + B
    out = np.empty_like(z)
    pos = z >= 0
    e = np.exp(-z[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    return out


def platt_calibrate(decision_values, labels, max_iter: int = 100, gtol: float = 1e-8) -> tuple[float, float]:
    """Fit ``P(y=+1|f) = 1/(1+exp(A f + B))`` by Newton's method.

    Uses Platt's smoothed targets and the backtracking Newton iteration of
    Lin, Lin and Weng (2007).  Raises :class:`CalibrationError` if the
    gradient norm is not below ``gtol`` within ``max_iter`` iterations.
    """
    f = np.asarray(decision_values, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y > 0).sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError("calibration needs both classes")
    hi, lo = (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0)
    t = np.where(y > 0, hi, lo)
    A, B = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    sigma = 1e-12

    def loss(A, B):
        z = A * f + B
        # t*z + log(1+exp(-z)), stable in both tails
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-np.abs(z))),
                                     (t - 1.0) * z + np.log1p(np.exp(-np.abs(z))))))

    fval = loss(A, B)
    for _ in range(max_iter):
        p = sigmoid_proba(f, A, B)
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + float(np.sum(f * f * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(f * d2))
        d1 = t - p
        g1 = float(np.sum(f * d1))
        g2 = float(np.sum(d1))
        if math.hypot(g1, g2) <= gtol:
            return A, B
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        # near the optimum the true decrease drops below rounding in ``loss``
        slack = 64 * np.finfo(float).eps * abs(fval)
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = loss(nA, nB)
            if nf <= fval + 1e-4 * step * gd + slack:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            raise CalibrationError("line search failed during sigmoid fitting")
    raise CalibrationError(f"sigmoid fit did not converge in {max_iter} iterations")


def svm_predict_proba(model: SvmModel, x) -> tuple[float, float]:
    p = model.predict_proba(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
    return float(p[0]), float(p[1])
