"""Two-class soft-margin SVM with an RBF kernel, trained by sequential
minimal optimization (SMO) with second-order working-set selection.

Training standardizes features with a per-dimension z-score fitted on
the training data; the scaler travels with the model so prediction has
a single scaling path. Training is single-threaded and deterministic:
working-set ties break toward the lowest index.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError

MODEL_MAGIC = b"SVM1"

DEFAULT_TOL = 1e-3
DEFAULT_MAX_KERNEL_EVALS = 10_000_000
STD_FLOOR = 1e-8
_TAU = 1e-12

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)
DEFAULT_GAMMA_GRID = ("scale", 1e-4, 1e-3, 1e-2, 1e-1)

# Row cache for the kernel matrix, capped at ~200 MB of float64.
_CACHE_BUDGET_FLOATS = 25_000_000


@dataclass
class Scaler:
    """Per-dimension standardization statistics (population std, floored)."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass(frozen=True)
class Hyperparams:
    c: float
    gamma: float
    class_weighting: bool = True

    def __post_init__(self):
        if self.c <= 0 or self.gamma <= 0:
            raise ValidationError(f"need c > 0 and gamma > 0, got c={self.c} gamma={self.gamma}")


@dataclass
class SvmModel:
    """Trained SVM: support vectors live in standardized feature space."""

    support_vectors: np.ndarray
    dual_coeffs: np.ndarray  # alpha_k * y_k
    bias: float
    gamma: float
    c: float
    scaler: Scaler


@dataclass
class SmoSolution:
    alpha: np.ndarray
    bias: float
    objective: float
    kkt_violation: float
    iterations: int
    kernel_evals: int


def fit_scaler(examples) -> Scaler:
    """Per-dimension mean and (floored) population standard deviation."""
    x = np.asarray(examples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValidationError("scaler needs at least 2 examples")
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite values in scaler input")
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), STD_FLOOR)
    return Scaler(mean=mean, std=std)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||a - b||^2)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if gamma <= 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    diff = a - b
    return float(np.exp(-gamma * np.dot(diff, diff)))


class _KernelCache:
    """Lazily computed RBF kernel rows with LRU eviction."""

    def __init__(self, x: np.ndarray, gamma: float, max_evals: int):
        self.x = x
        self.gamma = gamma
        self.sq = np.einsum("ij,ij->i", x, x)
        self.max_evals = max_evals
        self.evals = 0
        n = x.shape[0]
        self.capacity = max(2, min(n, _CACHE_BUDGET_FLOATS // max(n, 1)))
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        n = self.x.shape[0]
        self.evals += n
        if self.evals > self.max_evals:
            raise ConvergenceError(
                f"SMO exceeded the kernel-evaluation cap of {self.max_evals}"
            )
        d2 = np.maximum(self.sq + self.sq[i] - 2.0 * (self.x @ self.x[i]), 0.0)
        row = np.exp(-self.gamma * d2)
        self._rows[i] = row
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return row


def smo_solve(x: np.ndarray, y: np.ndarray, c_pos: float, c_neg: float, gamma: float,
              tol: float = DEFAULT_TOL,
              max_kernel_evals: int = DEFAULT_MAX_KERNEL_EVALS,
              max_iterations: int | None = None) -> SmoSolution:
    """Solve the soft-margin dual on already-standardized inputs.

    Maximizes sum(alpha) - 0.5 * sum_ij alpha_i alpha_j y_i y_j K_ij
    subject to 0 <= alpha_i <= C_{y_i} and sum(alpha_i y_i) = 0, stopping
    when the maximal KKT violation drops below tol.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if y.shape != (n,):
        raise ValidationError("labels must match example count")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValidationError("training data must contain both classes")
    if max_iterations is None:
        max_iterations = max(1_000_000, 100 * n)

    cache = _KernelCache(x, gamma, max_kernel_evals)
    cap = np.where(y > 0, c_pos, c_neg)
    alpha = np.zeros(n)
    # g[t] = y_t - u_t with u_t = sum_s alpha_s y_s K_st; alpha = 0 => g = y.
    g = y.copy()

    pos = y > 0
    iterations = 0
    m_val = np.inf
    big_m = -np.inf
    while True:
        up = (pos & (alpha < cap)) | (~pos & (alpha > 0.0))
        low = (pos & (alpha > 0.0)) | (~pos & (alpha < cap))

        g_up = np.where(up, g, -np.inf)
        i = int(np.argmax(g_up))
        m_val = g_up[i]
        big_m = np.min(np.where(low, g, np.inf))
        if m_val - big_m <= tol:
            break
        if iterations >= max_iterations:
            raise ConvergenceError(
                f"SMO did not converge within {max_iterations} iterations "
                f"(KKT violation {m_val - big_m:.3e}, tol {tol:g})"
            )

        row_i = cache.row(i)
        # Second-order selection: largest guaranteed objective decrease
        # among violating candidates (RBF diagonal is 1).
        cand = low & (g < m_val)
        quad = np.maximum(2.0 - 2.0 * row_i, _TAU)
        gain = np.where(cand, (m_val - g) ** 2 / quad, -np.inf)
        j = int(np.argmax(gain))
        row_j = cache.row(j)

        yi, yj = y[i], y[j]
        eta = max(2.0 - 2.0 * row_i[j], _TAU)
        ai_old, aj_old = alpha[i], alpha[j]
        ci, cj = cap[i], cap[j]
        # Clip so the binding variable lands exactly on its bound and the
        # partner carries the conserved sum/difference; a variable left a
        # rounding error inside its box would otherwise be reselected with
        # a step that underflows to zero.
        if yi != yj:
            delta = (yi * g[i] + yj * g[j]) / eta
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0.0:
                if aj < 0.0:
                    aj, ai = 0.0, diff
            else:
                if ai < 0.0:
                    ai, aj = 0.0, -diff
            if diff > ci - cj:
                if ai > ci:
                    ai, aj = ci, ci - diff
            else:
                if aj > cj:
                    aj, ai = cj, cj + diff
        else:
            delta = yi * (g[j] - g[i]) / eta
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > ci:
                if ai > ci:
                    ai, aj = ci, total - ci
            else:
                if aj < 0.0:
                    aj, ai = 0.0, total
            if total > cj:
                if aj > cj:
                    aj, ai = cj, total - cj
            else:
                if ai < 0.0:
                    ai, aj = 0.0, total

        delta_i = (ai - ai_old) * yi
        delta_j = (aj - aj_old) * yj
        alpha[i] = ai
        alpha[j] = aj
        g -= delta_i * row_i + delta_j * row_j
        iterations += 1

    bias = float((m_val + big_m) / 2.0) if np.isfinite(m_val) and np.isfinite(big_m) else 0.0
    u = y - g
    objective = float(alpha.sum() - 0.5 * np.dot(alpha * y, u))
    return SmoSolution(alpha=alpha, bias=bias, objective=objective,
                       kkt_violation=float(m_val - big_m),
                       iterations=iterations, kernel_evals=cache.evals)


def effective_c(labels: np.ndarray, c: float, class_weighting: bool):
    """Per-class regularization: inversely proportional to class frequency."""
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels > 0))
    n_neg = int(np.sum(labels < 0))
    if not class_weighting:
        return c, c
    n = n_pos + n_neg
    return c * n / (2.0 * n_pos), c * n / (2.0 * n_neg)


def train(examples, labels, hp: Hyperparams,
          tol: float = DEFAULT_TOL,
          max_kernel_evals: int = DEFAULT_MAX_KERNEL_EVALS) -> SvmModel:
    """Fit the scaler and the SMO dual solution; keep only support vectors."""
    x = np.asarray(examples, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("examples must form a 2-D matrix")
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite feature values")
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise ValidationError("labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValidationError("training data must contain both classes")

    scaler = fit_scaler(x)
    xs = scaler.transform(x)
    c_pos, c_neg = effective_c(y, hp.c, hp.class_weighting)
    sol = smo_solve(xs, y, c_pos, c_neg, hp.gamma,
                    tol=tol, max_kernel_evals=max_kernel_evals)

    sv = sol.alpha > 0.0
    return SvmModel(
        support_vectors=xs[sv].copy(),
        dual_coeffs=(sol.alpha * y)[sv],
        bias=sol.bias,
        gamma=hp.gamma,
        c=hp.c,
        scaler=scaler,
    )


def decision_values(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """Decision scores for a batch of raw (unscaled) inputs."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.support_vectors.shape[1]:
        raise ValidationError(
            f"dimension mismatch: input {x.shape[1]} vs model {model.support_vectors.shape[1]}"
        )
    xs = model.scaler.transform(x)
    sv = model.support_vectors
    sq_sv = np.einsum("ij,ij->i", sv, sv)
    sq_x = np.einsum("ij,ij->i", xs, xs)
    d2 = np.maximum(sq_x[:, None] + sq_sv[None, :] - 2.0 * (xs @ sv.T), 0.0)
    k = np.exp(-model.gamma * d2)
    return k @ model.dual_coeffs + model.bias


def decision_value(model: SvmModel, x: np.ndarray) -> float:
    """Decision score for one raw input; sign is the prediction (ties positive)."""
    return float(decision_values(model, x)[0])


def predict(model: SvmModel, x: np.ndarray) -> np.ndarray:
    scores = decision_values(model, x)
    return np.where(scores >= 0.0, 1, -1)


def resolve_gamma(value, examples) -> float:
    """Resolve a gamma grid entry; 'scale' maps to 1 / (D * var(X))."""
    if isinstance(value, str):
        if value != "scale":
            raise ValidationError(f"unknown gamma spec {value!r}")
        x = np.asarray(examples, dtype=np.float64)
        var = float(x.var())
        d = x.shape[1]
        if var <= 0:
            return 1.0 / d
        return 1.0 / (d * var)
    gamma = float(value)
    if gamma <= 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    return gamma


def grid_search(fold_sets, c_grid, gamma_grid, class_weighting: bool = True,
                tol: float = DEFAULT_TOL,
                max_kernel_evals: int = DEFAULT_MAX_KERNEL_EVALS):
    """Pick (C, gamma) maximizing mean cross-validation accuracy.

    fold_sets is a list of (x_train, y_train, x_test, y_test) tuples.
    Ties break toward smaller C, then smaller gamma. Returns the chosen
    Hyperparams and a score table with one row per (c, gamma, fold) plus
    a mean row per grid point.
    """
    fold_sets = list(fold_sets)
    if len(fold_sets) < 2:
        raise ValidationError("grid search needs at least 2 folds")
    if any(isinstance(g, str) for g in gamma_grid):
        raise ValidationError("resolve symbolic gamma entries before grid search")
    c_values = sorted(float(c) for c in c_grid)
    gamma_values = sorted(float(g) for g in gamma_grid)
    if not c_values or not gamma_values:
        raise ValidationError("empty hyperparameter grid")

    for k, (_, y_tr, _, _) in enumerate(fold_sets):
        y_tr = np.asarray(y_tr)
        if not (np.any(y_tr > 0) and np.any(y_tr < 0)):
            raise ValidationError(f"fold {k}: training data has a single class")

    rows = []
    best = None
    best_acc = -1.0
    for c in c_values:
        for gamma in gamma_values:
            hp = Hyperparams(c=c, gamma=gamma, class_weighting=class_weighting)
            accs = []
            total = 0
            correct = 0
            for k, (x_tr, y_tr, x_te, y_te) in enumerate(fold_sets):
                model = train(x_tr, y_tr, hp, tol=tol, max_kernel_evals=max_kernel_evals)
                pred = predict(model, x_te)
                n_ok = int(np.sum(pred == np.asarray(y_te)))
                n = len(y_te)
                acc = n_ok / n if n else 0.0
                accs.append(acc)
                total += n
                correct += n_ok
                rows.append({"c": c, "gamma": gamma, "fold": k,
                             "n": n, "correct": n_ok, "accuracy": acc})
            mean_acc = float(np.mean(accs))
            rows.append({"c": c, "gamma": gamma, "fold": "mean",
                         "n": total, "correct": correct, "accuracy": mean_acc})
            if mean_acc > best_acc:
                best_acc = mean_acc
                best = hp
    return best, rows


def save_model(path, model: SvmModel) -> None:
    """Serialize a model in the little-endian SVM1 binary format."""
    sv = np.asarray(model.support_vectors, dtype=np.float64)
    dual = np.asarray(model.dual_coeffs, dtype=np.float64)
    n_sv, dim = sv.shape
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", dim, n_sv))
        fh.write(struct.pack("<ddd", model.bias, model.gamma, model.c))
        fh.write(model.scaler.mean.astype("<f8").tobytes())
        fh.write(model.scaler.std.astype("<f8").tobytes())
        fh.write(dual.astype("<f8").tobytes())
        fh.write(sv.astype("<f8").tobytes(order="C"))


def load_model(path) -> SvmModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MODEL_MAGIC:
            raise ValidationError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
        dim, n_sv = struct.unpack("<II", fh.read(8))
        bias, gamma, c = struct.unpack("<ddd", fh.read(24))
        mean = np.frombuffer(fh.read(dim * 8), dtype="<f8").copy()
        std = np.frombuffer(fh.read(dim * 8), dtype="<f8").copy()
        dual = np.frombuffer(fh.read(n_sv * 8), dtype="<f8").copy()
        sv_raw = fh.read(n_sv * dim * 8)
        if len(sv_raw) != n_sv * dim * 8:
            raise ValidationError(f"{path}: truncated support vectors")
        sv = np.frombuffer(sv_raw, dtype="<f8").reshape(n_sv, dim).copy()
    return SvmModel(support_vectors=sv, dual_coeffs=dual, bias=float(bias),
                    gamma=float(gamma), c=float(c), scaler=Scaler(mean=mean, std=std))
