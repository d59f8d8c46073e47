"""Segmentation loss family with analytic gradients.

Losses take (H, W, K) arrays: a one-hot ground truth y and a prediction p
in [0, 1]. Probabilities are clipped at 1e-12 before any logarithm. No
loss enforces the per-cell sum-to-one property, so gradients can be
checked by unconstrained finite differences.
"""
from __future__ import annotations

import numpy as np

P_CLIP = 1e-12

#: Default weighting of the combined multi-view loss.
DEFAULT_LAMBDAS = (1.0, 10.0, 5.0)


def _check_pair(y: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if y.shape != p.shape:
        raise ValueError(f"shapes differ: {y.shape} vs {p.shape}")
    return y, p


def wce_loss(y: np.ndarray, p: np.ndarray, w: np.ndarray) -> tuple[float, np.ndarray]:
    """Class-weighted cross entropy and its gradient with respect to p.

    value = -(1/K) sum_k w_k sum_cells y log p, with w the normalized
    positive class weights; the gradient is -w_k y / (K p) per cell.
    """
    y, p = _check_pair(y, p)
    if y.ndim != 3:
        raise ValueError(f"expected (H, W, K) arrays, got shape {y.shape}")
    k = y.shape[2]
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (k,):
        raise ValueError(f"weights must have length {k}, got shape {w.shape}")
    if (w <= 0).any() or abs(w.sum() - 1.0) > 1e-6:
        raise ValueError("class weights must be positive and sum to 1")
    pc = np.clip(p, P_CLIP, None)
    value = -(w * (y * np.log(pc)).sum(axis=(0, 1))).sum() / k
    grad = -(w[None, None, :] * y) / (k * pc)
    return float(value), grad


def soft_dice_loss(y: np.ndarray, p: np.ndarray) -> tuple[float, np.ndarray]:
    """Soft Dice loss, one minus the per-class soft overlap quotient,
    averaged over classes, with its quotient-rule gradient.

    A class absent from both y and p contributes 0.
    """
    y, p = _check_pair(y, p)
    if y.ndim != 3:
        raise ValueError(f"expected (H, W, K) arrays, got shape {y.shape}")
    k = y.shape[2]
    num = (y * p).sum(axis=(0, 1))
    den = (y * y + p * p).sum(axis=(0, 1))
    ok = den > 0
    terms = np.zeros(k)
    terms[ok] = 1.0 - 2.0 * num[ok] / den[ok]
    grad = np.zeros_like(p)
    safe_den = np.where(ok, den, 1.0)
    grad = (4.0 * num[None, None, :] * p - 2.0 * y * safe_den[None, None, :]) \
        / (safe_den[None, None, :] ** 2)
    grad = np.where(ok[None, None, :], grad, 0.0) / k
    return float(terms.mean()), grad


def coherence_loss(p_rd: np.ndarray, p_ra: np.ndarray) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Cross-view coherence: mean squared difference of the per-range
    class-max profiles of the RD and RA predictions.

    Both maps are max-pooled over their non-range axis down to
    (range, class); the value is the squared Frobenius norm of the profile
    difference divided by B_R * K, which lies in [0, 1] for probability
    inputs. The subgradient routes through the first-encountered argmax of
    each pooled group.
    """
    p_rd = np.asarray(p_rd, dtype=np.float64)
    p_ra = np.asarray(p_ra, dtype=np.float64)
    if p_rd.ndim != 3 or p_ra.ndim != 3:
        raise ValueError("expected (range, other, class) arrays")
    if p_rd.shape[0] != p_ra.shape[0] or p_rd.shape[2] != p_ra.shape[2]:
        raise ValueError(
            f"range/class dims must match: {p_rd.shape} vs {p_ra.shape}")
    b_r, k = p_rd.shape[0], p_rd.shape[2]
    pooled_rd = p_rd.max(axis=1)
    pooled_ra = p_ra.max(axis=1)
    diff = pooled_rd - pooled_ra
    value = float((diff * diff).sum() / (b_r * k))

    coef = 2.0 * diff / (b_r * k)
    rows = np.arange(b_r)[:, None]
    cols = np.arange(k)[None, :]
    g_rd = np.zeros_like(p_rd)
    g_rd[rows, p_rd.argmax(axis=1), cols] = coef
    g_ra = np.zeros_like(p_ra)
    g_ra[rows, p_ra.argmax(axis=1), cols] = -coef
    return value, (g_rd, g_ra)


def combined_loss(gts: tuple[np.ndarray, np.ndarray],
                  preds: tuple[np.ndarray, np.ndarray],
                  lambda_wce: float = DEFAULT_LAMBDAS[0],
                  lambda_sdice: float = DEFAULT_LAMBDAS[1],
                  lambda_col: float = DEFAULT_LAMBDAS[2],
                  weights: np.ndarray | None = None) -> float:
    """Weighted sum of the per-view cross-entropy and Dice terms plus the
    cross-view coherence term; weights default to uniform classes."""
    if min(lambda_wce, lambda_sdice, lambda_col) < 0:
        raise ValueError("loss weights must be >= 0")
    (y_rd, y_ra), (p_rd, p_ra) = gts, preds
    k = np.asarray(y_rd).shape[2]
    if weights is None:
        weights = np.full(k, 1.0 / k)
    total = lambda_wce * (wce_loss(y_rd, p_rd, weights)[0] + wce_loss(y_ra, p_ra, weights)[0])
    total += lambda_sdice * (soft_dice_loss(y_rd, p_rd)[0] + soft_dice_loss(y_ra, p_ra)[0])
    total += lambda_col * coherence_loss(p_rd, p_ra)[0]
    return float(total)


def _clip_unit(p):
    return np.clip(p, P_CLIP, 1.0 - P_CLIP)


def focal_loss(y, p, gamma: float = 2.0):
    """Two-branch focal term: -(1-p)^g log p for positives, -p^g log(1-p)
    otherwise. gamma = 0 reduces to binary cross entropy. Vectorized;
    scalars in, scalar out."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    y_arr = np.asarray(y, dtype=np.float64)
    pc = _clip_unit(np.asarray(p, dtype=np.float64))
    pos = -((1.0 - pc) ** gamma) * np.log(pc)
    neg = -(pc ** gamma) * np.log(1.0 - pc)
    out = np.where(y_arr == 1.0, pos, neg)
    return float(out) if out.ndim == 0 else out


def focal_loss_grad(y, p, gamma: float = 2.0):
    """Derivative of focal_loss with respect to p."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    y_arr = np.asarray(y, dtype=np.float64)
    pc = _clip_unit(np.asarray(p, dtype=np.float64))
    one = 1.0 - pc
    pos = gamma * one ** (gamma - 1.0) * np.log(pc) - one ** gamma / pc
    neg = -gamma * pc ** (gamma - 1.0) * np.log(one) + pc ** gamma / one
    out = np.where(y_arr == 1.0, pos, neg)
    return float(out) if out.ndim == 0 else out


def smooth_l1(x):
    """Huber-style penalty: 0.5 x^2 inside |x| < 1, |x| - 0.5 outside;
    continuous with a continuous derivative at the switch."""
    x_arr = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x_arr) < 1.0, 0.5 * x_arr * x_arr, np.abs(x_arr) - 0.5)
    return float(out) if out.ndim == 0 else out


def smooth_l1_grad(x):
    """Derivative of smooth_l1: x inside the quadratic zone, sign(x) outside."""
    x_arr = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x_arr) < 1.0, x_arr, np.sign(x_arr))
    return float(out) if out.ndim == 0 else out


def bce_loss(y: np.ndarray, p: np.ndarray) -> float:
    """Binary cross entropy summed over the grid; equals the gamma = 0
    focal term cell-wise."""
    y, p = _check_pair(y, p)
    pc = _clip_unit(p)
    return float(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).sum())


def bce_loss_grad(y: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Per-cell derivative of bce_loss with respect to p."""
    y, p = _check_pair(y, p)
    pc = _clip_unit(p)
    return -y / pc + (1.0 - y) / (1.0 - pc)
