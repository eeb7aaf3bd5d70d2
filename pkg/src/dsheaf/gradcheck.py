"""Finite-difference oracle for the analytic gradients.

Central differences with a fixed step are compared entrywise against the
tape gradients; the per-tensor score is the worst relative error, with a
small floor so that near-zero entries are compared absolutely.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .nn import ModelParams, SheafDiffusionModel, named_params

DEFAULT_STEP = 1e-5
DEFAULT_FLOOR = 1e-6


def finite_difference_grads(loss_fn: Callable[[ModelParams], float],
                            params: ModelParams, step: float = DEFAULT_STEP
                            ) -> dict[str, np.ndarray]:
    """Central-difference gradient of ``loss_fn`` for every parameter entry.

    Parameters are perturbed in place and restored, so ``loss_fn`` must read
    the live arrays.
    """
    grads = {}
    for name, arr in named_params(params).items():
        flat = arr.reshape(-1)
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn(params)
            flat[i] = orig - step
            down = loss_fn(params)
            flat[i] = orig
            g[i] = (up - down) / (2.0 * step)
        grads[name] = g.reshape(arr.shape)
    return grads


def relative_errors(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray],
                    floor: float = DEFAULT_FLOOR) -> dict[str, float]:
    """Worst entrywise relative error per parameter tensor."""
    out = {}
    for name, ga in analytic.items():
        gn = numeric[name]
        if ga.size == 0:
            out[name] = 0.0
            continue
        denom = np.maximum(np.maximum(np.abs(ga), np.abs(gn)), floor)
        out[name] = float(np.max(np.abs(ga - gn) / denom))
    return out


def check_model_gradients(model: SheafDiffusionModel, params: ModelParams,
                          features: np.ndarray, labels: np.ndarray, mask: np.ndarray,
                          step: float = DEFAULT_STEP, floor: float = DEFAULT_FLOOR
                          ) -> tuple[float, dict[str, float]]:
    """Compare tape gradients with central differences on one loss evaluation.

    Runs in evaluation mode (no dropout) so the objective is deterministic in
    the parameters.  Returns (worst error, per-tensor errors).
    """
    def loss_fn(p: ModelParams) -> float:
        return float(model.loss(p, features, labels, mask, training=False).loss.value)

    _, analytic, _ = model.loss_and_grads(params, features, labels, mask, training=False)
    numeric = finite_difference_grads(loss_fn, params, step)
    errors = relative_errors(analytic, numeric, floor)
    worst = max(errors.values()) if errors else 0.0
    return worst, errors
