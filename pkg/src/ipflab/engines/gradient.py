"""Gradient CF engine on the Wachter objective  lam * (1 - m(x'))^2 + d_MAD(x, x')."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..models.base import NotDifferentiableError
from .base import CfEngine, CfRequest, CfResult


@dataclass
class GaParams:
    lam: float = 10.0
    step: float = 0.01
    max_iters: int = 20000
    tol: float = 1e-12


def descend(z: np.ndarray, req: CfRequest, cost_model, params: GaParams):
    """Proximal gradient descent on the objective from ``z``.

    The smooth prediction term takes a gradient step; the weighted l1 distance
    to ``z`` is applied by soft-thresholding, then the iterate is clipped to the
    feature bounds. Only actionable numerical features move. Returns the end
    point and the number of iterations used.
    """
    model = req.model
    movable = req.actionable & ~req.schema.categorical_mask
    lo, hi = req.schema.lower, req.schema.upper
    shrink = params.step * cost_model.mad_weights
    x = z.copy()
    for it in range(1, params.max_iters + 1):
        p = model.proba_one(x)
        grad = -2.0 * params.lam * (1.0 - p) * model.gradient_codes(x)
        y = x - params.step * grad
        delta = y - z
        nxt = z + np.sign(delta) * np.maximum(np.abs(delta) - shrink, 0.0)
        nxt = np.clip(nxt, lo, hi)
        nxt = np.where(movable, nxt, z)
        if np.max(np.abs(nxt - x)) <= params.tol:
            return nxt, it
        x = nxt
    return x, params.max_iters


def gradient_ascent_cf(req: CfRequest, cost_model, params: GaParams | None, default_positive) -> CfResult:
    """Follow the objective's descent from the input; fall back to ``default_positive``
    (flagged degenerate) when the end point is not valid."""
    params = params or GaParams()
    if not req.model.has_gradient:
        raise NotDifferentiableError("gradient engine needs a differentiable model")
    z = req.codes
    end, iters = descend(z, req, cost_model, params)
    if req.model.proba_one(end) >= req.target_p:
        return CfResult.of(end, "gradient", req, iterations=iters)
    fallback = np.asarray(default_positive if not hasattr(default_positive, "values")
                          else req.schema.to_codes(default_positive), dtype=float)
    return CfResult.of(fallback, "gradient", req, degenerate=True, iterations=iters, endpoint=end)


class GradientEngine(CfEngine):
    name = "gradient"

    def __init__(self, model, cost_model, default_positive, target_p=0.5, params: GaParams | None = None):
        super().__init__(model, cost_model, target_p, 1)
        self.default_positive = np.asarray(default_positive, dtype=float)
        self.params = params or GaParams()

    def explain(self, z, rng=None):
        return gradient_ascent_cf(self.request(z), self.cost_model, self.params, self.default_positive)
