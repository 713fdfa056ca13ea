"""Sampling-based CF engines: random search and a genetic search."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import CfEngine, CfRequest, CfResult
from .sparsity import sparsify_batch


def draw_values(req: CfRequest, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent draws of every feature from its range (categories uniform)."""
    schema = req.schema
    lo, hi = schema.lower, schema.upper
    cat = schema.categorical_mask
    U = rng.random((n, len(schema)))
    V = lo + U * (hi - lo)
    V[:, cat] = np.floor(U[:, cat] * (hi[cat] + 1))
    return V


def perturb(z: np.ndarray, req: CfRequest, n: int, change_prob: float, rng: np.random.Generator) -> np.ndarray:
    """Copies of ``z`` with each actionable feature resampled with probability ``change_prob``."""
    change = (rng.random((n, z.size)) < change_prob) & req.actionable
    V = draw_values(req, n, rng)
    return np.where(change, V, z)


def _k_best(z, C, costs, k):
    C, first = np.unique(C, axis=0, return_index=True)
    costs = costs[first]
    order = np.lexsort(np.column_stack([costs, C]).T[::-1])
    return C[order[:k]]


def _finish(z, C, req, cost_model, name, **extras):
    C = sparsify_batch(z, C, req.model, req.target_p, cost_model)
    order = np.argsort(cost_model.costs(z, C), kind="stable")
    return CfResult.of(C[order], name, req, **extras)


@dataclass
class RandomSearchParams:
    n_samples: int = 200
    change_prob: float = 0.3
    max_rounds: int = 5
    record_pool: bool = False


def random_search_cf(req: CfRequest, cost_model, params: RandomSearchParams | None, rng) -> CfResult:
    """Best valid perturbations of the input.

    A round draws ``n_samples`` perturbations; further rounds are drawn only
    while no valid sample has been found, up to ``max_rounds``.
    """
    params = params or RandomSearchParams()
    if params.n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    z = req.codes
    pool, valid = [], []
    for _ in range(params.max_rounds):
        S = perturb(z, req, params.n_samples, params.change_prob, rng)
        ok = req.model.proba(S) >= req.target_p
        pool.append(S)
        valid.append(S[ok])
        if ok.any():
            break
    V = np.vstack(valid)
    extras = {"rounds": len(pool)}
    if params.record_pool:
        extras["pool"] = np.vstack(pool)
    if V.shape[0] == 0:
        return CfResult.failure("random", req.schema, "no valid sample", **extras)
    best = _k_best(z, V, cost_model.costs(z, V), req.k)
    return _finish(z, best, req, cost_model, "random", **extras)


@dataclass
class GeneticParams:
    population: int = 24
    generations: int = 12
    mutation_rate: float = 0.2
    crossover_rate: float = 0.7
    elite: int = 2
    penalty: float = 10.0
    sparsity_weight: float = 0.01
    init_change_prob: float = 0.5
    tournament: int = 2


def genetic_fitness(z, P, req, cost_model, params: GeneticParams):
    m = req.model.proba(P)
    hinge = np.maximum(0.0, req.target_p - m)
    changed = (P != z).sum(axis=1)
    fit = params.penalty * hinge + cost_model.costs(z, P) + params.sparsity_weight * changed
    return fit, m >= req.target_p


def genetic_cf(req: CfRequest, cost_model, params: GeneticParams | None, rng) -> CfResult:
    """Evolve perturbations of the input, keeping the best valid individuals seen.

    The input itself seeds the population. Tournament selection, uniform
    crossover and per-feature resampling mutation produce each generation;
    the ``elite`` fittest individuals survive unchanged.
    """
    params = params or GeneticParams()
    if params.population < 4:
        raise ValueError("population must be >= 4")
    if not 1 <= params.elite < params.population:
        raise ValueError("elite must be in [1, population)")
    z = req.codes
    n = params.population
    P = perturb(z, req, n, params.init_change_prob, rng)
    P[0] = z
    fit, ok = genetic_fitness(z, P, req, cost_model, params)
    archive, archive_fit = [P[ok]], [fit[ok]]
    history = [float(fit.min())]
    for _ in range(params.generations):
        order = np.argsort(fit, kind="stable")
        elite = P[order[:params.elite]]
        n_child = n - elite.shape[0]
        contenders = rng.integers(0, n, size=(2, n_child, params.tournament))
        parents = contenders[np.arange(2)[:, None], np.arange(n_child)[None, :],
                             np.argmin(fit[contenders], axis=2)]
        A, B = P[parents[0]], P[parents[1]]
        cross = (rng.random(n_child) < params.crossover_rate)[:, None] & (rng.random(A.shape) < 0.5)
        children = np.where(cross, B, A)
        mutate = (rng.random(children.shape) < params.mutation_rate) & req.actionable
        children = np.where(mutate, draw_values(req, n_child, rng), children)
        cfit, cok = genetic_fitness(z, children, req, cost_model, params)
        P = np.vstack([elite, children])
        fit = np.concatenate([fit[order[:params.elite]], cfit])
        archive.append(children[cok])
        archive_fit.append(cfit[cok])
        history.append(float(fit.min()))
    V, F = np.vstack(archive), np.concatenate(archive_fit)
    if V.shape[0] == 0:
        return CfResult.failure("genetic", req.schema, "no valid individual", history=history)
    best = _k_best(z, V, F, req.k)
    return _finish(z, best, req, cost_model, "genetic", history=history)


class RandomSearchEngine(CfEngine):
    name = "random"
    deterministic = False

    def __init__(self, model, cost_model, target_p=0.5, k=1, params: RandomSearchParams | None = None):
        super().__init__(model, cost_model, target_p, k)
        self.params = params or RandomSearchParams()

    def explain(self, z, rng=None):
        return random_search_cf(self.request(z), self.cost_model, self.params, rng)


class GeneticEngine(CfEngine):
    name = "genetic"
    deterministic = False

    def __init__(self, model, cost_model, target_p=0.5, k=1, params: GeneticParams | None = None):
        super().__init__(model, cost_model, target_p, k)
        self.params = params or GeneticParams()

    def explain(self, z, rng=None):
        return genetic_cf(self.request(z), self.cost_model, self.params, rng)
