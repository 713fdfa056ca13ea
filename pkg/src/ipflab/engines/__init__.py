"""Counterfactual engines, selection strategies and sparsity post-processing."""
from .base import TIE_ATOL, CfEngine, CfRequest, CfResult, argmin_tiebreak
from .exact import (GridExplosionError, GridSpec, LookupEngine, LookupIndex, OptimalCostEngine,
                    lookup_cf, optimal_cost_cf, positive_training_candidates)
from .gradient import GaParams, GradientEngine, gradient_ascent_cf
from .prototype import PrototypeEngine, PrototypeIndex, prototype_cf
from .search import (GeneticEngine, GeneticParams, RandomSearchEngine, RandomSearchParams,
                     genetic_cf, random_search_cf)
from .selection import KINDS, NoValidCandidateError, SelectionStrategy, select, select_index
from .sparsity import sparsify, sparsify_batch
from .toy import InverseDistanceEngine, inverse_distance_choice
