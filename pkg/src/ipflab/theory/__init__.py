"""Executable checks of IPF stability, the expected-cost bound, and the two instability toys."""
from .benches import (cost_bound_bench, graded_world, inverse_distance_bench, polygon_bench, stability_bench,
                      two_candidate_engine)
from .gridworld import GridWorld, random_grid_world
from .oscillation import (FIXTURE_PATH, OscillationFixture, check_cycle, detect_cycle, find_oscillation_fixture,
                          one_shot_cost, replay, s_ridge_spec)
from .polygon import PolygonResult, PolygonScenario, analytic_consistency_k2, polygon_monte_carlo
from .stability import (INCONCLUSIVE, STABLE, UNSTABLE, BoundCheck, StabilityCertificate, certify_stability,
                        find_instability_witness, verify_cost_bound)
