"""Critical Gibbs trees conditioned to survive and their coalescing-flow scaling limit."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .offspring import EnergySpec, OffspringDistribution, from_probabilities, moment, size_biased, solve_gibbs
from .trees import (
    Generation,
    GenerationChain,
    ProgenyTable,
    enumerate_continuations,
    enumerate_gibbs_marginal,
    sample_block_counts,
    sample_chain,
    sample_next,
    track_progeny,
    transition_probability,
)
from .graphs import MonotoneGraph, compose, hausdorff_rho, quadratic_variation, rotated_rho_prime
from .embedding import embed, flow_graph, lu_distance, rescale, trajectory
from .rng import derive_stream
