"""
Context distributions and adversarial loss generators
"""

from .adversaries import (
    ADVERSARY_KINDS,
    AdaptiveAdversary,
    Adversary,
    FixedAdversary,
    History,
    LossFunction,
    LossSequence,
    ObliviousAdversary,
    ReplayAdversary,
    eval_loss,
    load_loss_sequence,
    loss_matrix,
    make_adversary,
    project_to_unit_ball,
    random_directions,
    save_loss_sequence,
)
from .contexts import ContextDistribution, GridContexts, UniformContexts, make_contexts

__all__ = [
    'ADVERSARY_KINDS', 'AdaptiveAdversary', 'Adversary', 'FixedAdversary', 'History', 'LossFunction',
    'LossSequence', 'ObliviousAdversary', 'ReplayAdversary', 'eval_loss', 'load_loss_sequence',
    'loss_matrix', 'make_adversary', 'project_to_unit_ball', 'random_directions', 'save_loss_sequence',
    'ContextDistribution', 'GridContexts', 'UniformContexts', 'make_contexts',
]
