"""Replay memory: priorities, sum tree, ring buffer, hindsight relabeling, file format."""
from .buffer import Batch, BufferError, Episode, ReplayBuffer, Transition, transfer_buffer
from .her import RelabelError, her_relabel
from .priorities import (
    OmegaSchedule, PrioritySpec, Strategy, omega_at, priorities, reliability_scores,
    reliability_weight, td_target,
)
from .storage import (
    BufferFormatError, DimensionMismatch, dump_buffer, load_buffer, parse_buffer,
    record_dtype, save_buffer, transition_section,
)
from .sumtree import SumTree
