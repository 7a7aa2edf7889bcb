"""Environments: unitary compilation, architecture search, diagnostic chain."""
from .chain import ChainConfig, ChainEnv, chain_values
from .compile import (
    CompileConfig, CompileEnv, GateSet, RewardMode, TargetMode, action_space, evaluate,
    write_evaluation_csv,
)
from .qas import (
    CHEMICAL_ACCURACY, CircuitTensor, Curriculum, Encoding, EpisodeLog, QasConfig, QasEnv,
    build_circuit, discrete_actions, encode_action_I, encode_action_II, encode_circuit,
    episode_stats, evaluation_steps, placements, qas_reward,
)
from .vqe import (
    CostFunction, NoiseModel, OptimizerConfig, OptimizerMethod, circuit_energy,
    optimize_parameters,
)
