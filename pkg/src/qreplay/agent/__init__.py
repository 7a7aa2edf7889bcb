"""Value-network learner: MLP, Adam, epsilon-greedy, n-step folding, DQN/DDQN targets."""
from .dqn import AgentConfig, DQNAgent, LearnStats
from .network import (
    Activation, Adam, NetworkError, QNetwork, clip_global_norm, load_network,
    network_bytes, network_from_bytes, save_network,
)
from .policy import (
    NStepAccumulator, compute_target, decay_epsilon, masked_argmax, select_action,
)
