"""Experiment orchestration: configs, seeded runs, aggregation, CLI."""
from .analysis import compare, curves, format_comparison, summarize_group, write_report
from .config import ConfigError, ExperimentConfig, load_config, preset_names, shipped_configs
from .runner import RunResult, build_buffer, build_env, episodes_to_rate, train_run
