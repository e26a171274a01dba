"""Experiment configuration, training loops and the few-shot probing protocol."""
from .config import ExperimentConfig, ProbeReport, SeedResult
