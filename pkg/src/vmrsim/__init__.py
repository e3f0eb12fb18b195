"""Deterministic simulator for deadline-driven MapReduce scheduling on
virtualized clusters: slot-demand estimation, locality-preserving core
reconfiguration, an earliest-deadline scheduling loop, and fair/FIFO
baselines, plus workload synthesis and experiment tooling."""

__version__ = "0.1.0"
