"""Federated training on schema-heterogeneous tabular data.

Pipeline: CSV/synthetic tabular data -> per-client partitions with renamed
schemas -> text serialization -> deterministic embeddings (token hashing or
a precomputed store) -> local classifiers -> FedAvg-style delta aggregation
with communication accounting -> F1 / significance / stress evaluation.
"""

__version__ = "0.1.0"
