"""harmkit: a pipeline toolkit for Chinese harmful-content detection.

Covers the full workflow: corpus ingestion and dedup, embedding clustering
and cluster-stratified sampling, human annotation with an evolving knowledge
rule base, attribute-driven synthetic data generation with refusal filtering,
SFT export, a desk-scale student classifier, and a zero-shot evaluation
harness reporting per-category and macro F1.
"""

__version__ = "0.1.0"
