"""DIFF-IL: domain-invariant per-frame feature extraction for cross-domain
imitation learning from pixels."""

__version__ = "0.1.0"
