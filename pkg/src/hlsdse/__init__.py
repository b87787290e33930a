"""HLS design-space exploration: an ECoGNN QoR surrogate plus classical and LLM-guided search."""

__version__ = "0.1.0"
