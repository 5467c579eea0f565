"""tempora: attention-based dynamic-graph models with swappable time encoders."""

__version__ = "0.1.0"
