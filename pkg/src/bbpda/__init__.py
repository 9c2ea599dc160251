"""Extended pushdown processes, branching bisimilarity, games, tableaux."""

__version__ = "0.1.0"
