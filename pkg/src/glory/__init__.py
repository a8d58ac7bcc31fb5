"""Global-graph-enhanced news recommendation (news/entity click graphs + GGNN)."""

__version__ = "0.1.0"
