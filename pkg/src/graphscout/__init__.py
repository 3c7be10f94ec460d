"""Investigative pattern detection over behavioral-indicator knowledge networks.

graphscout ingests coded behavioral-indicator data into a typed property
graph, matches analyst-authored query graphs against it with inexact
individual and neighborhood similarity scoring, classifies free text into
indicator labels, and generates privacy-preserving synthetic behavioral
trajectories. A small HTTP service ties the pieces together for
human-in-the-loop investigative search.
"""

__version__ = "0.1.0"

from .taxonomy import IndicatorTaxonomy

__all__ = ["IndicatorTaxonomy", "__version__"]
