"""Multi-criteria hybrid course recommender tuned by a CHC genetic algorithm."""

__version__ = "0.1.0"
