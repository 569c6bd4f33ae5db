"""Random Euclidean bipartite matching on the unit square: exact solvers,
density models, Monte Carlo harnesses and the linearised field computations
used to predict the log N growth of the matching cost."""

__version__ = "0.1.0"
