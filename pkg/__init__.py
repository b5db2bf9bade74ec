"""Fuzzy decomposition of reversible Markov chains."""
