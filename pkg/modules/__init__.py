"""Domain modules: chains, fuzzy decompositions, couplings, constants and checks.

Submodules are imported explicitly (``from modules.chain_core import ...``).
"""
