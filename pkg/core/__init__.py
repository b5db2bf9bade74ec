"""
Core operations behind the fuzzy-decomp command line.
"""
