"""Word-level autocompletion for computer-aided translation.

The package trains a masked word-prediction transformer and an energy-based
reranker on parallel text, retrieves prefix-constrained candidates through a
character trie, and serves ranked word suggestions over HTTP.
"""

__version__ = "0.1.0"
