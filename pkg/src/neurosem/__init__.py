"""Neural-to-semantic decoding: align neural feature sequences with a sentence
embedding space, then invert embeddings back to text."""

from neurosem.embedder import EMBED_DIM, HashEmbedder, cosine, embed, normalize_text

__version__ = "0.1.0"

__all__ = ["EMBED_DIM", "HashEmbedder", "cosine", "embed", "normalize_text"]
