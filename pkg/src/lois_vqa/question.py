"""Deterministic hashed word embeddings standing in for a pretrained encoder."""

import hashlib
import re

import numpy as np

MAX_LENGTH = 14
EMBED_DIM = 768

_WORD = re.compile(r"[^\W_]+")


def tokenize(text):
    return _WORD.findall(text.lower())


def token_vector(token, n, seed):
    """Unit vector keyed by (token, seed); identical on every platform."""
    digest = hashlib.blake2b(f"{seed}\x00{token}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
    vec = rng.standard_normal(n)
    return vec / np.sqrt(np.cumsum(vec * vec)[-1])


def embed(tokens, n=32, h=MAX_LENGTH, seed=0):
    """Embed tokens as columns of an (n, h) array, truncating or zero-padding to h."""
    if n < 1 or h < 1:
        raise ValueError("embedding dim and length must be >= 1")
    q = np.zeros((n, h), dtype=np.float64)
    for col, tok in enumerate(tokens[:h]):
        q[:, col] = token_vector(tok, n, seed)
    return q


def encode(text, n=32, h=MAX_LENGTH, seed=0):
    return embed(tokenize(text), n, h, seed)
