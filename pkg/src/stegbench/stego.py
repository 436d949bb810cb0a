"""Embedding simulators: plain LSB matching, variance-adaptive LSB
matching, and LSB matching on quantized block-DCT coefficients.

These stand in for external embedding codecs at desk scale.  No
syndrome coding is simulated, so a payload of a bits per position base
visits ceil(a * base) positions and changes about half of them (the
message bit already matches the carrier's LSB half the time).

Key policy: 'fixed' reuses one position permutation for every image;
'per_image' derives a fresh permutation per image from a master seed and
the image's index.  Message bits are always drawn per image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import blockdct, prng

ALGORITHMS = ("lsb_matching", "adaptive_cost", "dct_lsb")
KEY_MODES = ("fixed", "per_image")

ADAPTIVE_COST_EPS = 1e-6  # guards 1/variance on flat regions
DCT_QUALITY = 75


@dataclass(frozen=True)
class StegoConfig:
    algorithm: str
    payload: float  # bits per pixel, or per non-zero AC coefficient for dct_lsb
    key_mode: str = "fixed"
    key_seed: int = 1
    message_seed: int = 2

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.key_mode not in KEY_MODES:
            raise ValueError(f"unknown key mode {self.key_mode!r}; expected one of {KEY_MODES}")
        if not 0.0 <= self.payload <= 1.0:
            raise ValueError(f"payload must be in [0, 1], got {self.payload}")


@dataclass
class EmbedResult:
    stego: np.ndarray  # integer-valued grid, 0..255
    modified_count: int
    visited: np.ndarray = field(repr=False)  # flat indices, embedding order
    bits: np.ndarray = field(repr=False)  # message bits written, same order

    @property
    def positions_used(self) -> int:
        return len(self.visited)


def _check_cover(cover: np.ndarray) -> np.ndarray:
    arr = np.asarray(cover)
    if arr.ndim != 2:
        raise ValueError(f"cover must be 2D, got shape {arr.shape}")
    values = arr.astype(np.int64)
    if not np.array_equal(values, np.asarray(arr, dtype=np.float64)):
        raise ValueError("cover must be integer-valued")
    if values.min() < 0 or values.max() > 255:
        raise ValueError(
            f"cover values must lie in [0, 255], got range "
            f"[{values.min()}, {values.max()}]"
        )
    return values


def _perm_seed(cfg: StegoConfig, image_index: int) -> int:
    if cfg.key_mode == "fixed":
        return cfg.key_seed
    return prng.derive_seed(cfg.key_seed, image_index)


def _message_seed(cfg: StegoConfig, image_index: int) -> int:
    # The message stream is a function of the config alone: a careless
    # sender reusing one key is modeled as also sending one message, which
    # is what pins the +-1 pattern to fixed positions across the corpus.
    del image_index
    return cfg.message_seed


def key_permutation(cfg: StegoConfig, n: int, image_index: int = 0) -> np.ndarray:
    """Position permutation the embedding walk follows for this image."""
    return prng.permutation(_perm_seed(cfg, image_index), n)


def _lsb_match(values: np.ndarray, bits: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Apply the +-1 rule at the given (flat) pixels; returns new values.

    A pixel changes only when its LSB disagrees with the message bit; the
    direction comes from the message stream, clamped so 0 -> +1 and
    255 -> -1.  Either direction flips the LSB, so the embedded bit is
    always readable back.
    """
    delta = signs.copy()
    delta[values == 0] = 1
    delta[values == 255] = -1
    mismatch = (values & 1) != bits
    return np.where(mismatch, values + delta, values)


def embed_lsb_matching(cover: np.ndarray, cfg: StegoConfig, image_index: int = 0) -> EmbedResult:
    """Visit the first ceil(payload * N) pixels of the key permutation."""
    values = _check_cover(cover)
    n = values.size
    count = math.ceil(cfg.payload * n)
    visited = key_permutation(cfg, n, image_index)[:count]
    bits, signs = prng.message_bits_signs(_message_seed(cfg, image_index), count)
    stego = values.copy()
    flat = stego.reshape(-1)
    new = _lsb_match(flat[visited], bits, signs)
    modified = int(np.count_nonzero(new != flat[visited]))
    flat[visited] = new
    return EmbedResult(stego, modified, visited, bits)


def local_variance_3x3(values: np.ndarray) -> np.ndarray:
    """Population variance over each pixel's 3x3 neighborhood (edges replicated)."""
    x = np.asarray(values, dtype=np.float64)
    padded = np.pad(x, 1, mode="edge")
    box = np.zeros_like(x)
    box_sq = np.zeros_like(x)
    h, w = x.shape
    for du in range(3):
        for dv in range(3):
            window = padded[du : du + h, dv : dv + w]
            box += window
            box_sq += window * window
    mean = box / 9.0
    return box_sq / 9.0 - mean * mean


def embed_adaptive(cover: np.ndarray, cfg: StegoConfig, image_index: int = 0) -> EmbedResult:
    """Variance-adaptive variant: cheapest-first visiting order.

    Cost = 1 / (3x3 local variance + eps), so textured pixels are cheap
    and smooth ones expensive.  Ties fall back to key-permutation order,
    which makes a constant cover degenerate to plain LSB matching.
    """
    values = _check_cover(cover)
    n = values.size
    count = math.ceil(cfg.payload * n)
    perm = key_permutation(cfg, n, image_index)
    rank = np.empty(n, dtype=np.int64)
    rank[perm] = np.arange(n)
    cost = 1.0 / (local_variance_3x3(values).reshape(-1) + ADAPTIVE_COST_EPS)
    order = np.lexsort((rank, cost))
    visited = order[:count]
    bits, signs = prng.message_bits_signs(_message_seed(cfg, image_index), count)
    stego = values.copy()
    flat = stego.reshape(-1)
    new = _lsb_match(flat[visited], bits, signs)
    modified = int(np.count_nonzero(new != flat[visited]))
    flat[visited] = new
    return EmbedResult(stego, modified, visited, bits)


def embed_dct(cover: np.ndarray, cfg: StegoConfig, image_index: int = 0) -> EmbedResult:
    """LSB-match quantized non-zero AC coefficients, then reconstruct.

    The payload counts bits per non-zero AC coefficient.  Coefficients are
    visited in key order over the flat (block_row, block_col, u, v) index
    space, skipping DC and zero entries.  Changes are +-1 on the quantized
    value, never crossing zero (so +-1 moves to +-2), which preserves the
    population of non-zero coefficients the payload is defined against.

    ``stego`` is the re-decompressed image; ``modified_count`` compares it
    against the payload-free (quality-75 recompressed) baseline, and the
    ``visited`` indices address the flat coefficient space.
    """
    values = _check_cover(cover)
    if values.shape[0] % blockdct.BLOCK or values.shape[1] % blockdct.BLOCK:
        raise ValueError(
            f"cover sides must be divisible by {blockdct.BLOCK} for dct_lsb, "
            f"got {values.shape}"
        )
    quantized = blockdct.quantized_coefficients(values, DCT_QUALITY)
    baseline = blockdct.reconstruct(quantized, DCT_QUALITY)

    flat = quantized.reshape(-1)
    is_dc = np.zeros(quantized.shape, dtype=bool)
    is_dc[:, :, 0, 0] = True
    eligible = (flat != 0) & ~is_dc.reshape(-1)
    nonzero_ac = int(np.count_nonzero(eligible))
    count = math.ceil(cfg.payload * nonzero_ac)

    perm = key_permutation(cfg, flat.size, image_index)
    walk = perm[eligible[perm]]
    visited = walk[:count]

    bits, signs = prng.message_bits_signs(_message_seed(cfg, image_index), count)
    coefs = flat[visited]
    delta = signs.copy()
    delta[coefs == 1] = 1
    delta[coefs == -1] = -1
    mismatch = (coefs % 2) != bits
    flat[visited] = np.where(mismatch, coefs + delta, coefs)

    stego = blockdct.reconstruct(quantized, DCT_QUALITY)
    modified = int(np.count_nonzero(stego != baseline))
    return EmbedResult(stego, modified, visited, bits)


_EMBEDDERS = {
    "lsb_matching": embed_lsb_matching,
    "adaptive_cost": embed_adaptive,
    "dct_lsb": embed_dct,
}


def embed(cover: np.ndarray, cfg: StegoConfig, image_index: int = 0) -> EmbedResult:
    """Dispatch on cfg.algorithm."""
    return _EMBEDDERS[cfg.algorithm](cover, cfg, image_index)


def count_modified(cover: np.ndarray, stego: np.ndarray) -> int:
    """Number of coordinates whose values differ."""
    a, b = np.asarray(cover), np.asarray(stego)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))
