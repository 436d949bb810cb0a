"""8x8 block DCT with JPEG-style luminance quantization.

The transform is the orthonormal 2D DCT-II (C @ block @ C.T with the
usual 1/sqrt(8) / 1/2 scaling), applied to level-shifted pixels
(value - 128).  Quantization divides by the standard luminance table
scaled to a quality factor with the familiar IJG rule and rounds half
away from zero.
"""

from __future__ import annotations

import numpy as np

BLOCK = 8

# Standard luminance quantization table (quality 50 base).
LUMA_QUANT_BASE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)


def quant_table(quality: int = 75) -> np.ndarray:
    """Luminance table scaled to a JPEG quality factor in [1, 100]."""
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    table = (LUMA_QUANT_BASE * scale + 50) // 100
    return np.maximum(table, 1)


def dct_matrix() -> np.ndarray:
    """Orthonormal 8-point DCT-II matrix (rows are basis vectors)."""
    k = np.arange(BLOCK)
    mat = np.cos((2 * k[None, :] + 1) * k[:, None] * np.pi / (2 * BLOCK))
    mat *= np.sqrt(2.0 / BLOCK)
    mat[0] *= 1.0 / np.sqrt(2.0)
    return mat


_DCT = dct_matrix()


def _to_blocks(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    return img.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 2, 1, 3)


def _from_blocks(blocks: np.ndarray) -> np.ndarray:
    nbr, nbc = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(nbr * BLOCK, nbc * BLOCK)


def block_dct(img: np.ndarray) -> np.ndarray:
    """Per-block 2D DCT of a level-shifted image; output has block layout
    (block_row, block_col, u, v)."""
    if img.shape[0] % BLOCK or img.shape[1] % BLOCK:
        raise ValueError(f"image sides must be multiples of {BLOCK}, got {img.shape}")
    blocks = _to_blocks(np.asarray(img, dtype=np.float64))
    return np.einsum("ux,rcxy,vy->rcuv", _DCT, blocks, _DCT, optimize=True)


def block_idct(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of ``block_dct``; returns a plain (H, W) float image."""
    blocks = np.einsum("xu,rcuv,yv->rcxy", _DCT, coeffs, _DCT, optimize=True)
    return _from_blocks(blocks)


def quantize(coeffs: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Divide by the table and round half away from zero; integer output."""
    scaled = coeffs / table[None, None, :, :]
    return (np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)).astype(np.int64)


def dequantize(quantized: np.ndarray, table: np.ndarray) -> np.ndarray:
    return quantized.astype(np.float64) * table[None, None, :, :]


def quantized_coefficients(img: np.ndarray, quality: int = 75) -> np.ndarray:
    """Pixels (0..255) -> quantized coefficient blocks (br, bc, u, v)."""
    return quantize(block_dct(np.asarray(img, dtype=np.float64) - 128.0), quant_table(quality))


def reconstruct(quantized: np.ndarray, quality: int = 75) -> np.ndarray:
    """Quantized blocks -> integer image in [0, 255]."""
    pixels = block_idct(dequantize(quantized, quant_table(quality))) + 128.0
    return np.clip(np.rint(pixels), 0, 255).astype(np.int64)
