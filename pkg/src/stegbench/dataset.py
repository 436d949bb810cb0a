"""Image I/O, synthetic cover generation, and corpus assembly.

Covers are integer grayscale grids stored as binary PGM (P5, maxval 255).
A corpus pairs each cover with exactly one stego twin sharing a source
id; splitting keeps twins together and test data is normalized with the
training statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PgmError(ValueError):
    """Malformed or unsupported PGM content."""


@dataclass
class CorpusItem:
    image: np.ndarray
    label: int  # 0 = cover, 1 = stego
    source_id: str


@dataclass
class Corpus:
    items: list[CorpusItem] = field(default_factory=list)
    normalization: tuple[float, float] | None = None  # (mean, std) of x/255
    normalized: bool = False

    def __len__(self) -> int:
        return len(self.items)

    def images(self) -> np.ndarray:
        return np.stack([item.image for item in self.items]).astype(np.float64)

    def labels(self) -> np.ndarray:
        return np.array([item.label for item in self.items], dtype=np.int64)

    def source_ids(self) -> list[str]:
        return [item.source_id for item in self.items]


# --- PGM ------------------------------------------------------------------


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next header token, skipping whitespace and '#' comment lines."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise PgmError("truncated PGM header")
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def load_pgm(path) -> np.ndarray:
    """Read binary PGM (P5, 8-bit, maxval 255) into an int64 grid."""
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:2] != b"P5":
        if data[:2] in (b"P1", b"P2", b"P3", b"P6"):
            raise PgmError(
                f"unsupported PNM variant {data[:2].decode(errors='replace')!r} "
                f"in {path}; only binary grayscale P5 is accepted"
            )
        raise PgmError(f"not a PGM file (bad magic) in {path}")
    pos = 2
    width_tok, pos = _read_token(data, pos)
    height_tok, pos = _read_token(data, pos)
    maxval_tok, pos = _read_token(data, pos)
    try:
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    except ValueError as exc:
        raise PgmError(f"malformed PGM header in {path}") from exc
    if maxval != 255:
        raise PgmError(f"unsupported maxval {maxval} in {path}; only 255 (8-bit)")
    pos += 1  # single whitespace byte separates header from payload
    payload = data[pos : pos + width * height]
    if len(payload) != width * height:
        raise PgmError(
            f"truncated PGM payload in {path}: expected {width * height} bytes, "
            f"got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).astype(np.int64)


def save_pgm(grid: np.ndarray, path, comment: str | None = None) -> None:
    """Write an integer grid in [0, 255] as binary PGM."""
    arr = np.asarray(grid)
    values = arr.astype(np.int64)
    if arr.ndim != 2 or not np.array_equal(values, np.asarray(arr, dtype=np.float64)):
        raise ValueError("PGM output requires a 2D integer-valued grid")
    if values.min() < 0 or values.max() > 255:
        raise ValueError(f"PGM values must lie in [0, 255], got [{values.min()}, {values.max()}]")
    height, width = values.shape
    header = b"P5\n"
    if comment:
        for line in comment.splitlines():
            header += b"# " + line.encode() + b"\n"
    header += f"{width} {height}\n255\n".encode()
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(values.astype(np.uint8).tobytes())


# --- synthetic covers -------------------------------------------------------

# Texture parameters: gentle oriented waves over a wide range of base
# levels, locally flat patches, and a faint sensor-noise floor (mostly
# below the rounding step).  Smoothness keeps quantized block-DCT spectra
# sparse, while slope/level variation between images dominates any
# payload-sized energy shift.
_WAVE_COUNT = (2, 4)
_WAVE_AMP = (6.0, 24.0)
_WAVE_FREQ = (0.3, 1.1)
_NOISE_STD = (0.1, 0.5)
_PATCH_COUNT = (1, 3)


def synth_cover(seed: int, index: int, size: int) -> np.ndarray:
    """One deterministic textured cover, integer-valued in [0, 255]."""
    rng = np.random.default_rng([seed, index])
    yy, xx = np.mgrid[0:size, 0:size] / float(size)
    img = np.full((size, size), rng.uniform(70.0, 190.0))
    for _ in range(rng.integers(_WAVE_COUNT[0], _WAVE_COUNT[1] + 1)):
        theta = rng.uniform(0.0, np.pi)
        freq = rng.uniform(*_WAVE_FREQ)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(*_WAVE_AMP)
        axis = np.cos(theta) * xx + np.sin(theta) * yy
        img += amp * np.cos(2.0 * np.pi * freq * axis + phase)
    for _ in range(rng.integers(_PATCH_COUNT[0], _PATCH_COUNT[1] + 1)):
        ph = int(rng.integers(size // 8, size // 3 + 1))
        pw = int(rng.integers(size // 8, size // 3 + 1))
        row = int(rng.integers(0, size - ph + 1))
        col = int(rng.integers(0, size - pw + 1))
        img[row : row + ph, col : col + pw] = img[row : row + ph, col : col + pw].mean()
    img += rng.uniform(*_NOISE_STD) * rng.standard_normal((size, size))
    return np.clip(np.rint(img), 0, 255).astype(np.int64)


def synth_covers(seed: int, count: int, size: int) -> list[np.ndarray]:
    """Deterministic batch of textured covers."""
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    return [synth_cover(seed, index, size) for index in range(count)]


# --- normalization -----------------------------------------------------------


def normalize(corpus: Corpus) -> Corpus:
    """Scale by 1/255 then center/scale with global population statistics.

    The statistics are computed over every pixel of every image and stored
    on the returned corpus so they can be reapplied to held-out data.
    """
    if corpus.normalized:
        raise ValueError("corpus is already normalized")
    if not corpus.items:
        raise ValueError("cannot normalize an empty corpus")
    stacked = corpus.images() / 255.0
    mean = float(stacked.mean())
    std = float(stacked.std())  # population statistic
    if std == 0.0:
        raise ValueError("degenerate corpus: zero standard deviation")
    return apply_normalization(corpus, mean, std)


def apply_normalization(corpus: Corpus, mean: float, std: float) -> Corpus:
    """Normalize with externally supplied statistics (train-time values)."""
    if corpus.normalized:
        raise ValueError("corpus is already normalized")
    if std <= 0.0:
        raise ValueError(f"std must be positive, got {std}")
    items = [
        CorpusItem((item.image.astype(np.float64) / 255.0 - mean) / std, item.label, item.source_id)
        for item in corpus.items
    ]
    return Corpus(items, normalization=(mean, std), normalized=True)


# --- assembly ----------------------------------------------------------------


def pair_corpus(covers: list[np.ndarray], stegos: list[np.ndarray],
                source_ids: list[str] | None = None) -> Corpus:
    """Raw corpus of (cover, stego) twins sharing a source id."""
    if len(covers) != len(stegos):
        raise ValueError(f"unpaired inputs: {len(covers)} covers vs {len(stegos)} stegos")
    if source_ids is None:
        source_ids = [f"img{i:05d}" for i in range(len(covers))]
    items = []
    for src, cover, stego in zip(source_ids, covers, stegos):
        items.append(CorpusItem(np.asarray(cover), 0, src))
        items.append(CorpusItem(np.asarray(stego), 1, src))
    return Corpus(items)


def assemble(
    covers: list[np.ndarray],
    stegos: list[np.ndarray],
    split_ratio: float,
    seed: int,
    source_ids: list[str] | None = None,
) -> tuple[Corpus, Corpus]:
    """Pair, split by source id, and normalize (test reuses train statistics).

    A cover and its stego twin always land in the same split.
    """
    if not 0.0 < split_ratio < 1.0:
        raise ValueError(f"split_ratio must be in (0, 1), got {split_ratio}")
    raw = pair_corpus(covers, stegos, source_ids)
    pair_count = len(covers)
    order = np.random.default_rng(seed).permutation(pair_count)
    train_pairs = int(round(split_ratio * pair_count))
    if train_pairs == 0 or train_pairs == pair_count:
        raise ValueError(
            f"split_ratio {split_ratio} leaves an empty split for {pair_count} pairs"
        )
    chosen = set(order[:train_pairs].tolist())
    train_items, test_items = [], []
    for pair_index in range(pair_count):
        cover_item = raw.items[2 * pair_index]
        stego_item = raw.items[2 * pair_index + 1]
        bucket = train_items if pair_index in chosen else test_items
        bucket.extend((cover_item, stego_item))
    train = normalize(Corpus(train_items))
    mean, std = train.normalization
    test = apply_normalization(Corpus(test_items), mean, std)
    return train, test


# --- manifest ----------------------------------------------------------------


def write_manifest(records: list[tuple[str, int, str]], path, header: str | None = None) -> None:
    """Line-oriented manifest: `path label source_id` per record."""
    with open(path, "w", encoding="utf-8") as handle:
        if header:
            for line in header.splitlines():
                handle.write(f"# {line}\n")
        for rel_path, label, source_id in records:
            handle.write(f"{rel_path} {label} {source_id}\n")


def read_manifest(path) -> list[tuple[str, int, str]]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[1] not in ("0", "1"):
                raise ValueError(f"malformed manifest line {lineno} in {path}: {line!r}")
            records.append((parts[0], int(parts[1]), parts[2]))
    return records
