"""Seeded uniform sampling on the torus and fast map evaluation.

The uniform stream is counter-based (Philox keyed by the seed), with each
sample's two coordinates taken from fixed positions in the raw word
stream.  Chunked or parallel generation therefore reproduces the serial
sequence bit for bit: chunk i simply starts the counter at its own offset.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .grid import DiffeoMap, _Stencil, _wrap_shift

TWO_PI = 2.0 * np.pi

# Philox key word separating this stream from the rejection oracle's
_STREAM_UNIFORM = 0x756E6966  # "unif"

_MASK64 = (1 << 64) - 1

_CHUNK = 1 << 20


@dataclass(frozen=True)
class SampleBatch:
    """Ordered points in [-pi, pi)^2 plus the seed that produced them."""

    points: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidInputError(f"points must be (N, 2), got {pts.shape}")
        if pts.size and (pts.min() < -np.pi or pts.max() >= np.pi):
            raise InvalidInputError("sample coordinates must lie in [-pi, pi)")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]


def _raw_words(seed: int, word_start: int, n_words: int) -> np.ndarray:
    """Words [word_start, word_start + n_words) of the keyed Philox stream.

    The generator emits 4 words per counter block, so the fetch is aligned
    down to a block boundary and the lead-in is sliced off.
    """
    block0, lead = divmod(word_start, 4)
    bg = np.random.Philox(key=[seed & _MASK64, _STREAM_UNIFORM])
    if block0:
        bg.advance(block0)
    n_blocks = -(-(lead + n_words) // 4)
    words = bg.random_raw(n_blocks * 4)
    return words[lead:lead + n_words]


def draw_uniform(n: int, seed: int, start: int = 0) -> SampleBatch:
    """n i.i.d. uniform points on [-pi, pi)^2, sample indices start..start+n-1.

    Fully determined by (seed, index); ``start`` lets callers generate any
    slice of the infinite seeded sequence independently.
    """
    if n < 0:
        raise InvalidInputError(f"sample count must be nonnegative, got {n}")
    if start < 0:
        raise InvalidInputError(f"start index must be nonnegative, got {start}")
    if n == 0:
        return SampleBatch(np.empty((0, 2)), seed)
    words = _raw_words(seed, 2 * start, 2 * n)
    unit = (words >> np.uint64(11)) * (1.0 / (1 << 53))
    return SampleBatch((-np.pi + TWO_PI * unit).reshape(n, 2), seed)


def _transform_chunk(mapping: DiffeoMap, pts: np.ndarray, out: np.ndarray) -> None:
    px = np.ascontiguousarray(pts[:, 0])
    py = np.ascontiguousarray(pts[:, 1])
    st = _Stencil(mapping.grid, px, py, already_wrapped=True)
    out[:, 0] = _wrap_shift(px + st.gather(mapping.disp.u_x.values))
    out[:, 1] = _wrap_shift(py + st.gather(mapping.disp.u_y.values))


def transform_samples(mapping: DiffeoMap, batch: SampleBatch,
                      workers: int = 1) -> SampleBatch:
    """Push every point through the map: y = wrap(x + d(x)).

    Displacement components are bilinearly interpolated; order is preserved
    and the input batch is untouched.  ``workers`` threads split the batch
    into fixed chunks, which changes nothing in the output.
    """
    n = batch.count
    out = np.empty((n, 2))
    spans = [(s, min(s + _CHUNK, n)) for s in range(0, n, _CHUNK)]
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(
                lambda se: _transform_chunk(mapping, batch.points[se[0]:se[1]], out[se[0]:se[1]]),
                spans,
            ))
    else:
        for s, e in spans:
            _transform_chunk(mapping, batch.points[s:e], out[s:e])
    return SampleBatch(out, batch.seed)


def sample_target(mapping: DiffeoMap, n: int, seed: int,
                  workers: int = 1) -> SampleBatch:
    """Draw n seeded uniform points and push them through the map.

    This is the amortized workflow: build the map once, then call this as
    often as fresh samples are needed.
    """
    if n < 0:
        raise InvalidInputError(f"sample count must be nonnegative, got {n}")
    out = np.empty((n, 2))
    spans = [(s, min(s + _CHUNK, n)) for s in range(0, n, _CHUNK)]

    def run(span: tuple[int, int]) -> None:
        s, e = span
        chunk = draw_uniform(e - s, seed, start=s)
        _transform_chunk(mapping, chunk.points, out[s:e])

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))
    else:
        for span in spans:
            run(span)
    return SampleBatch(out, seed)
