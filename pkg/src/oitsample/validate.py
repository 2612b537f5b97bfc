"""Statistical ground truth: histograms, chi-squared tests, rejection oracle.

The rejection sampler draws exactly from the bilinearly interpolated
density, which is also the law whose per-bin masses ``expected_bin_mass``
integrates; comparing transported samples against either therefore
isolates transport error from grid-discretization error.

P-values come from an in-package regularized incomplete gamma (series +
continued fraction), so no statistics library is required at runtime.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .geodesic import Density
from .grid import _Stencil
from .sampler import SampleBatch

TWO_PI = 2.0 * np.pi

_STREAM_ORACLE = 0x6F726163  # "orac"; keeps oracle draws off the sampler stream
_MASK64 = (1 << 64) - 1

_MIN_EXPECTED = 5.0

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BinnedHistogram:
    """Counts over an equal-width periodic binning of the torus."""

    b_x: int
    b_y: int
    counts: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (self.b_x, self.b_y):
            raise InvalidInputError(f"counts shape {c.shape} != ({self.b_x}, {self.b_y})")
        if (c < 0).any():
            raise InvalidInputError("counts must be nonnegative")
        c = np.ascontiguousarray(c)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def histogram(batch: SampleBatch, b_x: int, b_y: int) -> BinnedHistogram:
    """Bin points with the right-open convention floor((x + pi)/width)."""
    if b_x < 1 or b_y < 1:
        raise InvalidInputError("need at least one bin per axis")
    pts = batch.points
    ix = ((pts[:, 0] + np.pi) * (b_x / TWO_PI)).astype(np.int64)
    iy = ((pts[:, 1] + np.pi) * (b_y / TWO_PI)).astype(np.int64)
    np.clip(ix, 0, b_x - 1, out=ix)
    np.clip(iy, 0, b_y - 1, out=iy)
    counts = np.bincount(ix * b_y + iy, minlength=b_x * b_y)
    return BinnedHistogram(b_x, b_y, counts.reshape(b_x, b_y))


def expected_bin_mass(target: Density, b_x: int, b_y: int) -> np.ndarray:
    """Per-bin mass of the bilinearly interpolated target density.

    The integral of the interpolant over one grid cell is the cell's
    corner average times the cell volume, so bin masses are exact sums of
    cell masses.  Requires the grid resolution to be a multiple of the bin
    resolution; returns shape (b_x, b_y), summing to the density's mass.
    """
    grid = target.grid
    if grid.n_x % b_x or grid.n_y % b_y:
        raise InvalidInputError(
            f"grid {grid.n_x}x{grid.n_y} is not a multiple of bins {b_x}x{b_y}"
        )
    v = target.field.values
    east = np.roll(v, -1, axis=0)
    corners = 0.25 * (v + east + np.roll(v, -1, axis=1) + np.roll(east, -1, axis=1))
    cells = corners * grid.cell_volume
    m_x = grid.n_x // b_x
    m_y = grid.n_y // b_y
    return cells.reshape(b_x, m_x, b_y, m_y).sum(axis=(1, 3))


# ---------------------------------------------------------------------------
# regularized incomplete gamma, for chi-squared tail probabilities


def _gamma_p_series(a: float, x: float) -> float:
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(10000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x), accurate to ~1e-14."""
    if a <= 0.0 or x < 0.0:
        raise InvalidInputError("need a > 0 and x >= 0")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def chi_squared_survival(x: float, dof: int) -> float:
    """P(Chi2_dof >= x)."""
    if dof < 1:
        raise InvalidInputError("dof must be positive")
    return regularized_gamma_q(0.5 * dof, 0.5 * x)


# ---------------------------------------------------------------------------
# deterministic low-count bin merging


def _merge_small_bins(b_x: int, b_y: int, sizes: np.ndarray,
                      payloads: list[np.ndarray]) -> list[np.ndarray]:
    """Merge bins whose ``sizes`` entry is below the 5-count threshold.

    Scans bins in row-major order, repeatedly, absorbing each low bin into
    its largest 4-adjacent neighbor group on the bin torus (ties go to the
    smaller root index).  ``sizes`` and every payload accumulate group-wise.
    Returns the payloads restricted to surviving groups, in row-major root
    order.  Raises DegenerateInputError if fewer than two groups survive.
    """
    total = b_x * b_y
    parent = np.arange(total)
    sizes = sizes.astype(np.float64).copy()
    payloads = [p.astype(np.float64).copy() for p in payloads]

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    changed = True
    while changed:
        changed = False
        for b in range(total):
            root = find(b)
            if root != b or sizes[root] >= _MIN_EXPECTED:
                continue
            i, j = divmod(b, b_y)
            neighbors = {
                find(((i - 1) % b_x) * b_y + j),
                find(((i + 1) % b_x) * b_y + j),
                find(i * b_y + (j - 1) % b_y),
                find(i * b_y + (j + 1) % b_y),
            }
            neighbors.discard(root)
            if not neighbors:
                continue
            target = max(sorted(neighbors), key=lambda g: (sizes[g], -g))
            sizes[target] += sizes[root]
            for p in payloads:
                p[target] += p[root]
            parent[root] = target
            changed = True

    roots = sorted({find(b) for b in range(total)})
    if len(roots) < 2:
        raise DegenerateInputError("bin merging collapsed everything into one group")
    idx = np.asarray(roots)
    return [p[idx] for p in payloads]


def chi_squared_gof(hist: BinnedHistogram, expected_mass: np.ndarray):
    """Pearson goodness-of-fit test of counts against expected masses.

    Bins with expected count below 5 are merged deterministically first.
    Returns (statistic, dof, p_value).
    """
    mass = np.asarray(expected_mass, dtype=np.float64).reshape(-1)
    if mass.size != hist.b_x * hist.b_y:
        raise InvalidInputError("expected-mass size does not match binning")
    expected = hist.total * mass
    observed = hist.counts.reshape(-1)
    obs_m, exp_m = _merge_small_bins(hist.b_x, hist.b_y, expected,
                                     [observed, expected])
    stat = float(((obs_m - exp_m) ** 2 / exp_m).sum())
    dof = len(obs_m) - 1
    return stat, dof, chi_squared_survival(stat, dof)


def two_sample_chi_squared(a: BinnedHistogram, b: BinnedHistogram):
    """Pearson two-sample test with pooled expectations.

    Merging uses the smaller of the two per-bin expected counts, so every
    surviving group has at least 5 expected in both samples.
    Returns (statistic, dof, p_value).
    """
    if (a.b_x, a.b_y) != (b.b_x, b.b_y):
        raise InvalidInputError("histograms use different binnings")
    n_a = a.total
    n_b = b.total
    if n_a == 0 or n_b == 0:
        raise DegenerateInputError("two-sample test needs nonempty histograms")
    obs_a = a.counts.reshape(-1).astype(np.float64)
    obs_b = b.counts.reshape(-1).astype(np.float64)
    pooled = (obs_a + obs_b) / (n_a + n_b)
    exp_a = n_a * pooled
    exp_b = n_b * pooled
    oa, ob, ea, eb = _merge_small_bins(
        a.b_x, a.b_y, np.minimum(exp_a, exp_b), [obs_a, obs_b, exp_a, exp_b]
    )
    stat = float((((oa - ea) ** 2) / ea).sum() + (((ob - eb) ** 2) / eb).sum())
    dof = len(oa) - 1
    return stat, dof, chi_squared_survival(stat, dof)


# ---------------------------------------------------------------------------
# exact ground-truth sampler


def rejection_sample_oracle(target: Density, n: int, seed: int,
                            with_stats: bool = False):
    """Exact i.i.d. samples from the interpolated target density.

    Proposes uniformly on the torus and accepts with probability
    mu(x)/max(mu); bilinear interpolation never exceeds the nodal maximum,
    so the envelope is sound.  Fully determined by the seed (a dedicated
    counter-based stream, independent of ``draw_uniform``'s).

    With ``with_stats`` the return value is (batch, stats) where stats
    reports proposal counts and the measured acceptance rate.
    """
    if n < 0:
        raise InvalidInputError(f"sample count must be nonnegative, got {n}")
    vmax = float(target.field.values.max())
    gen = np.random.Generator(np.random.Philox(key=[seed & _MASK64, _STREAM_ORACLE]))
    accepted: list[np.ndarray] = []
    got = 0
    proposed = 0
    while got < n:
        block = max(4 * (n - got), 1 << 16)
        draw = gen.random((block, 3))
        pts = -np.pi + TWO_PI * draw[:, :2]
        st = _Stencil(target.grid, np.ascontiguousarray(pts[:, 0]),
                      np.ascontiguousarray(pts[:, 1]), already_wrapped=True)
        density_at = st.gather(target.field.values)
        hits = np.nonzero(draw[:, 2] * vmax < density_at)[0]
        if len(hits) > n - got:
            hits = hits[: n - got]
            proposed += int(hits[-1]) + 1  # only proposals up to the last one used
        else:
            proposed += block
        accepted.append(pts[hits])
        got += len(hits)
    points = np.concatenate(accepted) if accepted else np.empty((0, 2))
    rate = got / proposed if proposed else 1.0
    log.info("rejection oracle: %d/%d proposals accepted (rate %.4f, envelope %.4f)",
             got, proposed, rate, 1.0 / (vmax * 4.0 * np.pi**2))
    batch = SampleBatch(points, seed)
    if with_stats:
        return batch, {"proposed": proposed, "accepted": got, "rate": rate}
    return batch
