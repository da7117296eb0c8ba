"""Hartigans' dip statistic, Monte Carlo dip test, dist-dip test, and KDE.

The dip statistic is the sup-distance between the empirical CDF and its
closest unimodal CDF. The implementation follows the published
greatest-convex-minorant / least-concave-majorant iteration and uses the
convention dip >= 1/(2n), so a perfectly uniform sample attains exactly
1/(2n) and the dip never exceeds 1/4.

p-values are calibrated by Monte Carlo against the uniform null rather than
interpolated tables, with add-one smoothing so p stays in (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .ingest import derive_seed, effective_seed
from .metrics import pairwise_sample

__all__ = ["DipResult", "KdeCurve", "dip_statistic", "dip_test", "dist_dip_test", "kde"]


@dataclass
class DipResult:
    dip: float
    p_value: float
    n: int
    replicates: int
    seed: int

    def to_obj(self) -> dict:
        return {
            "dip": float(self.dip),
            "p_value": float(self.p_value),
            "n": int(self.n),
            "replicates": int(self.replicates),
            "seed": int(self.seed),
        }


@njit(cache=True)
def _dip_sorted(x):
    """Dip statistic of a sorted sample (n >= 4, not all equal).

    Direct port of the GCM/LCM iteration: the candidate modal interval
    [low, high] shrinks until neither side improves, and the dip is half the
    largest deviation found, in units of 1/n.
    """
    n = x.shape[0]

    # mn[j]: index to combine with when walking the greatest convex minorant
    mn = np.empty(n, np.int64)
    mn[0] = 0
    for j in range(1, n):
        mn[j] = j - 1
        while True:
            mnj = mn[j]
            mnmnj = mn[mnj]
            if mnj == 0 or (x[j] - x[mnj]) * (mnj - mnmnj) < (x[mnj] - x[mnmnj]) * (j - mnj):
                break
            mn[j] = mnmnj

    # mj[k]: index to combine with for the least concave majorant
    mj = np.empty(n, np.int64)
    mj[n - 1] = n - 1
    for k in range(n - 2, -1, -1):
        mj[k] = k + 1
        while True:
            mjk = mj[k]
            mjmjk = mj[mjk]
            if mjk == n - 1 or (x[k] - x[mjk]) * (mjk - mjmjk) < (x[mjk] - x[mjmjk]) * (k - mjk):
                break
            mj[k] = mjmjk

    low = 0
    high = n - 1
    d2n = 1.0  # 2n * dip, never below 1
    gcm = np.empty(n, np.int64)
    lcm = np.empty(n, np.int64)

    while True:
        gcm[0] = high
        i = 0
        while gcm[i] > low:
            gcm[i + 1] = mn[gcm[i]]
            i += 1
        ig = i
        l_gcm = i
        ix = ig - 1

        lcm[0] = low
        i = 0
        while lcm[i] < high:
            lcm[i + 1] = mj[lcm[i]]
            i += 1
        ih = i
        l_lcm = i
        iv = 1

        # largest distance between the two envelopes over the modal interval
        d = 1.0
        if l_gcm != 1 or l_lcm != 1:
            d = 0.0
            while True:
                gcmix = gcm[ix]
                lcmiv = lcm[iv]
                if gcmix > lcmiv:
                    gcmi1 = gcm[ix + 1]
                    dx = (lcmiv - gcmi1 + 1) - (x[lcmiv] - x[gcmi1]) * (gcmix - gcmi1) / (
                        x[gcmix] - x[gcmi1]
                    )
                    iv += 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv - 1
                else:
                    lcmiv1 = lcm[iv - 1]
                    dx = (x[gcmix] - x[lcmiv1]) * (lcmiv - lcmiv1) / (x[lcmiv] - x[lcmiv1]) - (
                        gcmix - lcmiv1 - 1
                    )
                    ix -= 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv
                if ix < 0:
                    ix = 0
                if iv > l_lcm:
                    iv = l_lcm
                if gcm[ix] == lcm[iv]:
                    break

        if d < d2n:
            break

        # deviation of the empirical CDF from the convex minorant fit
        dip_l = 0.0
        for j in range(ig, l_gcm):
            max_t = 1.0
            jb = gcm[j + 1]
            je = gcm[j]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (jj - jb + 1) - (x[jj] - x[jb]) * c
                    if max_t < t:
                        max_t = t
            if dip_l < max_t:
                dip_l = max_t

        # deviation from the concave majorant fit
        dip_u = 0.0
        for j in range(ih, l_lcm):
            max_t = 1.0
            jb = lcm[j]
            je = lcm[j + 1]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (x[jj] - x[jb]) * c - (jj - jb - 1)
                    if max_t < t:
                        max_t = t
            if dip_u < max_t:
                dip_u = max_t

        dip_new = dip_u if dip_u > dip_l else dip_l
        if d2n < dip_new:
            d2n = dip_new

        if low == gcm[ig] and high == lcm[ih]:
            break
        low = gcm[ig]
        high = lcm[ih]

    return d2n / (2.0 * n)


@njit(cache=True)
def _dip_rows(rows):
    out = np.empty(rows.shape[0])
    for i in range(rows.shape[0]):
        out[i] = _dip_sorted(rows[i])
    return out


def dip_statistic(samples) -> float:
    """Dip statistic of a univariate sample; degenerate inputs give 1/(2n)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    n = x.size
    x = np.sort(x)
    if n < 4 or x[0] == x[-1]:
        return 1.0 / (2.0 * n)
    return float(_dip_sorted(x))


def dip_test(samples, replicates: int = 2000, rng: np.random.Generator | int = 0) -> DipResult:
    """Dip test with Monte Carlo calibration against the uniform null.

    Each replicate draws a uniform(0, 1) sample of the same size from its own
    seed-derived stream (stream r for replicate r), so results are identical
    however the replicates are scheduled.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    if replicates <= 0:
        raise ValueError("replicates must be positive")
    seed = effective_seed(rng)
    n = x.size
    observed = dip_statistic(x)
    if n < 4:
        return DipResult(dip=observed, p_value=1.0, n=n, replicates=0, seed=seed)

    exceed = 0
    done = 0
    chunk = max(1, int(4_000_000 // n))
    while done < replicates:
        b = min(chunk, replicates - done)
        block = np.empty((b, n))
        for i in range(b):
            ss = np.random.SeedSequence([seed, done + i])
            block[i] = np.random.Generator(np.random.PCG64(ss)).random(n)
        block.sort(axis=1)
        dips = _dip_rows(block)
        exceed += int(np.sum(dips >= observed))
        done += b

    p = (1.0 + exceed) / (replicates + 1.0)
    return DipResult(dip=observed, p_value=p, n=n, replicates=replicates, seed=seed)


def dist_dip_test(
    contours,
    metric: str,
    m: int = 30000,
    replicates: int = 2000,
    rng: np.random.Generator | int = 0,
    embedding=None,
) -> DipResult:
    """Multimodality test on sampled pairwise distances between contours."""
    seed = effective_seed(rng)
    sample = pairwise_sample(
        contours, metric, m=m, rng=derive_seed(seed, "pairs"), embedding=embedding
    )
    result = dip_test(sample.values, replicates=replicates, rng=derive_seed(seed, "null"))
    return DipResult(
        dip=result.dip,
        p_value=result.p_value,
        n=result.n,
        replicates=result.replicates,
        seed=seed,
    )


# --- kernel density estimation ---------------------------------------------


@dataclass
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    degenerate: bool = False


def kde(samples, bandwidth: float | None = None, grid_size: int = 512) -> KdeCurve:
    """Gaussian KDE with Silverman's rule, on a grid padded by 3 bandwidths.

    Zero-variance input degenerates to a single spike at the common value,
    flagged rather than raising.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        grid = np.linspace(x[0] - 0.5, x[0] + 0.5, grid_size)
        density = np.zeros(grid_size)
        center = grid_size // 2
        density[center] = 1.0 / (grid[1] - grid[0])
        return KdeCurve(grid=grid, density=density, bandwidth=0.0, degenerate=True)
    if bandwidth is None:
        q75, q25 = np.percentile(x, [75, 25])
        iqr = q75 - q25
        spread = min(sd, iqr / 1.34) if iqr > 0 else sd
        bandwidth = 0.9 * spread * x.size ** (-0.2)
    h = float(bandwidth)
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, grid_size)
    z = (grid[:, None] - x[None, :]) / h
    density = np.exp(-0.5 * z**2).sum(axis=1) / (x.size * h * np.sqrt(2 * np.pi))
    return KdeCurve(grid=grid, density=density, bandwidth=h, degenerate=False)
