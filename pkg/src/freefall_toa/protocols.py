"""Monte Carlo emulation of the position (A) and arrival-time (B) protocols.

Protocol A records ``X_t`` at a fixed time ``t``; protocol B records the
first-passage time ``T_x`` at the detector. Both are sampled through the
standard-normal outcome ``xi`` and binned against the analytic law.

Sampling is done in fixed-size chunks, chunk ``i`` drawing from
``SeedSequence(seed, spawn_key=(i,))``. Results therefore depend only on
``(seed, n_trials)``, never on how chunks are distributed over workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import ndtr, ndtri

from .core import ToaDistribution

__all__ = [
    "CHUNK",
    "SimConfig",
    "Histogram",
    "ProtocolResult",
    "sample_xi_conditioned",
    "sample_positions",
    "sample_toa",
    "run_protocol_a",
    "run_protocol_b",
    "chi_square",
    "default_bins_a",
    "default_bins_b",
]

CHUNK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    n_trials: int
    seed: int
    bin_spec: tuple[float, float, int]  # (left edge, width, number of bins)
    protocol: str = "B"
    workers: int = 1

    def __post_init__(self):
        if int(self.n_trials) < 1:
            raise ValueError("n_trials must be >= 1")
        lo, width, n = self.bin_spec
        if not (math.isfinite(lo) and width > 0 and int(n) >= 1):
            raise ValueError(f"invalid bin_spec {self.bin_spec!r}")
        if self.protocol not in ("A", "B"):
            raise ValueError(f"protocol must be 'A' or 'B', got {self.protocol!r}")

    @property
    def edges(self) -> np.ndarray:
        lo, width, n = self.bin_spec
        return lo + width * np.arange(int(n) + 1)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    n_total: int
    n_overflow: int
    analytic_mass: np.ndarray | None = None
    n_below: int = 0

    @classmethod
    def from_samples(cls, samples: np.ndarray, edges: np.ndarray) -> "Histogram":
        counts, _ = np.histogram(samples, bins=edges)
        n_in = int(counts.sum())
        below = int(np.count_nonzero(samples < edges[0]))
        return cls(edges=np.asarray(edges, dtype=float), counts=counts.astype(np.int64),
                   n_total=int(samples.size), n_overflow=int(samples.size) - n_in,
                   n_below=below)

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different edges")
        return Histogram(self.edges, self.counts + other.counts,
                         self.n_total + other.n_total,
                         self.n_overflow + other.n_overflow,
                         self.analytic_mass, self.n_below + other.n_below)

    def to_rows(self) -> list[dict]:
        mass = self.analytic_mass if self.analytic_mass is not None else \
            np.full(self.counts.size, np.nan)
        return [
            {"bin_left": float(a), "bin_right": float(b), "count": int(c),
             "analytic_mass": float(p)}
            for a, b, c, p in zip(self.edges[:-1], self.edges[1:], self.counts, mass)
        ]

    def to_csv(self, metadata: dict | None = None) -> str:
        buf = io.StringIO()
        for k, v in (metadata or {}).items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count", "analytic_mass"])
        for row in self.to_rows():
            w.writerow([f"{row['bin_left']:.17g}", f"{row['bin_right']:.17g}",
                        row["count"], f"{row['analytic_mass']:.17g}"])
        return buf.getvalue()

    def to_json(self, metadata: dict | None = None) -> str:
        return json.dumps({
            "metadata": metadata or {},
            "n_total": self.n_total,
            "n_overflow": self.n_overflow,
            "n_below": self.n_below,
            "bins": self.to_rows(),
        }, indent=2)


@dataclass
class ProtocolResult:
    histogram: Histogram
    mean: float
    std: float
    se_mean: float
    se_std: float
    chi2: float
    dof: int
    p_value: float
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "n_total": self.histogram.n_total,
            "n_overflow": self.histogram.n_overflow,
            "mean": self.mean, "std": self.std,
            "se_mean": self.se_mean, "se_std": self.se_std,
            "chi2": self.chi2, "dof": self.dof, "p_value": self.p_value,
            **self.extra,
        }


def sample_xi_conditioned(upper: float, n: int, rng: np.random.Generator,
                          method: str = "rejection", max_rounds: int = 64) -> np.ndarray:
    """Draw ``n`` standard normals conditioned on ``xi <= upper``.

    Rejection against the plain normal accepts with probability
    ``Phi(upper)``, above one half for any positive ``upper``. If that loop
    runs out of rounds (tiny or negative ``upper``) the remainder is filled by
    inverse-CDF sampling.
    """
    if method == "inverse":
        return ndtri(rng.random(n) * ndtr(upper))
    if method != "rejection":
        raise ValueError(f"unknown method {method!r}")
    out = np.empty(n)
    filled = 0
    accept = max(float(ndtr(upper)), 1e-3)
    for _ in range(max_rounds):
        if filled == n:
            return out
        need = n - filled
        draw = rng.standard_normal(int(need / accept * 1.05) + 16)
        draw = draw[draw <= upper][:need]
        out[filled:filled + draw.size] = draw
        filled += draw.size
    if filled < n:
        out[filled:] = ndtri(rng.random(n - filled) * ndtr(upper))
    return out


def _chunked(n: int, seed: int, fn, workers: int = 1) -> np.ndarray:
    jobs = [(i, min(CHUNK, n - i * CHUNK)) for i in range(-(-n // CHUNK))]

    def run(job):
        i, size = job
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,))))
        return fn(size, rng)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.concatenate(parts)


def sample_positions(dist: ToaDistribution, t: float, n: int, seed: int,
                     workers: int = 1) -> np.ndarray:
    mu = dist.position_mean(t)
    s = dist.position_sigma(t)
    return _chunked(n, seed, lambda k, rng: mu + s * rng.standard_normal(k), workers)


def sample_toa(dist: ToaDistribution, n: int, seed: int, workers: int = 1,
               method: str = "rejection") -> np.ndarray:
    def draw(k, rng):
        return dist.toa_map(sample_xi_conditioned(dist.upper, k, rng, method=method))
    return np.atleast_1d(_chunked(n, seed, draw, workers))


def chi_square(counts: np.ndarray, mass: np.ndarray, n_total: int,
               min_expected: float = 5.0) -> tuple[float, int, float]:
    """Pearson statistic of binned counts against analytic bin masses.

    Everything outside the bins forms one extra cell. Adjacent cells are
    pooled left to right until each expects at least ``min_expected``.
    """
    obs = np.append(np.asarray(counts, dtype=float), n_total - counts.sum())
    outside = max(1.0 - float(np.sum(mass)), 0.0)
    exp = np.append(np.asarray(mass, dtype=float), outside) * n_total

    pooled_o, pooled_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if pooled_e:
            pooled_o[-1] += acc_o
            pooled_e[-1] += acc_e
        else:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
    o = np.array(pooled_o)
    e = np.array(pooled_e)
    if o.size < 2:
        return 0.0, 0, 1.0
    e *= o.sum() / e.sum()
    res = stats.chisquare(o, e)
    return float(res.statistic), int(o.size - 1), float(res.pvalue)


def _sample_stats(x: np.ndarray) -> tuple[float, float, float, float]:
    n = x.size
    mean = float(np.mean(x))
    c = x - mean
    var = float(np.mean(c * c))
    std = math.sqrt(var)
    m4 = float(np.mean(c ** 4))
    se_mean = std / math.sqrt(n)
    # delta-method standard error of the sample standard deviation
    se_std = math.sqrt(max(m4 - var * var, 0.0) / n) / (2.0 * std) if std > 0 else 0.0
    return mean, std, se_mean, se_std


def default_bins_a(dist: ToaDistribution, t: float, n_bins: int = 50,
                   width_sigmas: float = 5.0) -> tuple[float, float, int]:
    mu = dist.position_mean(t)
    s = dist.position_sigma(t)
    return (mu - width_sigmas * s, 2.0 * width_sigmas * s / n_bins, n_bins)


def default_bins_b(dist: ToaDistribution, n_bins: int = 50,
                   tail: float = 1e-4) -> tuple[float, float, int]:
    lo = float(dist.toa_quantile(tail))
    hi = float(dist.toa_quantile(1.0 - tail))
    return (lo, (hi - lo) / n_bins, n_bins)


def run_protocol_a(dist: ToaDistribution, t: float, cfg: SimConfig) -> ProtocolResult:
    """Position at fixed time ``t``, binned against the Gaussian position law."""
    if not t >= 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    x = sample_positions(dist, t, cfg.n_trials, cfg.seed, cfg.workers)
    edges = cfg.edges
    hist = Histogram.from_samples(x, edges)
    z = (edges - dist.position_mean(t)) / dist.position_sigma(t)
    hist.analytic_mass = np.diff(ndtr(z))
    chi2, dof, p = chi_square(hist.counts, hist.analytic_mass, hist.n_total)
    mean, std, se_m, se_s = _sample_stats(x)
    return ProtocolResult(hist, mean, std, se_m, se_s, chi2, dof, p,
                          extra={"protocol": "A", "t": t,
                                 "expected_mean": dist.position_mean(t),
                                 "expected_std": dist.position_sigma(t)})


def run_protocol_b(dist: ToaDistribution, cfg: SimConfig,
                   method: str = "rejection") -> ProtocolResult:
    """Arrival time at the detector, binned against the analytic arrival law."""
    t = sample_toa(dist, cfg.n_trials, cfg.seed, cfg.workers, method=method)
    edges = cfg.edges
    hist = Histogram.from_samples(t, edges)
    hist.analytic_mass = np.diff(dist.toa_cdf(edges))
    chi2, dof, p = chi_square(hist.counts, hist.analytic_mass, hist.n_total)
    mean, std, se_m, se_s = _sample_stats(t)
    return ProtocolResult(hist, mean, std, se_m, se_s, chi2, dof, p,
                          extra={"protocol": "B", "x": dist.params.x,
                                 "fraction_below": hist.n_below / hist.n_total})
