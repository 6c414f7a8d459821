"""Trajectory simulation of random maps as a statistical check on computed densities.

An ensemble of ``chains`` trajectories is advanced in lock step with one
PCG64 stream (seeded by ``SimConfig.seed``), which keeps runs bitwise
reproducible.  After ``burn_in`` steps per chain the positions are
histogrammed until ``n_steps`` samples are collected in total.

Maps with slopes that are powers of two collapse every binary64 orbit onto
a fixed point after about 53 steps.  A uniform perturbation of size
``jitter`` (default ``2**-40``) is added after each step to keep orbits
generic; it is far below any histogram resolution.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .density import DEFAULT_GRID, cumulative
from .errors import DomainError, StructureError
from .fperron import as_function

ESCAPE_TOL = 1e-9
GENERATOR = "PCG64"


@dataclass
class SimConfig:
    """Simulation parameters; ``n_steps`` counts histogrammed samples over all chains."""

    seed: int = 0
    n_steps: int = 1_000_000
    burn_in: int = 1000
    bins: int = 50
    chains: int = 1000
    jitter: float = 2.0 ** -40

    def check(self):
        if self.bins < 2:
            raise StructureError("need at least two bins")
        if self.n_steps <= 0 or self.chains <= 0:
            raise StructureError("n_steps and chains must be positive")
        if self.burn_in >= self.n_steps:
            raise StructureError("burn_in must be smaller than n_steps")
        if not 0 <= self.seed < 2 ** 64:
            raise StructureError("seed must fit in 64 bits")
        return self


@dataclass
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def widths(self):
        return np.diff(self.edges)

    def cdf(self):
        """Empirical distribution function at the bin edges."""
        return np.concatenate([[0.0], np.cumsum(self.density * self.widths)])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("bin_lo,bin_hi,density\n")
            for lo, hi, d in zip(self.edges[:-1], self.edges[1:], self.density):
                fh.write(f"{lo:.12g},{hi:.12g},{d:.12g}\n")

    def meta_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True)


def _step(R, x, rng, jitter):
    u = rng.random(x.size)
    y = R.apply(x, u)
    if jitter:
        y = y + jitter * rng.random(x.size)
    return y


def _escape(y):
    if np.any((y < -ESCAPE_TOL) | (y > 1 + ESCAPE_TOL)):
        bad = y[(y < -ESCAPE_TOL) | (y > 1 + ESCAPE_TOL)][0]
        raise DomainError(f"trajectory left [0, 1]: {bad!r}")
    return np.clip(y, 0.0, 1.0)


def simulate(R, x0, cfg=None):
    """Histogram density of ``R`` after burn-in.

    Parameters
    ----------
    R : RandomMap
        The random map; a deterministic map is ``RandomMap(tau, tau, 1.0)``.
    x0 : float
        Common starting point of all chains.
    cfg : SimConfig, optional

    Returns
    -------
    Histogram
        Density over ``cfg.bins`` equal bins with total mass one.
    """
    cfg = (cfg or SimConfig()).check()
    if not 0.0 <= x0 <= 1.0:
        raise DomainError(f"x0 = {x0} is outside [0, 1]")
    chains = min(cfg.chains, cfg.n_steps)
    per_chain = -(-cfg.n_steps // chains)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    x = np.full(chains, float(x0))
    for _ in range(cfg.burn_in):
        x = _escape(_step(R, x, rng, cfg.jitter))
    edges = np.linspace(0.0, 1.0, cfg.bins + 1)
    counts = np.zeros(cfg.bins, dtype=np.int64)
    remaining = cfg.n_steps
    for _ in range(per_chain):
        x = _escape(_step(R, x, rng, cfg.jitter))
        take = x[:remaining]
        counts += np.bincount(np.minimum((take * cfg.bins).astype(int), cfg.bins - 1),
                              minlength=cfg.bins)
        remaining -= take.size
    total = counts.sum()
    density = counts / (total * np.diff(edges))
    meta = {"generator": GENERATOR, "x0": float(x0), **asdict(cfg), "samples": int(total)}
    return Histogram(edges, density, counts, meta)


def ks_distance(hist, f, n=DEFAULT_GRID):
    """``max |empirical CDF - F|`` over the histogram's bin edges."""
    F = cumulative(f if hasattr(f, "breakpoints") else as_function(f), n)
    return float(np.max(np.abs(hist.cdf() - F(hist.edges))))


def bin_deviation(hist, f, n=DEFAULT_GRID):
    """Largest difference between a bin's density and the mean of ``f`` over it."""
    F = cumulative(f if hasattr(f, "breakpoints") else as_function(f), n)
    expected = np.diff(F(hist.edges)) / hist.widths
    return float(np.max(np.abs(hist.density - expected)))


def mass_near(hist, lo, hi):
    """Histogram mass in ``[lo, hi]`` (bins must align with the interval)."""
    inside = (hist.edges[:-1] >= lo - 1e-15) & (hist.edges[1:] <= hi + 1e-15)
    return float(np.sum(hist.density[inside] * hist.widths[inside]))


__all__ = ["SimConfig", "Histogram", "simulate", "ks_distance", "bin_deviation", "mass_near",
           "GENERATOR"]
