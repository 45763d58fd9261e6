"""Utility functions with idiosyncratic linear coefficients.

A utility is either a table over a finite outcome space or, over a box
space, a fixed base function plus a linear combination of basis coordinates:

    u(x) = base(x) + sum_i coeffs[i] * basis_i(x)

A :class:`PrevalentFamily` fixes the skeleton (space, base, basis) and draws
the coefficient vector from a distribution with a density.  Families with a
density are the ones for which argmax ties over any fixed finite menu occur
with probability zero; the tie-frequency experiment in
:mod:`eqlab.mechanism` witnesses that numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from eqlab.rng import stream_generator

__all__ = [
    "OutcomeSpace",
    "UtilityFn",
    "PrevalentFamily",
    "eval_utility",
    "sample_prevalent",
    "liquidity_shock_draw",
    "BASE_REGISTRY",
]


# ---------------------------------------------------------------------------
# outcome spaces


@dataclass(frozen=True)
class OutcomeSpace:
    """Finite label set or an n-dimensional box.

    Exactly one of ``labels`` (finite kind) or ``bounds`` (box kind) is set.
    ``bounds`` is a sequence of (lo, hi) pairs, one per coordinate.
    """

    labels: tuple[str, ...] | None = None
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if (self.labels is None) == (self.bounds is None):
            raise ValueError("specify exactly one of labels / bounds")
        if self.labels is not None and len(self.labels) < 1:
            raise ValueError("finite space needs at least one outcome")
        if self.bounds is not None:
            if len(self.bounds) < 1:
                raise ValueError("box space needs dimension >= 1")
            for lo, hi in self.bounds:
                if not lo <= hi:
                    raise ValueError(f"empty interval [{lo}, {hi}]")

    @property
    def kind(self) -> str:
        return "finite" if self.labels is not None else "box"

    @property
    def size(self) -> int:
        if self.labels is None:
            raise ValueError("box space has no cardinality")
        return len(self.labels)

    @property
    def dim(self) -> int:
        if self.bounds is None:
            raise ValueError("finite space has no dimension")
        return len(self.bounds)

    def contains(self, x) -> bool:
        if self.labels is not None:
            return 0 <= int(x) < len(self.labels)
        pt = np.asarray(x, dtype=float)
        if pt.shape != (len(self.bounds),):
            return False
        return all(lo <= v <= hi for v, (lo, hi) in zip(pt, self.bounds))


# ---------------------------------------------------------------------------
# base-function registry for box spaces
#
# Bases are referenced by name so configs stay declarative (no code in
# config files).  Each entry maps an n-vector to a scalar.

BASE_REGISTRY: dict[str, Callable[[np.ndarray], float]] = {
    "zero": lambda x: 0.0,
    "linear": lambda x: float(np.sum(x)),
    "bilinear": lambda x: float(np.prod(x[:2])) if x.size >= 2 else float(x[0]),
    "quadratic": lambda x: float(-np.sum(x * x)),
}


def coordinate_basis(n: int) -> tuple[Callable[[np.ndarray], float], ...]:
    """The identity basis v_i(x) = x_i."""
    return tuple((lambda x, i=i: float(x[i])) for i in range(n))


@dataclass(frozen=True)
class UtilityFn:
    """Utility over an :class:`OutcomeSpace`.

    Finite kind: ``table[k]`` is the utility of outcome k.
    Box kind: ``base_id`` names a registry function and the value is
    ``base(x) + coeffs . (basis_1(x), ..., basis_n(x))``.  The basis must be
    injective as a vector map; this is probed on a 32^n grid (n <= 3) at
    construction rather than proven.
    """

    space: OutcomeSpace
    table: tuple[float, ...] | None = None
    base_id: str | None = None
    basis: tuple[Callable[[np.ndarray], float], ...] | None = None
    coeffs: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.space.kind == "finite":
            if self.table is None or len(self.table) != self.space.size:
                raise ValueError("finite utility needs a table matching the space")
        else:
            if self.base_id not in BASE_REGISTRY:
                raise ValueError(f"unknown base function {self.base_id!r}")
            if self.basis is None or self.coeffs is None:
                raise ValueError("box utility needs basis and coeffs")
            if len(self.basis) != len(self.coeffs):
                raise ValueError("basis/coeffs length mismatch")
            _check_basis_injective(self.space, self.basis)


def _check_basis_injective(space: OutcomeSpace, basis, grid_per_dim: int = 32) -> None:
    n = space.dim
    if n > 3:
        # 32^n grid is desk-scale only up to n = 3
        grid_per_dim = 4
    axes = [np.linspace(lo, hi, grid_per_dim) for lo, hi in space.bounds]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    images = np.array([[f(x) for f in basis] for x in mesh])
    order = np.lexsort(images.T[::-1])
    sorted_im = images[order]
    dup = np.all(np.abs(np.diff(sorted_im, axis=0)) <= 1e-12, axis=1)
    if np.any(dup):
        raise ValueError("basis is not injective on the probe grid")


def eval_utility(u: UtilityFn, outcome) -> float:
    """Evaluate ``u`` at a point of its space.

    Finite kind indexes the table; box kind computes base + coeffs . basis.
    """
    if not u.space.contains(outcome):
        raise ValueError(f"outcome {outcome!r} outside the utility's space")
    if u.space.kind == "finite":
        return float(u.table[int(outcome)])
    x = np.asarray(outcome, dtype=float)
    base = BASE_REGISTRY[u.base_id](x)
    return float(base + sum(c * f(x) for c, f in zip(u.coeffs, u.basis)))


# ---------------------------------------------------------------------------
# prevalent families


@dataclass(frozen=True)
class PrevalentFamily:
    """Utility skeleton plus a coefficient density.

    ``lambda_density`` is ("uniform", lo, hi) or ("gaussian", mean, stddev),
    applied coordinate-wise; ``dim`` coordinates are drawn.  For a finite
    space the draw fills the whole table (a density on R^X), so the skeleton
    table acts as a location shift.
    """

    space: OutcomeSpace
    base: UtilityFn
    lambda_density: tuple
    dim: int

    def __post_init__(self):
        kind = self.lambda_density[0]
        if kind == "uniform":
            _, lo, hi = self.lambda_density
            if not hi > lo:
                raise ValueError("uniform density needs hi > lo")
        elif kind == "gaussian":
            _, _, sd = self.lambda_density
            if not sd > 0:
                raise ValueError("gaussian density needs stddev > 0")
        else:
            raise ValueError(f"unknown density kind {kind!r}")
        if self.dim < 1:
            raise ValueError("need at least one random coefficient")


def _draw_coeffs(density: tuple, n: int, rng: np.random.Generator) -> np.ndarray:
    kind = density[0]
    if kind == "uniform":
        return rng.uniform(density[1], density[2], size=n)
    return rng.normal(density[1], density[2], size=n)


def sample_prevalent(family: PrevalentFamily, seed: int, stream: int = 0) -> UtilityFn:
    """Draw one utility from the family; deterministic in (seed, stream)."""
    rng = stream_generator(seed, stream)
    lam = _draw_coeffs(family.lambda_density, family.dim, rng)
    if family.space.kind == "finite":
        if family.dim != family.space.size:
            raise ValueError("finite family must randomize the full table")
        table = tuple(float(b + l) for b, l in zip(family.base.table, lam))
        return UtilityFn(space=family.space, table=table)
    return UtilityFn(
        space=family.space,
        base_id=family.base.base_id,
        basis=family.base.basis,
        coeffs=tuple(float(v) for v in lam),
    )


def sample_prevalent_tables(
    family: PrevalentFamily, n_samples: int, seed: int, stream: int = 0
) -> np.ndarray:
    """Vectorized finite-kind sampling: (n_samples, |X|) array of tables.

    Row k equals ``sample_prevalent`` drawn on substream (stream, k) only in
    distribution, not bitwise; experiments that need bit-level replay record
    (seed, stream, n_samples) and rerun this call, which is itself
    deterministic.
    """
    if family.space.kind != "finite":
        raise ValueError("vectorized sampling is for finite spaces")
    rng = stream_generator(seed, stream)
    kind = family.lambda_density[0]
    shape = (n_samples, family.space.size)
    if kind == "uniform":
        lam = rng.uniform(family.lambda_density[1], family.lambda_density[2], size=shape)
    else:
        lam = rng.normal(family.lambda_density[1], family.lambda_density[2], size=shape)
    return lam + np.asarray(family.base.table, dtype=float)


# ---------------------------------------------------------------------------
# liquidity shocks


def liquidity_shock_draw(f_kappa: tuple, seed: int, stream: int = 0, size=None):
    """Draw private valuations kappa from a distribution inside (1/2, 1).

    ``f_kappa`` is ("point", kappa) or ("uniform", lo, hi).  Bounds outside
    the open interval (1/2, 1) are rejected: stage payoffs need kappa < 1
    for contributing to be individually costly and kappa > 1/2 for full
    contribution to be efficient.
    """
    kind = f_kappa[0]
    if kind == "point":
        k = float(f_kappa[1])
        if not 0.5 < k < 1.0:
            raise ValueError(f"kappa must lie in (1/2, 1), got {k}")
        if size is None:
            return k
        return np.full(size, k)
    if kind == "uniform":
        lo, hi = float(f_kappa[1]), float(f_kappa[2])
        if not (0.5 < lo <= hi < 1.0):
            raise ValueError(f"kappa support [{lo}, {hi}] must sit inside (1/2, 1)")
        rng = stream_generator(seed, stream)
        if size is None:
            return float(rng.uniform(lo, hi))
        return rng.uniform(lo, hi, size=size)
    raise ValueError(f"unknown shock distribution {kind!r}")
