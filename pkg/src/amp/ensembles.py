"""Gaussian random-matrix ensembles and leading-eigenpair extraction.

Sampling is keyed by an explicit (seed, stream_id, draw_index) triple through a
counter-based generator, so replicate workers can draw independently and in any
order while staying bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream for one Monte Carlo replicate."""

    seed: int
    stream_id: int = 0

    def generator(self, draw_index: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed, self.stream_id, draw_index])
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GoeMatrix:
    """Symmetric n x n matrix, off-diagonal N(0,1/n), diagonal N(0,2/n)."""

    n: int
    entries: np.ndarray


@dataclass(frozen=True)
class GaussianDesign:
    """n x p matrix with i.i.d. N(0,1/n) entries."""

    n: int
    p: int
    entries: np.ndarray

    @property
    def delta(self) -> float:
        return self.n / self.p


@dataclass(frozen=True)
class EigenPair:
    """Leading eigenvalue/eigenvector with the vector scaled to ||v||^2 = n."""

    value: float
    vector: np.ndarray
    converged: bool
    iterations: int
    gap: float | None = None


def sample_goe(n: int, rng: RngStream, draw_index: int = 0) -> GoeMatrix:
    """Sample a GOE(n) matrix: W = (G + G^T)/sqrt(2n) for i.i.d. standard G."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    g = rng.generator(draw_index).standard_normal((n, n))
    w = (g + g.T) / np.sqrt(2.0 * n)
    return GoeMatrix(n=n, entries=w)


def sample_design(n: int, p: int, rng: RngStream, draw_index: int = 0) -> GaussianDesign:
    """Sample an n x p design with i.i.d. N(0,1/n) entries."""
    if n < 1 or p < 1:
        raise ValueError("dimensions must be at least 1")
    x = rng.generator(draw_index).standard_normal((n, p)) / np.sqrt(n)
    return GaussianDesign(n=n, p=p, entries=x)


def _orient(vec: np.ndarray, reference: np.ndarray | None) -> np.ndarray:
    if reference is not None:
        if float(vec @ reference) < 0.0:
            return -vec
        return vec
    # Deterministic sign: make the largest-magnitude coordinate positive,
    # ties broken by lowest index (argmax returns the first maximizer).
    i = int(np.argmax(np.abs(vec)))
    if vec[i] < 0.0:
        return -vec
    return vec


def _power_iterate(
    b: np.ndarray, start: np.ndarray, tol: float, max_iter: int
) -> tuple[np.ndarray, bool, int]:
    u = start / np.linalg.norm(start)
    for it in range(1, max_iter + 1):
        w = b @ u
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return u, True, it
        w /= nw
        if 1.0 - abs(float(w @ u)) < tol:
            return w, True, it
        u = w
    return u, False, max_iter


def leading_eigenpair(
    a: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
    reference: np.ndarray | None = None,
    compute_gap: bool = False,
    start: np.ndarray | None = None,
) -> EigenPair:
    """Largest eigenvalue and eigenvector of a symmetric matrix by power iteration.

    The matrix is shifted by a row-sum bound on its spectral radius so the
    target eigenvalue is the dominant one in magnitude. Stops when the angle
    between successive iterates drops below ``tol`` (default 1e-10) or after
    ``max_iter`` steps (default 10n); a non-converged result carries the last
    iterate rather than raising.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if max_iter is None:
        max_iter = 10 * n
    shift = float(np.max(np.sum(np.abs(a), axis=1)))
    b = a + shift * np.eye(n)
    if start is None:
        # Fixed deterministic start; the all-ones vector is almost surely
        # non-orthogonal to the leading eigenvector of a sampled matrix.
        start = np.ones(n)
    u, converged, iters = _power_iterate(b, start, tol, max_iter)
    value = float(u @ (a @ u))
    gap = None
    if compute_gap:
        # One deflation step on the shifted matrix; diagnostics only.
        b2 = b - (value + shift) * np.outer(u, u)
        u2, _, _ = _power_iterate(b2, np.roll(start, 1) + 0.5, tol, max_iter)
        u2 = u2 - u * float(u @ u2)
        nu2 = np.linalg.norm(u2)
        if nu2 > 0:
            u2 /= nu2
            gap = value - float(u2 @ (a @ u2))
    vec = _orient(u * np.sqrt(n), reference)
    return EigenPair(value=value, vector=vec, converged=converged, iterations=iters, gap=gap)
