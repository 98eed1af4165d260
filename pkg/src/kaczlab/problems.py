"""Synthetic problem generators.

Every generator returns a row-normalized system with a planted Gaussian
solution, so the systems are consistent by construction.  The four kinds
cover the regimes the solver family cares about: generic well-spread rows,
a singular spectrum, nearly collinear rows, and perfectly conditioned
aligned blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadDimensionsError
from .linalg import LinearSystem
from .sampling import Partition, partition_spec


@dataclass(frozen=True)
class GaussianNormalized:
    m: int
    n: int
    seed: int = 0


@dataclass(frozen=True)
class RankDeficient:
    """A = U diag(s) V^T with ``rank`` nonzero singular values, rows then
    normalized; lambda_min(A A^T) = 0 whenever m > rank."""

    m: int
    n: int
    rank: int
    seed: int = 0


@dataclass(frozen=True)
class CoherentRows:
    """Unit rows interpolated toward a common direction; coherence = 1
    collapses the matrix to rank one (squared spectral norm = m)."""

    m: int
    n: int
    coherence: float
    seed: int = 0


@dataclass(frozen=True)
class OrthonormalBlocks:
    """Stacked blocks of ``block_size`` orthonormal rows; under the aligned
    partition every block Gram is the identity, so lambda_max^block = 1."""

    m: int
    n: int
    block_size: int
    seed: int = 0


ProblemRecipe = GaussianNormalized | RankDeficient | CoherentRows | OrthonormalBlocks


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms < 1e-12):
        raise BadDimensionsError("degenerate (near-zero) row produced; try another seed")
    rows = rows / norms[:, None]
    return rows / np.linalg.norm(rows, axis=1)[:, None]


def generate_problem(recipe: ProblemRecipe) -> LinearSystem:
    """Deterministic in the recipe (seed included)."""
    if recipe.m < 1 or recipe.n < 1:
        raise BadDimensionsError(f"bad dimensions m={recipe.m}, n={recipe.n}")
    rng = np.random.default_rng(recipe.seed)

    if isinstance(recipe, GaussianNormalized):
        A = _unit_rows(rng.standard_normal((recipe.m, recipe.n)))
    elif isinstance(recipe, RankDeficient):
        r = recipe.rank
        if not 1 <= r <= min(recipe.m, recipe.n):
            raise BadDimensionsError(f"rank must lie in 1..min(m, n), got {r}")
        U, _ = np.linalg.qr(rng.standard_normal((recipe.m, r)))
        V, _ = np.linalg.qr(rng.standard_normal((recipe.n, r)))
        s = np.linspace(1.0, 2.0, r)
        A = _unit_rows((U * s) @ V.T)
    elif isinstance(recipe, CoherentRows):
        c = recipe.coherence
        if not 0.0 <= c <= 1.0:
            raise BadDimensionsError(f"coherence must lie in [0, 1], got {c}")
        v = _unit_rows(rng.standard_normal((1, recipe.n)))[0]
        U = _unit_rows(rng.standard_normal((recipe.m, recipe.n)))
        A = _unit_rows((1.0 - c) * U + c * v)
    elif isinstance(recipe, OrthonormalBlocks):
        bs = recipe.block_size
        if bs < 1 or recipe.m % bs != 0 or bs > recipe.n:
            raise BadDimensionsError(
                f"block_size must divide m and be <= n, got block_size={bs}, m={recipe.m}, n={recipe.n}"
            )
        blocks = []
        for _ in range(recipe.m // bs):
            Q, _ = np.linalg.qr(rng.standard_normal((recipe.n, bs)))
            blocks.append(Q.T)
        A = np.vstack(blocks)
    else:
        raise BadDimensionsError(f"unknown recipe {recipe!r}")

    x_planted = rng.standard_normal(recipe.n)
    return LinearSystem(A, A @ x_planted, planted_solution=x_planted, normalized=True)


def aligned_partition(m: int, block_size: int) -> Partition:
    """Contiguous blocks of ``block_size`` rows (the partition matching
    OrthonormalBlocks)."""
    if block_size < 1 or m % block_size != 0:
        raise BadDimensionsError(f"block_size must divide m, got {block_size}, m={m}")
    blocks = [range(i, i + block_size) for i in range(0, m, block_size)]
    return partition_spec(blocks)


def parse_recipe(text: str, seed: int = 0) -> ProblemRecipe:
    """Parse ``kind:MxN[:param]`` recipe strings.

    Kinds: ``gaussian:50x20``, ``rank-deficient:30x20:10``,
    ``coherent:40x10:0.8``, ``orthoblocks:32x32:8``.
    """
    parts = text.split(":")
    kind = parts[0].lower()
    try:
        m, n = (int(t) for t in parts[1].split("x"))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"cannot parse recipe {text!r}: expected kind:MxN[:param]") from exc
    if kind == "gaussian":
        return GaussianNormalized(m, n, seed)
    if kind == "rank-deficient":
        return RankDeficient(m, n, int(parts[2]), seed)
    if kind == "coherent":
        return CoherentRows(m, n, float(parts[2]), seed)
    if kind == "orthoblocks":
        return OrthonormalBlocks(m, n, int(parts[2]), seed)
    raise ValueError(f"unknown recipe kind {kind!r}")


def recipe_to_dict(recipe: ProblemRecipe) -> dict:
    doc = {"m": recipe.m, "n": recipe.n, "seed": recipe.seed}
    if isinstance(recipe, GaussianNormalized):
        doc["kind"] = "gaussian"
    elif isinstance(recipe, RankDeficient):
        doc |= {"kind": "rank-deficient", "rank": recipe.rank}
    elif isinstance(recipe, CoherentRows):
        doc |= {"kind": "coherent", "coherence": recipe.coherence}
    else:
        doc |= {"kind": "orthoblocks", "block_size": recipe.block_size}
    return doc


def recipe_from_dict(doc: dict) -> ProblemRecipe:
    kind = doc["kind"]
    m, n, seed = int(doc["m"]), int(doc["n"]), int(doc.get("seed", 0))
    if kind == "gaussian":
        return GaussianNormalized(m, n, seed)
    if kind == "rank-deficient":
        return RankDeficient(m, n, int(doc["rank"]), seed)
    if kind == "coherent":
        return CoherentRows(m, n, float(doc["coherence"]), seed)
    if kind == "orthoblocks":
        return OrthonormalBlocks(m, n, int(doc["block_size"]), seed)
    raise ValueError(f"unknown recipe kind {kind!r}")
