"""Skip-gram-with-negative-sampling training of node embeddings.

For every walk position, nodes within a (dynamically shrunk) window form
positive (center, context) pairs; negatives are drawn from the corpus
unigram distribution raised to the 3/4 power, and a draw that lands on a
node visible in the current window is skipped (co-occurring nodes are
never pushed apart by chance). Each pair triggers one SGD step: gradients
of

    loss = -ln s(center . context) - sum_i ln s(-center . neg_i)

are evaluated at the pre-update parameters and applied to the center row of
the input table and the context/negative rows of the output table. The
logistic argument is clamped to [-30, 30] so training can never overflow.

The hot loop is a numba kernel over flattened walks. With one thread the
result is byte-deterministic for a given seed; with several threads workers
share the tables lock-free (lost updates are benign) and only statistical
properties hold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .walks import WalkCorpus

_SIGMOID_CLAMP = 30.0


@dataclass(frozen=True)
class EmbedConfig:
    """Training knobs; ``dimensions=None`` means floor(sqrt(node count)).

    ``threads=1`` is the deterministic mode required for reproducible runs.
    """

    dimensions: int | None = None
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    final_learning_rate: float = 1e-4
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.dimensions is not None and self.dimensions < 1:
            raise ValueError("dimensions must be at least 1")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.negatives < 1:
            raise ValueError("negatives must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass
class EmbeddingMatrix:
    """Input vectors are the published embeddings (row i = dealer i);
    output vectors are the context table used only during training."""

    input_vectors: np.ndarray
    output_vectors: np.ndarray
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def vectors(self) -> np.ndarray:
        return self.input_vectors


def default_dimensions(n: int) -> int:
    """floor(sqrt(n)), clamped to at least 2."""
    if n < 1:
        raise ValueError("node count must be at least 1")
    return max(2, math.isqrt(n))


def _sigmoid(x: float) -> float:
    x = min(max(x, -_SIGMOID_CLAMP), _SIGMOID_CLAMP)
    return 1.0 / (1.0 + math.exp(-x))


def _as_matrix(negatives) -> np.ndarray:
    negatives = np.asarray(negatives, dtype=np.float64)
    if negatives.size == 0:
        return negatives.reshape(0, 0)
    if negatives.ndim == 1:
        return negatives.reshape(1, -1)
    return negatives


def sgns_pair_loss(center, context, negatives=()) -> float:
    """Loss of one positive pair plus its negative samples."""
    center = np.asarray(center, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    negs = _as_matrix(negatives)
    if center.shape != context.shape or (
        negs.size and negs.shape[1] != center.shape[0]
    ):
        raise ValueError("all vectors must have the same dimension")
    loss = -math.log(_sigmoid(float(center @ context)))
    for row in negs:
        loss += -math.log(_sigmoid(-float(center @ row)))
    return loss


def sgns_gradients(center, context, negatives=()):
    """Analytic gradients of :func:`sgns_pair_loss` w.r.t. all inputs.

    Returns ``(g_center, g_context, g_negatives)`` where
    ``g_center = (s(c.x) - 1) x + sum_i s(c.n_i) n_i``,
    ``g_context = (s(c.x) - 1) c`` and ``g_negatives[i] = s(c.n_i) c``.
    """
    center = np.asarray(center, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    negs = _as_matrix(negatives)
    if center.shape != context.shape or (
        negs.size and negs.shape[1] != center.shape[0]
    ):
        raise ValueError("all vectors must have the same dimension")
    pos_coef = _sigmoid(float(center @ context)) - 1.0
    g_center = pos_coef * context
    g_context = pos_coef * center
    g_negs = np.zeros_like(negs)
    for i, row in enumerate(negs):
        coef = _sigmoid(float(center @ row))
        g_center = g_center + coef * row
        g_negs[i] = coef * center
    return g_center, g_context, g_negs


@njit(cache=True, nogil=True)
def _sgns_kernel(
    vin,
    vout,
    tokens,
    offsets,
    eff_window,
    negatives,
    w_lo,
    w_hi,
    n_negs,
    lr_start,
    lr_final,
    token_base,
    total_tokens,
    pair_base,
):
    """Sequential SGD over all pairs of walks [w_lo, w_hi).

    ``token_base``/``pair_base`` anchor the learning-rate schedule and the
    pre-drawn negatives for this chunk. Returns (pairs done, summed loss).
    """
    d = vin.shape[1]
    g_center = np.empty(d)
    tokens_done = 0
    pair_idx = pair_base
    loss_sum = 0.0
    for w in range(w_lo, w_hi):
        lo = offsets[w]
        length = offsets[w + 1] - lo
        for i in range(length):
            center = tokens[lo + i]
            b = eff_window[lo + i]
            progress = float(token_base + tokens_done) / float(total_tokens)
            lr = lr_start + (lr_final - lr_start) * progress
            tokens_done += 1
            j_first = i - b if i - b > 0 else 0
            j_last = i + b if i + b < length - 1 else length - 1
            for j in range(j_first, j_last + 1):
                if j == i:
                    continue
                context = tokens[lo + j]
                dot = 0.0
                for t in range(d):
                    dot += vin[center, t] * vout[context, t]
                if dot > _SIGMOID_CLAMP:
                    dot = _SIGMOID_CLAMP
                elif dot < -_SIGMOID_CLAMP:
                    dot = -_SIGMOID_CLAMP
                sig = 1.0 / (1.0 + np.exp(-dot))
                loss_sum += -np.log(sig)
                coef = sig - 1.0
                for t in range(d):
                    g_center[t] = coef * vout[context, t]
                for t in range(d):
                    vout[context, t] -= lr * coef * vin[center, t]
                for m in range(n_negs):
                    neg = negatives[pair_idx, m]
                    # Skip draws that co-occur in this very window; pushing
                    # an observed neighbor away would fight the positives.
                    collides = False
                    for jj in range(j_first, j_last + 1):
                        if tokens[lo + jj] == neg:
                            collides = True
                            break
                    if collides:
                        continue
                    dot = 0.0
                    for t in range(d):
                        dot += vin[center, t] * vout[neg, t]
                    if dot > _SIGMOID_CLAMP:
                        dot = _SIGMOID_CLAMP
                    elif dot < -_SIGMOID_CLAMP:
                        dot = -_SIGMOID_CLAMP
                    sig = 1.0 / (1.0 + np.exp(-dot))
                    loss_sum += -np.log(1.0 - sig)
                    for t in range(d):
                        g_center[t] += sig * vout[neg, t]
                    for t in range(d):
                        vout[neg, t] -= lr * sig * vin[center, t]
                pair_idx += 1
                for t in range(d):
                    vin[center, t] -= lr * g_center[t]
    return pair_idx - pair_base, loss_sum


def _flatten(corpus: WalkCorpus) -> tuple[np.ndarray, np.ndarray]:
    offsets = np.zeros(len(corpus.walks) + 1, dtype=np.int64)
    for i, walk in enumerate(corpus.walks):
        offsets[i + 1] = offsets[i] + len(walk)
    tokens = np.empty(offsets[-1], dtype=np.int32)
    for i, walk in enumerate(corpus.walks):
        tokens[offsets[i] : offsets[i + 1]] = walk
    return tokens, offsets


def _unigram_cdf(tokens: np.ndarray, n: int) -> np.ndarray:
    counts = np.bincount(tokens, minlength=n).astype(np.float64)
    powered = counts**0.75
    return np.cumsum(powered / powered.sum())


def _draws_rng(seed: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(1,))
    return np.random.Generator(np.random.PCG64(ss))


def train(corpus: WalkCorpus, n: int, cfg: EmbedConfig) -> EmbeddingMatrix:
    """Train embeddings for ``n`` nodes from the walk corpus.

    Raises ``ValueError`` if any walk references a node id outside
    ``0..n-1``. An empty corpus returns the initialization untouched.
    """
    d = cfg.dimensions if cfg.dimensions is not None else default_dimensions(max(n, 1))
    init_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    )
    vin = (init_rng.random((n, d)) - 0.5) / d
    vout = np.zeros((n, d), dtype=np.float64)
    matrix = EmbeddingMatrix(vin, vout)

    tokens, offsets = _flatten(corpus)
    if tokens.size == 0:
        return matrix
    if tokens.min() < 0 or tokens.max() >= n:
        raise ValueError(
            f"walk corpus references node {int(tokens.max())} outside 0..{n - 1}"
        )

    cdf = _unigram_cdf(tokens, n)
    n_tokens = tokens.size
    # Position of each token in its walk and the walk length, for counting
    # how many positive pairs an effective window produces.
    pos_in_walk = np.concatenate(
        [np.arange(offsets[i + 1] - offsets[i]) for i in range(len(offsets) - 1)]
    )
    walk_lengths = np.concatenate(
        [
            np.full(offsets[i + 1] - offsets[i], offsets[i + 1] - offsets[i])
            for i in range(len(offsets) - 1)
        ]
    )
    total_tokens = max(1, cfg.epochs * n_tokens)

    # The training set is fixed up front: effective windows and negative
    # draws are sampled once and every epoch iterates over the same pairs.
    rng = _draws_rng(cfg.seed)
    eff_window = rng.integers(1, cfg.window + 1, n_tokens).astype(np.int32)
    pair_counts = np.minimum(pos_in_walk, eff_window) + np.minimum(
        walk_lengths - 1 - pos_in_walk, eff_window
    )
    total_pairs = int(pair_counts.sum())
    draws = rng.random(total_pairs * cfg.negatives)
    negs = np.minimum(np.searchsorted(cdf, draws, side="right"), n - 1).astype(
        np.int32
    )
    negs = negs.reshape(total_pairs, cfg.negatives)

    for epoch in range(cfg.epochs):
        token_base = epoch * n_tokens

        if cfg.threads == 1:
            pairs_done, loss_sum = _sgns_kernel(
                vin, vout, tokens, offsets, eff_window, negs,
                0, len(offsets) - 1, cfg.negatives,
                cfg.learning_rate, cfg.final_learning_rate,
                token_base, total_tokens, 0,
            )
        else:
            pairs_done, loss_sum = _train_epoch_hogwild(
                vin, vout, tokens, offsets, eff_window, negs, pair_counts,
                cfg, token_base, total_tokens,
            )
        matrix.epoch_losses.append(loss_sum / max(1, pairs_done))
    return matrix


def _train_epoch_hogwild(
    vin, vout, tokens, offsets, eff_window, negs, pair_counts, cfg,
    token_base, total_tokens,
):
    """Lock-free parallel epoch: walk ranges split across threads."""
    from concurrent.futures import ThreadPoolExecutor

    n_walks = len(offsets) - 1
    bounds = np.linspace(0, n_walks, cfg.threads + 1).astype(np.int64)
    # Pair offset of each walk, so chunks index the shared negatives array.
    per_walk_pairs = np.add.reduceat(pair_counts, offsets[:-1])
    pair_starts = np.concatenate(([0], np.cumsum(per_walk_pairs)))

    def run(chunk: int):
        w_lo, w_hi = int(bounds[chunk]), int(bounds[chunk + 1])
        if w_lo == w_hi:
            return 0, 0.0
        return _sgns_kernel(
            vin, vout, tokens, offsets, eff_window, negs,
            w_lo, w_hi, cfg.negatives,
            cfg.learning_rate, cfg.final_learning_rate,
            token_base + int(offsets[w_lo]), total_tokens,
            int(pair_starts[w_lo]),
        )

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = list(pool.map(run, range(cfg.threads)))
    return sum(r[0] for r in results), sum(r[1] for r in results)


def serialize_embeddings(vectors: np.ndarray) -> str:
    d = vectors.shape[1] if vectors.ndim == 2 else 0
    lines = ["dealer_id," + ",".join(f"dim_{j}" for j in range(d))]
    for i, row in enumerate(vectors):
        lines.append(str(i) + "," + ",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def write_embeddings(path: str | Path, vectors: np.ndarray) -> None:
    Path(path).write_text(serialize_embeddings(vectors), encoding="utf-8")


def read_embeddings(path: str | Path) -> np.ndarray:
    """Load an embeddings CSV written by :func:`write_embeddings`."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "dealer_id":
            raise ValueError("embeddings CSV must start with a dealer_id header")
        rows = []
        for row in reader:
            if not row:
                continue
            if int(row[0]) != len(rows):
                raise ValueError("dealer ids must be dense and in order")
            rows.append([float(x) for x in row[1:]])
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
