"""Convex combination of evidence matrices with EM-fitted weights.

Each generator k supplies q_k = p_k for a positive instance and 1 - p_k
for a negative one; the mixture likelihood of an instance is sum_k
lambda_k * q_k. EM alternates responsibilities r_k proportional to
lambda_k * q_k with the weight update lambda_k = mean responsibility,
which drives the log-likelihood monotonically upward from uniform init.

Weights persist as TSV `generator-tag <TAB> weight` rows with a
`#loglik=<value>` trailer line.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Bitext, bitext_doc_id
from .errors import DataError
from .evidence.instances import DEFAULT_NEGATIVES_PER_POSITIVE, labeled_instances
from .evidence.matrix import EvidenceMatrix, Vocabulary

log = logging.getLogger(__name__)

DEFAULT_EM_TOLERANCE = 1e-8
DEFAULT_EM_MAX_ITERATIONS = 500

COMBINED_TAG = "combined"

LOGLIK_PREFIX = "#loglik="


@dataclass(frozen=True)
class MixtureWeights:
    """Convex weights over generator tags, plus fit diagnostics."""

    weights: dict[str, float]
    loglik: float | None = None
    loglik_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not self.weights:
            raise DataError("mixture with no weights")
        total = 0.0
        for tag, weight in self.weights.items():
            if weight < 0.0:
                raise DataError(f"mixture weight for {tag!r} is negative")
            total += weight
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"mixture weights sum to {total!r}, not 1")

    @classmethod
    def uniform(cls, tags: Sequence[str]) -> "MixtureWeights":
        if not tags:
            raise DataError("cannot build uniform weights over no generators")
        if len(set(tags)) != len(tags):
            raise DataError("duplicate generator tags")
        return cls({tag: 1.0 / len(tags) for tag in tags})


def combine(
    matrices: Sequence[EvidenceMatrix], mixture: MixtureWeights
) -> EvidenceMatrix:
    """Weighted sum of matrices over the union of their cells.

    Absent cells contribute the floor, so a generator with no opinion
    drags the mixture toward epsilon rather than being skipped. The sum
    runs in sorted tag order, which makes the result invariant to the
    order the matrices are passed in.
    """
    tags = [m.generator for m in matrices]
    if len(set(tags)) != len(tags):
        raise DataError("duplicate generator tags among matrices")
    if set(tags) != set(mixture.weights):
        raise DataError(
            f"mixture weights {sorted(mixture.weights)} do not match"
            f" matrix tags {sorted(tags)}"
        )
    epsilons = {m.epsilon for m in matrices}
    if len(epsilons) != 1:
        raise DataError("matrices disagree on the evidence floor")
    by_tag = {m.generator: m for m in matrices}
    ordered = [(tag, by_tag[tag], mixture.weights[tag]) for tag in sorted(by_tag)]

    out = EvidenceMatrix(COMBINED_TAG, epsilons.pop())
    doc_ids = sorted({doc for m in matrices for doc in m.cells})
    for doc_id in doc_ids:
        indices = sorted(
            {idx for m in matrices for idx in m.cells.get(doc_id, {})}
        )
        for index in indices:
            words = sorted(
                {
                    word
                    for m in matrices
                    for word in m.cells.get(doc_id, {}).get(index, {})
                }
            )
            for word in words:
                value = sum(
                    weight * matrix.get(doc_id, index, word)
                    for _, matrix, weight in ordered
                )
                out.put(doc_id, index, word, value)
    return out


def em_fit(
    q: np.ndarray,
    tol: float = DEFAULT_EM_TOLERANCE,
    max_iter: int = DEFAULT_EM_MAX_ITERATIONS,
) -> tuple[np.ndarray, list[float]]:
    """EM for mixture weights on an (instances x generators) matrix of q_k.

    Starts uniform; stops when the log-likelihood improves by less than
    `tol` or after `max_iter` iterations. Returns the weights and the
    per-iteration log-likelihood trace (evaluated after each update).
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] < 1 or q.shape[1] < 1:
        raise DataError("EM needs a non-empty 2-d instance matrix")
    if np.any(q <= 0.0):
        raise DataError("EM instance likelihoods must be positive")
    n, k = q.shape
    lam = np.full(k, 1.0 / k)
    history: list[float] = []
    prev = float(np.sum(np.log(q @ lam)))
    for _ in range(max_iter):
        resp = q * lam  # (n, k)
        resp /= resp.sum(axis=1, keepdims=True)
        lam = resp.mean(axis=0)
        loglik = float(np.sum(np.log(q @ lam)))
        history.append(loglik)
        if loglik - prev < tol:
            break
        prev = loglik
    return lam, history


def fit_mixture(
    matrices: Sequence[EvidenceMatrix],
    bitext: Bitext,
    vocab: Vocabulary,
    m_neg: int = DEFAULT_NEGATIVES_PER_POSITIVE,
    seed: int = 0,
    tol: float = DEFAULT_EM_TOLERANCE,
    max_iter: int = DEFAULT_EM_MAX_ITERATIONS,
) -> MixtureWeights:
    """Fit weights on held-out bitext instances read out of the matrices.

    The matrices must be built over the bitext pseudo-corpus (see
    corpus.bitext_corpus); entries the generators never stored read as the
    floor, i.e. a near-certain vote for "not relevant".
    """
    tags = [m.generator for m in matrices]
    if len(set(tags)) != len(tags):
        raise DataError("duplicate generator tags among matrices")
    if not matrices:
        raise DataError("cannot fit a mixture over no matrices")
    instances = labeled_instances(bitext, vocab, m_neg, random.Random(seed))
    q = np.empty((len(instances), len(matrices)))
    for row, inst in enumerate(instances):
        doc_id = bitext_doc_id(inst.pair_index)
        for col, matrix in enumerate(matrices):
            p = matrix.get(doc_id, 0, inst.word)
            q[row, col] = p if inst.label == 1 else 1.0 - p
    lam, history = em_fit(q, tol, max_iter)
    log.info(
        "fit mixture over %d instances, %d iterations, loglik %.6f",
        len(instances),
        len(history),
        history[-1] if history else float("nan"),
    )
    return MixtureWeights(
        {tag: float(w) for tag, w in zip(tags, lam)},
        loglik=history[-1] if history else None,
        loglik_history=tuple(history),
    )


def save_weights(mixture: MixtureWeights, path) -> None:
    with open(path, "w", encoding="utf-8") as out:
        for tag in sorted(mixture.weights):
            out.write(f"{tag}\t{mixture.weights[tag]!r}\n")
        if mixture.loglik is not None:
            out.write(f"{LOGLIK_PREFIX}{mixture.loglik!r}\n")


def load_weights(path) -> MixtureWeights:
    weights: dict[str, float] = {}
    loglik: float | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith(LOGLIK_PREFIX):
                try:
                    loglik = float(line[len(LOGLIK_PREFIX) :])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: bad loglik value") from exc
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise DataError(
                    f"{path}:{lineno}: expected `tag<TAB>weight`, got {line!r}"
                )
            tag, weight_raw = fields
            if tag in weights:
                raise DataError(f"{path}:{lineno}: duplicate tag {tag!r}")
            try:
                weights[tag] = float(weight_raw)
            except ValueError as exc:
                raise DataError(
                    f"{path}:{lineno}: bad weight {weight_raw!r}"
                ) from exc
    if not weights:
        raise DataError(f"{path}: empty mixture weight file")
    return MixtureWeights(weights, loglik=loglik)
