"""MT-ensemble evidence: logistic regression over per-system occurrence bits.

Each MT system contributes one binary feature per (sentence, English word)
instance: did the word occur in that system's translation of the sentence?
A logistic regression with one weight per system plus a bias turns the
feature vector into p(rel | sentence, word). The fit maximizes the
L2-regularized log-likelihood on held-out bitext by full-batch gradient
descent with backtracking line search; the bias is not regularized, so
with all-zero features the fitted sigmoid(bias) matches the positive rate.

Hypotheses file format is TSV:
    system-id <TAB> doc-id <TAB> sentence-index <TAB> english translation
The model file is JSON: {"systems": [...], "weights": [...], "bias": ...}.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..corpus import (
    Bitext,
    Document,
    Sentence,
    Token,
    bitext_doc_id,
    normalize_sentence,
)
from ..errors import DataError
from ..numerics import sigmoid, softplus
from .instances import DEFAULT_NEGATIVES_PER_POSITIVE, labeled_instances
from .matrix import Vocabulary

log = logging.getLogger(__name__)

DEFAULT_L2 = 1e-3
DEFAULT_LEARNING_RATE = 0.1
DEFAULT_TOLERANCE = 1e-7
DEFAULT_MAX_ITERATIONS = 10_000

MT_GENERATOR_TAG = "mt"


@dataclass(frozen=True)
class MtHypothesisSet:
    """Per-system English translations keyed by (doc id, sentence index)."""

    systems: tuple[str, ...]
    hypotheses: dict[str, dict[tuple[str, int], Sentence]]

    def __post_init__(self) -> None:
        if not self.systems:
            raise DataError("hypothesis set with no systems")
        if len(set(self.systems)) != len(self.systems):
            raise DataError("duplicate system ids in hypothesis set")
        for system in self.systems:
            if system not in self.hypotheses:
                raise DataError(f"system {system!r} has no hypotheses")

    def translation(self, system: str, doc_id: str, index: int) -> Sentence:
        try:
            return self.hypotheses[system][(doc_id, index)]
        except KeyError:
            raise DataError(
                f"system {system!r} has no hypothesis for sentence"
                f" {doc_id!r}:{index}"
            ) from None


def load_mt_hypotheses(path) -> MtHypothesisSet:
    hypotheses: dict[str, dict[tuple[str, int], Sentence]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise DataError(
                    f"{path}:{lineno}: expected 4 tab-separated fields,"
                    f" got {len(fields)}"
                )
            system, doc_id, index_raw, text = fields
            try:
                index = int(index_raw)
            except ValueError as exc:
                raise DataError(
                    f"{path}:{lineno}: bad sentence index {index_raw!r}"
                ) from exc
            sentence = normalize_sentence(text)
            if not sentence:
                raise DataError(
                    f"{path}:{lineno}: hypothesis normalizes to no tokens"
                )
            key = (doc_id, index)
            per_system = hypotheses.setdefault(system, {})
            if key in per_system:
                raise DataError(
                    f"{path}:{lineno}: duplicate hypothesis for system"
                    f" {system!r} sentence {doc_id!r}:{index}"
                )
            per_system[key] = sentence
    if not hypotheses:
        raise DataError(f"{path}: empty hypothesis file")
    return MtHypothesisSet(tuple(sorted(hypotheses)), hypotheses)


def save_mt_hypotheses(hyps: MtHypothesisSet, path) -> None:
    with open(path, "w", encoding="utf-8") as out:
        for system in hyps.systems:
            for doc_id, index in sorted(hyps.hypotheses[system]):
                text = " ".join(hyps.hypotheses[system][(doc_id, index)])
                out.write(f"{system}\t{doc_id}\t{index}\t{text}\n")


@dataclass(frozen=True)
class MtEnsembleModel:
    systems: tuple[str, ...]
    weights: tuple[float, ...]
    bias: float

    def __post_init__(self) -> None:
        if len(self.systems) != len(self.weights):
            raise DataError("ensemble weights do not match systems")
        if not self.systems:
            raise DataError("ensemble model with no systems")


def ensemble_objective(
    weights: np.ndarray, bias: float, features: np.ndarray, labels: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """Mean negative log-likelihood plus L2 on weights, with gradients.

    Returns (loss, d loss / d weights, d loss / d bias). The bias is left
    out of the penalty so an all-zero-feature fit recovers the base rate
    exactly.
    """
    z = features @ weights + bias
    n = len(labels)
    loss = float(np.sum(softplus(z) - labels * z)) / n
    loss += 0.5 * l2 * float(weights @ weights)
    dz = sigmoid(z) - labels
    grad_w = features.T @ dz / n + l2 * weights
    grad_b = float(np.sum(dz)) / n
    return loss, grad_w, grad_b


def _minimize(objective, weights: np.ndarray, bias: float, lr: float,
              tol: float, max_iter: int) -> tuple[np.ndarray, float, float]:
    """Gradient descent with backtracking halving and modest step regrowth."""
    loss, grad_w, grad_b = objective(weights, bias)
    step = lr
    for _ in range(max_iter):
        while True:
            cand_w = weights - step * grad_w
            cand_b = bias - step * grad_b
            cand_loss, cand_gw, cand_gb = objective(cand_w, cand_b)
            if cand_loss <= loss or step < 1e-12:
                break
            step *= 0.5
        improvement = loss - cand_loss
        weights, bias = cand_w, cand_b
        loss, grad_w, grad_b = cand_loss, cand_gw, cand_gb
        if improvement <= tol * max(abs(loss), 1.0):
            break
        step = min(step * 2.0, 1e3)
    return weights, bias, loss


def fit_mt_ensemble(
    hyps: MtHypothesisSet,
    bitext: Bitext,
    vocab: Vocabulary,
    m_neg: int = DEFAULT_NEGATIVES_PER_POSITIVE,
    l2: float = DEFAULT_L2,
    lr: float = DEFAULT_LEARNING_RATE,
    tol: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITERATIONS,
    seed: int = 0,
    init: tuple[Iterable[float], float] | None = None,
) -> tuple[MtEnsembleModel, float]:
    """Fit per-system weights on held-out bitext; returns (model, final loss).

    Requires a hypothesis for every bitext sentence (addressed via the
    bitext pseudo-document ids) from every system.
    """
    instances = labeled_instances(bitext, vocab, m_neg, random.Random(seed))
    reference_sets: dict[tuple[str, int], set[Token]] = {}
    features = np.zeros((len(instances), len(hyps.systems)))
    labels = np.zeros(len(instances))
    for row, inst in enumerate(instances):
        labels[row] = inst.label
        for col, system in enumerate(hyps.systems):
            key = (system, inst.pair_index)
            if key not in reference_sets:
                reference_sets[key] = set(
                    hyps.translation(system, bitext_doc_id(inst.pair_index), 0)
                )
            if inst.word in reference_sets[key]:
                features[row, col] = 1.0

    if init is None:
        weights = np.zeros(len(hyps.systems))
        bias = 0.0
    else:
        weights = np.asarray(list(init[0]), dtype=float)
        bias = float(init[1])
        if weights.shape != (len(hyps.systems),):
            raise DataError("ensemble init has the wrong number of weights")

    def objective(w, b):
        return ensemble_objective(w, b, features, labels, l2)

    weights, bias, loss = _minimize(objective, weights, bias, lr, tol, max_iter)
    log.info(
        "fit mt ensemble on %d instances, final loss %.6f", len(instances), loss
    )
    model = MtEnsembleModel(hyps.systems, tuple(float(w) for w in weights), bias)
    return model, loss


def mt_evidence(
    model: MtEnsembleModel, hyps: MtHypothesisSet, doc_id: str, index: int,
    word: Token,
) -> float:
    """p(rel | sentence, word) from the fitted per-system occurrence bits."""
    z = model.bias
    for system, weight in zip(model.systems, model.weights):
        if word in hyps.translation(system, doc_id, index):
            z += weight
    return float(sigmoid(z))


class MtEnsembleGenerator:
    """Evidence generator wrapping a fitted ensemble plus its hypotheses."""

    tag = MT_GENERATOR_TAG

    def __init__(self, model: MtEnsembleModel, hyps: MtHypothesisSet):
        if set(model.systems) != set(hyps.systems):
            raise DataError(
                "ensemble model systems do not match the hypothesis set"
            )
        self.model = model
        self.hyps = hyps

    def segment_scores(
        self, doc: Document, index: int, segment, words: Iterable[Token]
    ) -> Mapping[Token, float]:
        translations = [
            set(self.hyps.translation(system, doc.id, index))
            for system in self.model.systems
        ]
        scores = {}
        for word in words:
            z = self.model.bias
            for weight, translation in zip(self.model.weights, translations):
                if word in translation:
                    z += weight
            scores[word] = float(sigmoid(z))
        return scores


def save_mt_ensemble(model: MtEnsembleModel, path) -> None:
    payload = {
        "systems": list(model.systems),
        "weights": list(model.weights),
        "bias": model.bias,
    }
    with open(path, "w", encoding="utf-8") as out:
        json.dump(payload, out, indent=2, sort_keys=True)
        out.write("\n")


def load_mt_ensemble(path) -> MtEnsembleModel:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read ensemble model {path}: {exc}") from exc
    try:
        return MtEnsembleModel(
            tuple(payload["systems"]),
            tuple(float(w) for w in payload["weights"]),
            float(payload["bias"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed ensemble model: {exc}") from exc
