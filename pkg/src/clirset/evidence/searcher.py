"""Shared-embedding relevance scorer over foreign sentences.

Foreign tokens and English words live in one d-dimensional space. A
sentence is embedded token by token, optionally passed through a single
scaled-dot-product self-attention layer, and the evidence for English
word w is sigmoid(max_j <e(w), h_j> + bias_w): the best match between the
word embedding and any contextualized token vector, squashed through a
per-word bias.

Training minimizes the summed cross-entropy over bitext-derived labels:
for each sentence pair, -log p for every vocabulary word in the reference
translation and -log(1 - p) for the rest of the vocabulary (the full
complement when the vocabulary is small, otherwise a sampled subset).
Gradients are computed in closed form; `searcher_objective` exposes the
loss/gradient pair so finite-difference checks can run against it.

Persisted form is a .npz archive holding the parameter arrays, both token
lists, and a JSON manifest recording the dimension, the attention depth,
and sha256 hashes of both vocabularies.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..corpus import Bitext, ConfusionNetwork, Document, Sentence, Token
from ..errors import DataError
from ..numerics import sigmoid
from .instances import DEFAULT_NEGATIVES_PER_POSITIVE
from .matrix import Vocabulary

log = logging.getLogger(__name__)

SEARCHER_GENERATOR_TAG = "searcher"

# Below this vocabulary size the trainer scores every non-reference word
# instead of sampling negatives.
FULL_VOCAB_MAX = 2000

_ATTENTION_KEYS = ("wq", "wk", "wv")


@dataclass(frozen=True)
class SearcherConfig:
    dim: int = 16
    depth: int = 0  # number of self-attention layers, 0 or 1
    epochs: int = 20
    lr: float = 0.5
    m_neg: int = DEFAULT_NEGATIVES_PER_POSITIVE
    full_vocab_max: int = FULL_VOCAB_MAX
    foreign_vocab_size: int | None = None
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DataError(f"embedding dim {self.dim} must be positive")
        if self.depth not in (0, 1):
            raise DataError(f"attention depth {self.depth} must be 0 or 1")
        if self.epochs < 1:
            raise DataError(f"epoch count {self.epochs} must be positive")
        if self.lr <= 0:
            raise DataError(f"learning rate {self.lr!r} must be positive")


@dataclass
class SearcherModel:
    """Trained embeddings. The last foreign row is the unknown-token vector."""

    english_vocab: Vocabulary
    foreign_tokens: tuple[Token, ...]
    params: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        femb = self.params.get("foreign_emb")
        eemb = self.params.get("english_emb")
        bias = self.params.get("bias")
        if femb is None or eemb is None or bias is None:
            raise DataError("searcher model missing parameter arrays")
        if femb.shape[0] != len(self.foreign_tokens) + 1:
            raise DataError("foreign embedding rows do not match token list")
        if eemb.shape != (len(self.english_vocab), femb.shape[1]):
            raise DataError("english embedding shape mismatch")
        if bias.shape != (len(self.english_vocab),):
            raise DataError("bias shape mismatch")
        present = [key for key in _ATTENTION_KEYS if key in self.params]
        if present and len(present) != len(_ATTENTION_KEYS):
            raise DataError("attention parameters must appear all together")
        self._foreign_index = {tok: i for i, tok in enumerate(self.foreign_tokens)}

    @property
    def dim(self) -> int:
        return self.params["foreign_emb"].shape[1]

    @property
    def depth(self) -> int:
        return 1 if "wq" in self.params else 0

    def foreign_ids(self, sentence: Sentence) -> np.ndarray:
        unk = len(self.foreign_tokens)
        return np.array(
            [self._foreign_index.get(tok, unk) for tok in sentence], dtype=int
        )


def _contextualize(params: Mapping[str, np.ndarray], x: np.ndarray):
    """Apply the optional self-attention layer; returns (h, cache)."""
    if "wq" not in params:
        return x, None
    wq, wk, wv = params["wq"], params["wk"], params["wv"]
    scale = 1.0 / math.sqrt(x.shape[1])
    q, k, v = x @ wq, x @ wk, x @ wv
    scores = (q @ k.T) * scale
    scores -= scores.max(axis=1, keepdims=True)
    attn = np.exp(scores)
    attn /= attn.sum(axis=1, keepdims=True)
    h = attn @ v
    return h, (x, q, k, v, attn, scale)


def _backprop_context(params, cache, grad_h, grads, foreign_ids) -> None:
    if cache is None:
        np.add.at(grads["foreign_emb"], foreign_ids, grad_h)
        return
    x, q, k, v, attn, scale = cache
    grad_v = attn.T @ grad_h
    grad_attn = grad_h @ v.T
    # softmax backward, rowwise
    grad_scores = attn * (grad_attn - (grad_attn * attn).sum(axis=1, keepdims=True))
    grad_q = (grad_scores @ k) * scale
    grad_k = (grad_scores.T @ q) * scale
    grads["wq"] += x.T @ grad_q
    grads["wk"] += x.T @ grad_k
    grads["wv"] += x.T @ grad_v
    grad_x = grad_q @ params["wq"].T + grad_k @ params["wk"].T + grad_v @ params["wv"].T
    np.add.at(grads["foreign_emb"], foreign_ids, grad_x)


def _pair_loss_and_grads(
    params: Mapping[str, np.ndarray],
    foreign_ids: np.ndarray,
    word_ids: np.ndarray,
    labels: np.ndarray,
    grads: Mapping[str, np.ndarray],
) -> float:
    """Summed cross-entropy for one sentence's words; grads accumulate."""
    x = params["foreign_emb"][foreign_ids]
    h, cache = _contextualize(params, x)
    word_emb = params["english_emb"][word_ids]
    scores = h @ word_emb.T  # (tokens, words)
    best = scores.argmax(axis=0)
    z = scores[best, np.arange(len(word_ids))] + params["bias"][word_ids]
    loss = float(np.sum(np.logaddexp(0.0, z) - labels * z))
    dz = sigmoid(z) - labels
    np.add.at(grads["bias"], word_ids, dz)
    np.add.at(grads["english_emb"], word_ids, dz[:, None] * h[best])
    grad_h = np.zeros_like(h)
    np.add.at(grad_h, best, dz[:, None] * word_emb)
    _backprop_context(params, cache, grad_h, grads, foreign_ids)
    return loss


def searcher_objective(
    params: Mapping[str, np.ndarray],
    examples: Sequence[tuple[np.ndarray, np.ndarray, np.ndarray]],
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over (foreign_ids, word_ids, labels) examples.

    Returns the loss and matching analytic gradients; the contract checked
    by the finite-difference tests.
    """
    grads = {key: np.zeros_like(value) for key, value in params.items()}
    total = 0.0
    count = 0
    for foreign_ids, word_ids, labels in examples:
        total += _pair_loss_and_grads(params, foreign_ids, word_ids, labels, grads)
        count += len(word_ids)
    if count == 0:
        raise DataError("no scoring instances in objective")
    for key in grads:
        grads[key] /= count
    return total / count, grads


def searcher_score(model: SearcherModel, sentence: Sentence, word: Token) -> float:
    """p(rel | sentence, word); the word must be in the English vocabulary."""
    if word not in model.english_vocab:
        raise DataError(f"word {word!r} not in searcher vocabulary")
    if not sentence:
        raise DataError("cannot score an empty sentence")
    x = model.params["foreign_emb"][model.foreign_ids(sentence)]
    h, _ = _contextualize(model.params, x)
    widx = model.english_vocab.index_of(word)
    # best match over token positions, then the per-word bias
    z = float((h @ model.params["english_emb"][widx]).max())
    z += float(model.params["bias"][widx])
    return float(sigmoid(z))


def _foreign_vocabulary(bitext: Bitext, size: int | None) -> tuple[Token, ...]:
    counts: Counter[Token] = Counter()
    for src, _ in bitext:
        counts.update(src)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    if size is not None:
        ranked = ranked[:size]
    return tuple(token for token, _ in ranked)


def train_searcher(
    bitext: Bitext, vocab: Vocabulary, config: SearcherConfig = SearcherConfig()
) -> tuple[SearcherModel, list[float]]:
    """SGD over bitext pairs; returns the model and per-epoch mean losses.

    Single-threaded and fully determined by config.seed.
    """
    rng = np.random.default_rng(config.seed)
    foreign_tokens = _foreign_vocabulary(bitext, config.foreign_vocab_size)
    if not foreign_tokens:
        raise DataError("bitext yields an empty foreign vocabulary")

    k = len(vocab)
    params: dict[str, np.ndarray] = {
        "foreign_emb": rng.normal(
            0.0, config.init_scale, (len(foreign_tokens) + 1, config.dim)
        ),
        "english_emb": rng.normal(0.0, config.init_scale, (k, config.dim)),
        "bias": np.zeros(k),
    }
    if config.depth == 1:
        for key in _ATTENTION_KEYS:
            params[key] = rng.normal(0.0, config.init_scale, (config.dim, config.dim))

    foreign_index = {tok: i for i, tok in enumerate(foreign_tokens)}
    unk = len(foreign_tokens)
    all_word_ids = np.arange(k)

    # Positive word ids per pair are fixed; negatives are re-drawn per epoch
    # unless the vocabulary is small enough to score in full.
    pair_foreign: list[np.ndarray] = []
    pair_positive: list[np.ndarray] = []
    for src, tgt in bitext:
        reference = {word for word in tgt if word in vocab}
        if not reference:
            pair_foreign.append(np.empty(0, dtype=int))
            pair_positive.append(np.empty(0, dtype=int))
            continue
        pair_foreign.append(
            np.array([foreign_index.get(tok, unk) for tok in src], dtype=int)
        )
        pair_positive.append(
            np.array(sorted(vocab.index_of(word) for word in reference), dtype=int)
        )
    usable = [i for i in range(len(bitext)) if len(pair_positive[i])]
    if not usable:
        raise DataError("no bitext pair shares a word with the vocabulary")

    full_vocab = k <= config.full_vocab_max
    losses: list[float] = []
    for epoch in range(config.epochs):
        order = np.array(usable)
        rng.shuffle(order)
        epoch_loss = 0.0
        epoch_count = 0
        for i in order:
            positives = pair_positive[i]
            if full_vocab:
                negatives = np.setdiff1d(all_word_ids, positives, assume_unique=True)
            else:
                negatives = rng.integers(0, k, size=config.m_neg * len(positives))
                negatives = negatives[~np.isin(negatives, positives)]
            word_ids = np.concatenate([positives, negatives])
            labels = np.zeros(len(word_ids))
            labels[: len(positives)] = 1.0
            grads = {key: np.zeros_like(value) for key, value in params.items()}
            loss = _pair_loss_and_grads(
                params, pair_foreign[i], word_ids, labels, grads
            )
            scale = config.lr / len(word_ids)
            for key in params:
                params[key] -= scale * grads[key]
            epoch_loss += loss
            epoch_count += len(word_ids)
        losses.append(epoch_loss / epoch_count)
        log.info("searcher epoch %d mean loss %.6f", epoch + 1, losses[-1])

    model = SearcherModel(vocab, foreign_tokens, params)
    return model, losses


class SearcherGenerator:
    """Evidence generator wrapping a trained embedding scorer.

    Speech segments are reduced to their one-best token sequence before
    scoring. Query words outside the model's English vocabulary are
    skipped, which reads back as the evidence floor.
    """

    tag = SEARCHER_GENERATOR_TAG

    def __init__(self, model: SearcherModel):
        self.model = model

    def segment_scores(
        self, doc: Document, index: int, segment, words: Iterable[Token]
    ) -> Mapping[Token, float]:
        sentence = (
            segment.one_best() if isinstance(segment, ConfusionNetwork) else segment
        )
        known = [w for w in words if w in self.model.english_vocab]
        if not known:
            return {}
        x = self.model.params["foreign_emb"][self.model.foreign_ids(sentence)]
        h, _ = _contextualize(self.model.params, x)
        ids = np.array([self.model.english_vocab.index_of(w) for w in known])
        z = (h @ self.model.params["english_emb"][ids].T).max(axis=0)
        z = z + self.model.params["bias"][ids]
        probs = sigmoid(z)
        return {word: float(p) for word, p in zip(known, probs)}


def save_searcher(model: SearcherModel, path) -> None:
    manifest = {
        "dim": model.dim,
        "depth": model.depth,
        "english_vocab_sha256": model.english_vocab.sha256(),
        "foreign_vocab_sha256": _sha256_tokens(model.foreign_tokens),
    }
    arrays = dict(model.params)
    arrays["english_tokens"] = np.array(model.english_vocab.tokens)
    arrays["foreign_tokens"] = np.array(model.foreign_tokens)
    arrays["manifest"] = np.array(json.dumps(manifest, sort_keys=True))
    np.savez(path, **arrays)


def load_searcher(path) -> SearcherModel:
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read searcher model {path}: {exc}") from exc
    with archive:
        try:
            manifest = json.loads(str(archive["manifest"]))
            english = tuple(str(t) for t in archive["english_tokens"])
            foreign = tuple(str(t) for t in archive["foreign_tokens"])
            params = {
                key: archive[key].astype(float)
                for key in ("foreign_emb", "english_emb", "bias")
            }
            if manifest["depth"] == 1:
                for key in _ATTENTION_KEYS:
                    params[key] = archive[key].astype(float)
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: malformed searcher model: {exc}") from exc
    vocab = Vocabulary(english)
    if manifest.get("english_vocab_sha256") != vocab.sha256():
        raise DataError(f"{path}: english vocabulary hash mismatch")
    if manifest.get("foreign_vocab_sha256") != _sha256_tokens(foreign):
        raise DataError(f"{path}: foreign vocabulary hash mismatch")
    model = SearcherModel(vocab, foreign, params)
    if manifest.get("dim") != model.dim:
        raise DataError(f"{path}: manifest dim does not match arrays")
    return model


def _sha256_tokens(tokens: Sequence[Token]) -> str:
    import hashlib

    return hashlib.sha256("\n".join(tokens).encode("utf-8")).hexdigest()
