"""Logistic ensemble over MT system occurrence features."""

import math

import numpy as np
import pytest

from clirset.corpus import Bitext, bitext_doc_id
from clirset.errors import DataError
from clirset.evidence import (
    MtEnsembleModel,
    MtHypothesisSet,
    Vocabulary,
    ensemble_objective,
    fit_mt_ensemble,
    load_mt_ensemble,
    load_mt_hypotheses,
    mt_evidence,
    save_mt_ensemble,
    save_mt_hypotheses,
)

VOCAB = Vocabulary(("e0", "e1", "e2", "e3"))


def toy_bitext(n_pairs=20):
    pairs = []
    for i in range(n_pairs):
        word = VOCAB.tokens[i % 4]
        pairs.append(((f"f{i}",), (word, "pad")))
    return Bitext(tuple(pairs))


def hyp_set(per_pair):
    """Build a hypothesis set from {system: fn(pair_index) -> sentence}."""
    hypotheses = {
        system: {
            (bitext_doc_id(i), 0): tuple(fn(i))
            for i in range(len(toy_bitext().pairs))
        }
        for system, fn in per_pair.items()
    }
    return MtHypothesisSet(tuple(sorted(per_pair)), hypotheses)


class TestFit:
    def test_reliable_system_outweighs_uninformative_one(self):
        bitext = toy_bitext()
        hyps = hyp_set({
            # echoes exactly the reference word: feature == label
            "good": lambda i: (VOCAB.tokens[i % 4],),
            # emits every vocab word every time: feature is always 1
            "bad": lambda i: VOCAB.tokens,
        })
        model, loss = fit_mt_ensemble(hyps, bitext, VOCAB, m_neg=3, seed=0)
        w = dict(zip(model.systems, model.weights))
        assert w["good"] > 1.0
        assert w["good"] > w["bad"] + 1.0
        assert loss < 0.3

    def test_zero_features_recover_base_rate(self):
        # hypotheses never mention a vocab word, so only the bias can move;
        # it is unregularized and lands on the positive rate 1/(1+m_neg)
        bitext = toy_bitext()
        hyps = hyp_set({"s1": lambda i: ("zzz",), "s2": lambda i: ("yyy",)})
        model, _ = fit_mt_ensemble(hyps, bitext, VOCAB, m_neg=3, seed=0)
        assert model.weights == (0.0, 0.0)
        rate = 1.0 / (1.0 + 3.0)
        assert 1.0 / (1.0 + math.exp(-model.bias)) == pytest.approx(rate, abs=1e-4)

    def test_two_inits_reach_the_same_loss(self):
        bitext = toy_bitext()
        hyps = hyp_set({
            "good": lambda i: (VOCAB.tokens[i % 4],),
            "meh": lambda i: (VOCAB.tokens[(i + 1) % 4],),
        })
        _, loss_a = fit_mt_ensemble(hyps, bitext, VOCAB, m_neg=3, seed=0)
        _, loss_b = fit_mt_ensemble(
            hyps, bitext, VOCAB, m_neg=3, seed=0, init=([0.5, -0.5], 0.3)
        )
        assert loss_a == pytest.approx(loss_b, abs=1e-5)

    def test_bad_init_shape_rejected(self):
        bitext = toy_bitext()
        hyps = hyp_set({"s1": lambda i: ("zzz",)})
        with pytest.raises(DataError, match="init"):
            fit_mt_ensemble(hyps, bitext, VOCAB, init=([0.1, 0.2], 0.0))


class TestObjective:
    def test_gradients_match_central_differences(self):
        rng = np.random.default_rng(3)
        features = (rng.random((40, 3)) < 0.4).astype(float)
        labels = (rng.random(40) < 0.3).astype(float)
        for _ in range(20):
            w = rng.normal(size=3)
            b = float(rng.normal())
            _, grad_w, grad_b = ensemble_objective(w, b, features, labels, 1e-3)
            h = 1e-6
            for j in range(3):
                bump = np.zeros(3)
                bump[j] = h
                hi, _, _ = ensemble_objective(w + bump, b, features, labels, 1e-3)
                lo, _, _ = ensemble_objective(w - bump, b, features, labels, 1e-3)
                num = (hi - lo) / (2 * h)
                assert grad_w[j] == pytest.approx(num, rel=1e-4, abs=1e-8)
            hi, _, _ = ensemble_objective(w, b + h, features, labels, 1e-3)
            lo, _, _ = ensemble_objective(w, b - h, features, labels, 1e-3)
            assert grad_b == pytest.approx((hi - lo) / (2 * h), rel=1e-4, abs=1e-8)

    def test_penalty_excludes_bias(self):
        features = np.zeros((4, 2))
        labels = np.array([1.0, 0.0, 0.0, 0.0])
        loss_zero, _, _ = ensemble_objective(
            np.zeros(2), 5.0, features, labels, 1e-3
        )
        # same point with weights moved off zero picks up the penalty
        loss_w, _, _ = ensemble_objective(
            np.array([2.0, 0.0]), 5.0, features, labels, 1e-3
        )
        assert loss_w == pytest.approx(loss_zero + 0.5 * 1e-3 * 4.0, abs=1e-12)


class TestEvidence:
    MODEL = MtEnsembleModel(("s1", "s2"), (1.0, -5.0), 0.0)

    def hyps(self):
        return MtHypothesisSet(
            ("s1", "s2"),
            {
                "s1": {("d1", 0): ("virus", "spread")},
                "s2": {("d1", 0): ("spread", "fast")},
            },
        )

    def test_hand_values(self):
        hyps = self.hyps()
        # virus: only s1 -> sigmoid(1)
        assert mt_evidence(self.MODEL, hyps, "d1", 0, "virus") == pytest.approx(
            1 / (1 + math.exp(-1.0)), abs=1e-12
        )
        # spread: both -> sigmoid(1 - 5)
        assert mt_evidence(self.MODEL, hyps, "d1", 0, "spread") == pytest.approx(
            1 / (1 + math.exp(4.0)), abs=1e-12
        )
        # absent word -> sigmoid(0)
        assert mt_evidence(self.MODEL, hyps, "d1", 0, "nowhere") == 0.5

    def test_missing_hypothesis_is_an_error(self):
        with pytest.raises(DataError, match="s1.*d9"):
            mt_evidence(self.MODEL, self.hyps(), "d9", 0, "virus")


class TestIO:
    def test_model_round_trip(self, tmp_path):
        model = MtEnsembleModel(("a", "b"), (0.123456789012345, -2.5), 0.75)
        path = tmp_path / "model.json"
        save_mt_ensemble(model, path)
        assert load_mt_ensemble(path) == model

    def test_malformed_model_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"systems": ["a"]}')
        with pytest.raises(DataError, match="malformed"):
            load_mt_ensemble(path)

    def test_hypotheses_round_trip(self, tmp_path):
        hyps = MtHypothesisSet(
            ("s1", "s2"),
            {
                "s1": {("d1", 0): ("a", "b"), ("d1", 1): ("c",)},
                "s2": {("d1", 0): ("x",), ("d1", 1): ("y",)},
            },
        )
        path = tmp_path / "hyps.tsv"
        save_mt_hypotheses(hyps, path)
        assert load_mt_hypotheses(path) == hyps

    def test_duplicate_hypothesis_rejected(self, tmp_path):
        path = tmp_path / "hyps.tsv"
        path.write_text("s1\td1\t0\ta b\ns1\td1\t0\tc\n")
        with pytest.raises(DataError, match="duplicate"):
            load_mt_hypotheses(path)

    def test_mismatched_systems_validated(self):
        with pytest.raises(DataError, match="no hypotheses"):
            MtHypothesisSet(("s1",), {})
