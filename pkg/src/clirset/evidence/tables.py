"""Translation-table evidence over text sentences and confusion networks.

For a text sentence, the evidence that English word w is relevant is the
best lexical translation probability reachable from any token in the
sentence: max over foreign tokens f of p(w|f). For a speech utterance the
max additionally weighs each arc by its acoustic posterior: max over arcs
(f, p_f) of p(w|f) * p_f. A depth-1 network whose arcs carry probability
1 therefore reproduces the text case bit for bit.
"""

from __future__ import annotations

from typing import Iterable, Mapping

from ..corpus import ConfusionNetwork, Document, Sentence, Token, TranslationTable


def tt_evidence(table: TranslationTable, sentence: Sentence) -> dict[Token, float]:
    """Best translation probability per English word reachable from `sentence`."""
    best: dict[Token, float] = {}
    for foreign in sentence:
        for english, prob in table.entries.get(foreign, {}).items():
            if prob > best.get(english, 0.0):
                best[english] = prob
    return best


def cn_evidence(table: TranslationTable, network: ConfusionNetwork) -> dict[Token, float]:
    """Like tt_evidence but weighing each arc by its posterior probability."""
    best: dict[Token, float] = {}
    for slot in network.slots:
        for foreign, arc_prob in slot:
            for english, prob in table.entries.get(foreign, {}).items():
                score = prob * arc_prob
                if score > best.get(english, 0.0):
                    best[english] = score
    return best


class TranslationTableGenerator:
    """Evidence generator backed by one translation table.

    Handles both document kinds: sentences route through tt_evidence,
    confusion networks through cn_evidence. The generator tag is the
    table's source tag, so multiple aligners coexist as separate matrices.
    """

    def __init__(self, table: TranslationTable):
        self.table = table
        self.tag = table.source_tag

    def segment_scores(
        self, doc: Document, index: int, segment, words: Iterable[Token]
    ) -> Mapping[Token, float]:
        if isinstance(segment, ConfusionNetwork):
            scores = cn_evidence(self.table, segment)
        else:
            scores = tt_evidence(self.table, segment)
        wanted = set(words)
        return {word: prob for word, prob in scores.items() if word in wanted}
