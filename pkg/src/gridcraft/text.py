"""Closed-vocabulary caption handling.

Captions are whitespace-tokenized phrases drawn from the task suite's
template paraphrases; id 0 is reserved for padding.
"""

import numpy as np

MAX_CAPTION_LEN = 77
PAD_ID = 0


class Vocabulary:
    def __init__(self, words):
        self.words = ["<pad>"] + sorted(set(words))
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_phrases(cls, phrases) -> "Vocabulary":
        words = [w for p in phrases for w in p.lower().split()]
        return cls(words)

    def encode(self, text: str) -> list:
        """Token ids for a caption; errors on empty or out-of-vocabulary text."""
        tokens = text.lower().split()
        if not tokens:
            raise ValueError("empty caption")
        if len(tokens) > MAX_CAPTION_LEN:
            raise ValueError(f"caption longer than {MAX_CAPTION_LEN} tokens")
        try:
            return [self.index[t] for t in tokens]
        except KeyError as e:
            raise ValueError(f"word {e.args[0]!r} not in vocabulary") from None

    def decode(self, ids) -> str:
        return " ".join(self.words[i] for i in ids if i != PAD_ID)


def pad_batch(id_lists) -> tuple:
    """(ids, mask) int64/bool arrays padded to the longest caption."""
    n = len(id_lists)
    t = max(len(ids) for ids in id_lists)
    out = np.zeros((n, t), dtype=np.int64)
    mask = np.zeros((n, t), dtype=bool)
    for i, ids in enumerate(id_lists):
        out[i, :len(ids)] = ids
        mask[i, :len(ids)] = True
    return out, mask


def vocabulary_for_tasks(tasks) -> Vocabulary:
    return Vocabulary.from_phrases([p for t in tasks for p in t.phrases])
