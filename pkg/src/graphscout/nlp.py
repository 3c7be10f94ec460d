"""Multi-label indicator classification and rule-based entity extraction.

The classifier is deliberately small: lowercase/stop-word/suffix-stem
preprocessing, tf-idf bag-of-words features, and one logistic model per
taxonomy category trained one-vs-rest by full-batch gradient descent.
Evaluation uses iterative-stratified k-fold splits so rare labels stay
proportionally represented in every fold.

Entity extraction is pattern- and gazetteer-driven (dates, person names,
organization names) and feeds graph ingestion.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import math
import random
import re
from dataclasses import dataclass, field

import numpy as np

from .taxonomy import IndicatorTaxonomy

logger = logging.getLogger(__name__)

MAX_LABELS_PER_SNIPPET = 3
DECISION_THRESHOLD = 0.5


class NlpError(Exception):
    pass


class KTooLargeError(NlpError):
    pass


class EmptyVocabularyError(NlpError):
    pass


class CorpusError(NlpError):
    """A corpus record violates the labeling rules."""


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because
been before being below between both but by could did do does doing down
during each few for from further had has have having he her here hers
herself him himself his how i if in into is it its itself just me more
most my myself no nor not now of off on once only or other our ours
ourselves out over own same she should so some such than that the their
theirs them themselves then there these they this those through to too
under until up very was we were what when where which while who whom why
will with you your yours yourself yourselves
""".split())

# Suffix-stripping rules tried in order; first rule whose removal leaves a
# stem of at least _MIN_STEM letters wins. "ing"/"ed" also collapse a
# trailing doubled consonant (running -> run) except for l/s/z (fall, pass).
_STEM_RULES: tuple[tuple[str, str, bool], ...] = (
    ("sses", "ss", False),
    ("ness", "", False),
    ("ment", "", False),
    ("ies", "y", False),
    ("ing", "", True),
    ("ed", "", True),
    ("es", "", False),
    ("ly", "", False),
    ("s", "", False),
)
_MIN_STEM = 3
_KEEP_DOUBLED = frozenset("lsz")

_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def _undouble(stem: str) -> str:
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in _KEEP_DOUBLED:
        return stem[:-1]
    return stem


def stem(token: str) -> str:
    """Strip one inflectional suffix from a lowercase token."""
    for suffix, replacement, undouble in _STEM_RULES:
        if token.endswith(suffix):
            candidate = token[: len(token) - len(suffix)] + replacement
            if undouble:
                candidate = _undouble(candidate)
            if len(candidate) >= _MIN_STEM:
                return candidate
    return token


def preprocess(text: str) -> list[str]:
    """Normalize text into classifier terms.

    Lowercases, splits on non-alphanumeric runs, drops stop words, and
    stems what remains. May return an empty list.
    """
    terms = []
    for token in _TOKEN_RE.split(text.lower()):
        if not token or token in STOPWORDS:
            continue
        terms.append(stem(token))
    return terms


_SENTENCE_RE = re.compile(r"(?<=[.?!])\s+(?=[A-Z])")


def split_sentences(text: str) -> list[str]:
    """Split a document at terminal punctuation followed by a capital."""
    stripped = text.strip()
    if not stripped:
        return []
    return [s for s in _SENTENCE_RE.split(stripped) if s]


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabeledSnippet:
    text: str
    labels: tuple[str, ...]

    @staticmethod
    def make(text: str, labels: list[str] | tuple[str, ...]) -> "LabeledSnippet":
        return LabeledSnippet(text, tuple(sorted(set(labels))))


def validate_snippet(snippet: LabeledSnippet, tax: IndicatorTaxonomy,
                     allow_oversize: bool = False) -> None:
    """Enforce the 1..3 label rule against a taxonomy.

    Args:
        allow_oversize: accept more than 3 labels (unknown categories are
            still rejected).
    """
    if not snippet.labels:
        raise CorpusError("snippet has no labels")
    if not allow_oversize and len(snippet.labels) > MAX_LABELS_PER_SNIPPET:
        raise CorpusError(
            f"snippet has {len(snippet.labels)} labels "
            f"(limit {MAX_LABELS_PER_SNIPPET})")
    for lab in snippet.labels:
        if lab not in tax:
            raise CorpusError(f"unknown category {lab!r}")


def parse_corpus_line(line: str) -> LabeledSnippet:
    record = json.loads(line)
    if not isinstance(record, dict) or "text" not in record or "labels" not in record:
        raise CorpusError("corpus record needs 'text' and 'labels'")
    labels = record["labels"]
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise CorpusError("'labels' must be a list of strings")
    return LabeledSnippet.make(str(record["text"]), labels)


def load_corpus(lines, tax: IndicatorTaxonomy | None = None,
                allow_oversize: bool = False) -> list[LabeledSnippet]:
    """Read snippets from an iterable of JSON lines (blank lines skipped)."""
    corpus = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            snippet = parse_corpus_line(line)
            if tax is not None:
                validate_snippet(snippet, tax, allow_oversize=allow_oversize)
        except (json.JSONDecodeError, CorpusError) as exc:
            raise CorpusError(f"line {i}: {exc}") from exc
        corpus.append(snippet)
    return corpus


def corpus_line(snippet: LabeledSnippet, **extra) -> str:
    record: dict = {"text": snippet.text, "labels": list(snippet.labels)}
    record.update(extra)
    return json.dumps(record, ensure_ascii=False)


# ---------------------------------------------------------------------------
# Stratified k-fold
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: tuple[int, ...]  # snippet index -> fold

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignment) if f == fold]

    def label_fold_counts(self, corpus: list[LabeledSnippet]) -> dict[str, list[int]]:
        counts: dict[str, list[int]] = {}
        for i, snippet in enumerate(corpus):
            for lab in snippet.labels:
                counts.setdefault(lab, [0] * self.k)[self.assignment[i]] += 1
        return counts


def _quota_bounds(total: int, k: int) -> tuple[int, int]:
    """Integer fold counts c with |c - total/k| <= 1."""
    lb = -(-(total - k) // k)  # ceil((total - k) / k)
    return max(lb, 0), (total + k) // k


def _chain_size_delta(sizes: list[int], k: int, n: int,
                      a: int, b: int, e: int, c: int) -> int:
    """Fold-size imbalance change for the chain a->b then e->c."""
    net: dict[int, int] = {}
    for f, d in ((a, -1), (b, 1), (e, -1), (c, 1)):
        net[f] = net.get(f, 0) + d
    return sum((k * (sizes[f] + d) - n) ** 2 - (k * sizes[f] - n) ** 2
               for f, d in net.items() if d)


def _rebalance(corpus: list[LabeledSnippet], k: int,
               assignment: list[int]) -> int:
    """Move snippets between folds until every label meets its quota.

    Greedy placement alone can leave a label's per-fold counts more than
    one off the ideal total/k once labels interact. This pass walks
    downhill on a lexicographic potential — hard quota violations, then
    per-label imbalance, then fold-size imbalance — trying single-snippet
    moves first and two-move chains when no move improves (a chain
    escapes the plateau where pushing one label inside its quota pulls a
    partner label below its own). Only strict decreases are accepted, so
    the pass terminates. Mutates `assignment` and returns the remaining
    violation count (0 when every quota is met).
    """
    totals: dict[str, int] = {}
    for snippet in corpus:
        for lab in snippet.labels:
            totals[lab] = totals.get(lab, 0) + 1
    bounds = {lab: _quota_bounds(t, k)
              for lab, t in totals.items() if t >= k}

    counts = {lab: [0] * k for lab in totals}
    sizes = [0] * k
    for i, fold in enumerate(assignment):
        sizes[fold] += 1
        for lab in corpus[i].labels:
            counts[lab][fold] += 1

    def excess(lab: str, c: int) -> int:
        if lab not in bounds:
            return 0
        lb, ub = bounds[lab]
        return max(0, lb - c, c - ub)

    def delta_of(changes: dict[tuple[str, int], int]) -> tuple[int, int]:
        d_phi = d_sq = 0
        for (lab, f), d in changes.items():
            if d == 0:
                continue
            c, t = counts[lab][f], totals[lab]
            d_phi += excess(lab, c + d) - excess(lab, c)
            d_sq += (k * (c + d) - t) ** 2 - (k * c - t) ** 2
        return d_phi, d_sq

    def shift(i: int, dst: int) -> dict[tuple[str, int], int]:
        src = assignment[i]
        changes: dict[tuple[str, int], int] = {}
        for lab in corpus[i].labels:
            changes[(lab, src)] = changes.get((lab, src), 0) - 1
            changes[(lab, dst)] = changes.get((lab, dst), 0) + 1
        return changes

    def apply(changes: dict[tuple[str, int], int]) -> None:
        for (lab, f), d in changes.items():
            counts[lab][f] += d

    n = len(corpus)

    def size_delta(src: int, dst: int) -> int:
        return ((k * (sizes[src] - 1) - n) ** 2 - (k * sizes[src] - n) ** 2
                + (k * (sizes[dst] + 1) - n) ** 2 - (k * sizes[dst] - n) ** 2)

    def phi_now() -> int:
        return sum(excess(lab, c) for lab in bounds for c in counts[lab])

    def merged(first: dict, second: dict) -> dict:
        combined = dict(first)
        for cell, d in second.items():
            combined[cell] = combined.get(cell, 0) + d
        return combined

    def best_chain() -> tuple | None:
        """Two-move chains out of a plateau: move i a->b, then either
        displace a snippet out of b or pull one into a."""
        best: tuple | None = None
        for i, a in enumerate(assignment):
            hits_violation = any(
                excess(lab, counts[lab][a]) > 0 for lab in corpus[i].labels)
            for b in range(k):
                if b == a:
                    continue
                if not hits_violation and not any(
                        counts[lab][b] < bounds[lab][0]
                        for lab in corpus[i].labels if lab in bounds):
                    continue
                first = shift(i, b)
                if delta_of(first)[0] > 0:
                    continue
                for j, e in enumerate(assignment):
                    if j == i:
                        continue
                    targets = range(k) if e == b else (a,)
                    for c in targets:
                        if c == e:
                            continue
                        combined = merged(first, shift(j, c))
                        d_phi, d_sq = delta_of(combined)
                        delta = (d_phi, d_sq,
                                 _chain_size_delta(sizes, k, n, a, b, e, c))
                        if delta < (0, 0, 0) and (
                                best is None or (*delta, i, b, j, c) < best):
                            best = (*delta, i, b, j, c)
        return best

    while True:
        best: tuple | None = None
        action: tuple | None = None
        for i, src in enumerate(assignment):
            for dst in range(k):
                if dst == src:
                    continue
                d_phi, d_sq = delta_of(shift(i, dst))
                delta = (d_phi, d_sq, size_delta(src, dst))
                if delta < (0, 0, 0) and (best is None or (*delta, i, dst) < best):
                    best = (*delta, i, dst)
                    action = ("move", i, dst)
        if action is None and phi_now() > 0:
            chain = best_chain()
            if chain is not None:
                action = ("chain", chain[3], chain[4], chain[5], chain[6])
        if action is None:
            return phi_now()
        if action[0] == "move":
            _, i, dst = action
            src = assignment[i]
            apply(shift(i, dst))
            assignment[i] = dst
            sizes[src] -= 1
            sizes[dst] += 1
        else:
            _, i, b, j, c = action
            a, e = assignment[i], assignment[j]
            apply(shift(i, b))
            assignment[i] = b
            sizes[a] -= 1
            sizes[b] += 1
            apply(shift(j, c))
            assignment[j] = c
            sizes[e] -= 1
            sizes[c] += 1


def stratified_kfold(corpus: list[LabeledSnippet], k: int,
                     seed: int = 0) -> FoldAssignment:
    """Iterative stratification of a multi-label corpus into k folds.

    Repeatedly takes the label with the fewest unassigned snippets and
    deals those snippets to the folds with the greatest remaining demand
    for that label (ties broken by fewest snippets assigned so far, then
    by fold index), then rebalances until every label with at least k
    positives has per-fold counts within one of total/k. When a dealing
    order leaves the rebalancer stuck short of that target, the deal is
    retried with a reshuffled order. Deterministic for a given seed.

    Raises:
        KTooLargeError: k exceeds the corpus size.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if not corpus:
        raise ValueError("corpus is empty")
    if k > len(corpus):
        raise KTooLargeError(f"k={k} exceeds corpus size {len(corpus)}")

    by_label: dict[str, set[int]] = {}
    for i, snippet in enumerate(corpus):
        for lab in snippet.labels:
            by_label.setdefault(lab, set()).add(i)

    best: tuple[int, list[int]] | None = None
    for attempt in range(_MAX_DEAL_ATTEMPTS):
        rng = random.Random(seed * 1000003 + attempt)
        flat = _deal(corpus, k, by_label, rng)
        remaining = _rebalance(corpus, k, flat)
        if best is None or remaining < best[0]:
            best = (remaining, flat)
        if remaining == 0:
            break
    return FoldAssignment(k, tuple(best[1]))


_MAX_DEAL_ATTEMPTS = 8


def _deal(corpus: list[LabeledSnippet], k: int,
          by_label: dict[str, set[int]], rng: random.Random) -> list[int]:
    """One greedy dealing pass (label rarity order, demand-driven folds)."""
    # Remaining per-fold demand for each label, starting at total/k.
    desire = {lab: [len(ids) / k] * k for lab, ids in by_label.items()}
    fold_sizes = [0] * k
    assignment: dict[int, int] = {}
    unassigned = set(range(len(corpus)))

    while unassigned:
        open_labels = [
            (len(ids & unassigned), lab)
            for lab, ids in by_label.items()
            if ids & unassigned
        ]
        _, label = min(open_labels)
        pending = sorted(by_label[label] & unassigned)
        rng.shuffle(pending)
        for idx in pending:
            fold = min(range(k),
                       key=lambda f: (-desire[label][f], fold_sizes[f], f))
            assignment[idx] = fold
            fold_sizes[fold] += 1
            unassigned.discard(idx)
            for lab in corpus[idx].labels:
                desire[lab][fold] -= 1.0
    return [assignment[i] for i in range(len(corpus))]


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

def build_vocabulary(term_lists: list[list[str]]) -> tuple[tuple[str, ...], np.ndarray]:
    """Vocabulary (sorted) and idf vector over preprocessed documents.

    idf uses ln(N/df), which is invariant under corpus duplication.
    """
    df: dict[str, int] = {}
    for terms in term_lists:
        for term in set(terms):
            df[term] = df.get(term, 0) + 1
    vocabulary = tuple(sorted(df))
    if not vocabulary:
        raise EmptyVocabularyError("no terms survive preprocessing")
    n = len(term_lists)
    idf = np.array([math.log(n / df[t]) for t in vocabulary], dtype=np.float64)
    return vocabulary, idf


def _vectorize(term_lists: list[list[str]], index: dict[str, int],
               idf: np.ndarray) -> np.ndarray:
    x = np.zeros((len(term_lists), len(index)), dtype=np.float64)
    for row, terms in enumerate(term_lists):
        for term in terms:
            col = index.get(term)
            if col is not None:
                x[row, col] += 1.0
    x *= idf
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    np.divide(x, norms, out=x, where=norms > 0)
    return x


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 2.0
    epochs: int = 300
    l2: float = 1e-4


@dataclass
class IndicatorModel:
    """One-vs-rest logistic classifier over tf-idf features.

    weights has shape (|vocabulary|, |categories|); bias has shape
    (|categories|,). Category order follows the taxonomy.
    """

    categories: tuple[str, ...]
    vocabulary: tuple[str, ...]
    idf: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    seed: int
    hyperparams: Hyperparams
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {t: i for i, t in enumerate(self.vocabulary)}

    def to_dict(self) -> dict:
        return {
            "categories": list(self.categories),
            "vocabulary": list(self.vocabulary),
            "idf": self.idf.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "seed": self.seed,
            "hyperparams": {
                "learning_rate": self.hyperparams.learning_rate,
                "epochs": self.hyperparams.epochs,
                "l2": self.hyperparams.l2,
            },
        }

    @staticmethod
    def from_dict(record: dict) -> "IndicatorModel":
        hp = record["hyperparams"]
        return IndicatorModel(
            categories=tuple(record["categories"]),
            vocabulary=tuple(record["vocabulary"]),
            idf=np.array(record["idf"], dtype=np.float64),
            weights=np.array(record["weights"], dtype=np.float64),
            bias=np.array(record["bias"], dtype=np.float64),
            seed=record["seed"],
            hyperparams=Hyperparams(hp["learning_rate"], hp["epochs"], hp["l2"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as sink:
            json.dump(self.to_dict(), sink)

    @staticmethod
    def load(path) -> "IndicatorModel":
        with open(path, encoding="utf-8") as source:
            return IndicatorModel.from_dict(json.load(source))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train(corpus: list[LabeledSnippet], tax: IndicatorTaxonomy,
          hyperparams: Hyperparams | None = None, seed: int = 0) -> IndicatorModel:
    """Train one logistic model per category by full-batch gradient descent.

    Weights start at zero and descend the mean cross-entropy with L2
    decay on weights (not biases); the run is fully deterministic.

    Raises:
        EmptyVocabularyError: nothing survives preprocessing.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    hp = hyperparams or Hyperparams()
    term_lists = [preprocess(s.text) for s in corpus]
    vocabulary, idf = build_vocabulary(term_lists)
    index = {t: i for i, t in enumerate(vocabulary)}
    x = _vectorize(term_lists, index, idf)

    categories = tax.categories
    y = np.zeros((len(corpus), len(categories)), dtype=np.float64)
    col = {c: j for j, c in enumerate(categories)}
    for row, snippet in enumerate(corpus):
        for lab in snippet.labels:
            if lab in col:
                y[row, col[lab]] = 1.0

    w = np.zeros((len(vocabulary), len(categories)), dtype=np.float64)
    b = np.zeros(len(categories), dtype=np.float64)
    n = float(len(corpus))
    for _ in range(hp.epochs):
        p = _sigmoid(x @ w + b)
        err = p - y
        w -= hp.learning_rate * ((x.T @ err) / n + hp.l2 * w)
        b -= hp.learning_rate * (err.sum(axis=0) / n)
    return IndicatorModel(categories, vocabulary, idf, w, b, seed, hp)


def predict(model: IndicatorModel, text: str) -> dict[str, float]:
    """Per-category probabilities for one text (independent, not softmax)."""
    x = _vectorize([preprocess(text)], model._index, model.idf)
    p = _sigmoid(x @ model.weights + model.bias)[0]
    return {c: float(p[j]) for j, c in enumerate(model.categories)}


def predict_many(model: IndicatorModel, texts: list[str]) -> np.ndarray:
    x = _vectorize([preprocess(t) for t in texts], model._index, model.idf)
    return _sigmoid(x @ model.weights + model.bias)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelFoldStats:
    """Confusion counts for one label on one held-out fold."""

    fold: int
    tp: int
    fp: int
    fn: int
    support: int
    precision: float
    recall: float
    precision_undefined: bool
    recall_undefined: bool


@dataclass(frozen=True)
class MetricsReport:
    k: int
    seed: int
    categories: tuple[str, ...]
    folds: dict[str, tuple[LabelFoldStats, ...]]
    precision_mean: dict[str, float]
    precision_std: dict[str, float]
    recall_mean: dict[str, float]
    macro_precision: float
    micro_precision: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "macro_precision": self.macro_precision,
            "micro_precision": self.micro_precision,
            "labels": {
                c: {
                    "precision_mean": self.precision_mean[c],
                    "precision_std": self.precision_std[c],
                    "recall_mean": self.recall_mean[c],
                    "folds": [
                        {
                            "fold": s.fold,
                            "tp": s.tp,
                            "fp": s.fp,
                            "fn": s.fn,
                            "support": s.support,
                            "precision": s.precision,
                            "recall": s.recall,
                            "precision_undefined": s.precision_undefined,
                            "recall_undefined": s.recall_undefined,
                        }
                        for s in self.folds[c]
                    ],
                }
                for c in self.categories
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def format_table(self) -> str:
        """Fixed-width per-label summary (mean ± std across folds)."""
        header = f"{'category':<24} {'precision':>10} {'std':>8} {'recall':>8} {'support':>8}"
        rows = [header, "-" * len(header)]
        for c in self.categories:
            support = sum(s.support for s in self.folds[c])
            rows.append(
                f"{c:<24} {self.precision_mean[c]:>10.3f} "
                f"{self.precision_std[c]:>8.3f} {self.recall_mean[c]:>8.3f} "
                f"{support:>8d}")
        rows.append("-" * len(header))
        rows.append(f"{'macro precision':<24} {self.macro_precision:>10.3f}")
        rows.append(f"{'micro precision':<24} {self.micro_precision:>10.3f}")
        return "\n".join(rows)


def evaluate_cv(corpus: list[LabeledSnippet], tax: IndicatorTaxonomy, k: int,
                seed: int = 0,
                hyperparams: Hyperparams | None = None) -> MetricsReport:
    """k-fold cross-validation at decision threshold 0.5.

    Precision with zero predicted positives (and recall with zero
    support) is recorded as 0 with an explicit undefined flag, keeping
    every (label, fold) cell present.
    """
    folds = stratified_kfold(corpus, k, seed)
    categories = tax.categories
    col = {c: j for j, c in enumerate(categories)}
    stats: dict[str, list[LabelFoldStats]] = {c: [] for c in categories}

    for fold in range(k):
        test_idx = folds.fold_indices(fold)
        train_idx = [i for i in range(len(corpus)) if folds.assignment[i] != fold]
        model = train([corpus[i] for i in train_idx], tax, hyperparams, seed)
        probabilities = predict_many(model, [corpus[i].text for i in test_idx])
        predicted = probabilities >= DECISION_THRESHOLD

        actual = np.zeros_like(predicted)
        for row, i in enumerate(test_idx):
            for lab in corpus[i].labels:
                if lab in col:
                    actual[row, col[lab]] = True

        for c in categories:
            j = col[c]
            tp = int(np.sum(predicted[:, j] & actual[:, j]))
            fp = int(np.sum(predicted[:, j] & ~actual[:, j]))
            fn = int(np.sum(~predicted[:, j] & actual[:, j]))
            p_undef = (tp + fp) == 0
            r_undef = (tp + fn) == 0
            stats[c].append(LabelFoldStats(
                fold=fold, tp=tp, fp=fp, fn=fn, support=tp + fn,
                precision=0.0 if p_undef else tp / (tp + fp),
                recall=0.0 if r_undef else tp / (tp + fn),
                precision_undefined=p_undef, recall_undefined=r_undef))

    precision_mean = {}
    precision_std = {}
    recall_mean = {}
    for c in categories:
        ps = [s.precision for s in stats[c]]
        rs = [s.recall for s in stats[c]]
        mean = sum(ps) / k
        precision_mean[c] = mean
        precision_std[c] = math.sqrt(sum((p - mean) ** 2 for p in ps) / k)
        recall_mean[c] = sum(rs) / k

    tp_all = sum(s.tp for c in categories for s in stats[c])
    pp_all = sum(s.tp + s.fp for c in categories for s in stats[c])
    return MetricsReport(
        k=k, seed=seed, categories=categories,
        folds={c: tuple(stats[c]) for c in categories},
        precision_mean=precision_mean, precision_std=precision_std,
        recall_mean=recall_mean,
        macro_precision=sum(precision_mean.values()) / len(categories),
        micro_precision=0.0 if pp_all == 0 else tp_all / pp_all,
    )


# ---------------------------------------------------------------------------
# Entity extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DateMatch:
    value: dt.date
    span: tuple[int, int]


@dataclass(frozen=True)
class NameMatch:
    canonical: str
    span: tuple[int, int]


@dataclass(frozen=True)
class ExtractedEntities:
    dates: tuple[DateMatch, ...]
    persons: tuple[NameMatch, ...]
    organizations: tuple[NameMatch, ...]

    def to_dict(self) -> dict:
        return {
            "dates": [
                {"date": d.value.isoformat(), "span": list(d.span)}
                for d in self.dates
            ],
            "persons": [
                {"name": m.canonical, "span": list(m.span)} for m in self.persons
            ],
            "organizations": [
                {"name": m.canonical, "span": list(m.span)}
                for m in self.organizations
            ],
        }


@dataclass(frozen=True)
class Gazetteer:
    """Alias -> canonical-name maps, alias keys lowercased."""

    persons: dict[str, str]
    orgs: dict[str, str]

    @staticmethod
    def from_dict(record: dict) -> "Gazetteer":
        return Gazetteer(
            persons={k.lower(): v for k, v in record.get("persons", {}).items()},
            orgs={k.lower(): v for k, v in record.get("orgs", {}).items()},
        )

    @staticmethod
    def load(path) -> "Gazetteer":
        with open(path, encoding="utf-8") as source:
            return Gazetteer.from_dict(json.load(source))


_MONTHS = {
    name: i + 1
    for i, name in enumerate([
        "january", "february", "march", "april", "may", "june", "july",
        "august", "september", "october", "november", "december",
    ])
}
_MONTHS.update({name[:3]: num for name, num in list(_MONTHS.items())})
_MONTH_ALT = "|".join(sorted(_MONTHS, key=len, reverse=True))

_ISO_DATE_RE = re.compile(r"\b(\d{4})-(\d{2})-(\d{2})\b")
_MONTH_DAY_YEAR_RE = re.compile(
    rf"\b({_MONTH_ALT})\.?\s+(\d{{1,2}})\s*,\s*(\d{{4}})\b", re.IGNORECASE)
_DAY_MONTH_YEAR_RE = re.compile(
    rf"\b(\d{{1,2}})\s+({_MONTH_ALT})\.?\s+(\d{{4}})\b", re.IGNORECASE)


def _safe_date(year: int, month: int, day: int) -> dt.date | None:
    try:
        return dt.date(year, month, day)
    except ValueError:
        return None


def extract_dates(text: str) -> tuple[DateMatch, ...]:
    found: list[DateMatch] = []
    claimed: list[tuple[int, int]] = []

    def claim(start: int, end: int, value: dt.date | None) -> None:
        if value is None:
            return
        if any(start < c_end and end > c_start for c_start, c_end in claimed):
            return
        claimed.append((start, end))
        found.append(DateMatch(value, (start, end)))

    for m in _ISO_DATE_RE.finditer(text):
        claim(m.start(), m.end(),
              _safe_date(int(m.group(1)), int(m.group(2)), int(m.group(3))))
    for m in _MONTH_DAY_YEAR_RE.finditer(text):
        month = _MONTHS[m.group(1).lower()]
        claim(m.start(), m.end(),
              _safe_date(int(m.group(3)), month, int(m.group(2))))
    for m in _DAY_MONTH_YEAR_RE.finditer(text):
        month = _MONTHS[m.group(2).lower()]
        claim(m.start(), m.end(),
              _safe_date(int(m.group(3)), month, int(m.group(1))))
    found.sort(key=lambda d: d.span)
    return tuple(found)


def _gazetteer_matches(text: str, aliases: dict[str, str]) -> tuple[NameMatch, ...]:
    if not aliases:
        return ()
    # Longest alias first so the alternation prefers the longest match.
    pattern = re.compile(
        r"\b(?:" + "|".join(
            re.escape(a) for a in sorted(aliases, key=len, reverse=True)
        ) + r")\b",
        re.IGNORECASE,
    )
    return tuple(
        NameMatch(aliases[m.group(0).lower()], (m.start(), m.end()))
        for m in pattern.finditer(text)
    )


def extract_entities(text: str, gazetteer: Gazetteer) -> ExtractedEntities:
    """Rule-based dates plus case-insensitive longest-match gazetteer names.

    Date patterns: ISO YYYY-MM-DD, "Month D, YYYY", and "D Month YYYY"
    (full or three-letter month names). Impossible calendar dates are
    skipped. Name matching runs over the raw text, not the stemmed terms.
    """
    return ExtractedEntities(
        dates=extract_dates(text),
        persons=_gazetteer_matches(text, gazetteer.persons),
        organizations=_gazetteer_matches(text, gazetteer.orgs),
    )
