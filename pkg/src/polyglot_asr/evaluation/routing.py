"""Monte Carlo estimate of how often the LID -> accent cascade picks the right model.

Assumes language and accent errors are independent: the accent classifier is
only consulted for the predicted language, and a wrong language makes the
selection wrong regardless of accent.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidMatrix
from ..identification import DEFAULT_ACCENTS, DEFAULT_LANGUAGES

INDEPENDENCE_ASSUMPTION = (
    "language and accent identification errors are independent; accent is drawn from the "
    "true accent's row of the predicted language's matrix only when the language is correct"
)
Z_95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    labels: tuple
    rows: np.ndarray  # rows[true, predicted]

    def __post_init__(self):
        labels = tuple(self.labels)
        rows = np.asarray(self.rows, dtype=np.float64)
        if len(labels) == 0 or len(set(labels)) != len(labels):
            raise InvalidMatrix("labels must be non-empty and unique")
        if rows.shape != (len(labels), len(labels)):
            raise InvalidMatrix(f"matrix shape {rows.shape} does not match {len(labels)} labels")
        if not np.all(np.isfinite(rows)) or np.any(rows < 0):
            raise InvalidMatrix("matrix entries must be finite and non-negative")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidMatrix("each row must sum to 1")
        rows.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def uniform(cls, labels, accuracy: float) -> "ConfusionMatrix":
        """Diagonal ``accuracy`` with the remaining mass spread evenly off-diagonal."""
        labels = tuple(labels)
        k = len(labels)
        if not 0.0 <= accuracy <= 1.0:
            raise InvalidMatrix(f"accuracy {accuracy} outside [0, 1]")
        if k == 1:
            if accuracy != 1.0:
                raise InvalidMatrix("a single-label matrix must have accuracy 1")
            return cls(labels, np.ones((1, 1)))
        rows = np.full((k, k), (1.0 - accuracy) / (k - 1))
        np.fill_diagonal(rows, accuracy)
        return cls(labels, rows)

    @classmethod
    def identity(cls, labels) -> "ConfusionMatrix":
        return cls.uniform(labels, 1.0)

    @classmethod
    def from_csv(cls, path) -> "ConfusionMatrix":
        """CSV with a header row of predicted labels; each row is ``true_label, p...``."""
        text = Path(path).read_text()
        reader = list(csv.reader(io.StringIO(text)))
        if len(reader) < 2:
            raise InvalidMatrix(f"{path}: need a header and at least one row")
        labels = [c.strip() for c in reader[0][1:]]
        rows = {}
        for line in reader[1:]:
            if not line or not "".join(line).strip():
                continue
            try:
                rows[line[0].strip()] = [float(v) for v in line[1:]]
            except ValueError as exc:
                raise InvalidMatrix(f"{path}: {exc}") from exc
        if set(rows) != set(labels):
            raise InvalidMatrix(f"{path}: row labels {sorted(rows)} differ from columns {labels}")
        return cls(labels, [rows[label] for label in labels])

    @property
    def accuracy(self) -> float:
        return float(np.mean(np.diag(self.rows)))


@dataclass(frozen=True)
class SelectionStats:
    trials: int
    language_correct_rate: float
    fully_correct_rate: float
    confidence_interval_95: float  # half-width for language_correct_rate
    fully_correct_ci_95: float
    seed: int | None = None
    expected_language_rate: float | None = None
    expected_fully_correct_rate: float | None = None
    assumption: str = INDEPENDENCE_ASSUMPTION
    languages: tuple = field(default=())

    def to_document(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "languages": list(self.languages),
            "language_correct_rate": self.language_correct_rate,
            "fully_correct_rate": self.fully_correct_rate,
            "confidence_interval_95": self.confidence_interval_95,
            "fully_correct_ci_95": self.fully_correct_ci_95,
            "expected_language_rate": self.expected_language_rate,
            "expected_fully_correct_rate": self.expected_fully_correct_rate,
            "assumption": self.assumption,
        }

    def to_rows(self):
        doc = self.to_document()
        doc["languages"] = " ".join(doc["languages"])
        return list(doc), [list(doc.values())]


def _half_width(p: float, n: int) -> float:
    return Z_95 * math.sqrt(p * (1.0 - p) / n)


def _accent_matrix(accent_per_language: dict, language: str):
    m = accent_per_language.get(language)
    return m if m is not None else ConfusionMatrix.identity(("default",))


def expected_rates(lid: ConfusionMatrix, accent_per_language: dict, true_languages=None):
    """Closed-form language-correct and fully-correct rates under the simulator's model."""
    langs = tuple(true_languages or lid.labels)
    lang_rates, full_rates = [], []
    for lang in langs:
        i = lid.labels.index(lang)
        p_lang = lid.rows[i, i]
        lang_rates.append(p_lang)
        full_rates.append(p_lang * _accent_matrix(accent_per_language, lang).accuracy)
    return float(np.mean(lang_rates)), float(np.mean(full_rates))


def _sample_rows(rng, cdf: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # inverse-CDF sampling of one predicted label per trial
    u = rng.random(rows.size)
    picked = (u[:, None] >= cdf[rows]).sum(axis=1)
    return np.minimum(picked, cdf.shape[1] - 1)


def simulate_routing(lid: ConfusionMatrix, accent_per_language: dict | None = None,
                     trials: int = 100000, seed: int = 0, true_languages=None) -> SelectionStats:
    """Draw true (language, accent) uniformly and push it through both confusion stages.

    The true language is uniform over ``true_languages`` (default: every LID
    label) and the true accent uniform over that language's accent labels.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    accent_per_language = dict(accent_per_language or {})
    for lang, m in accent_per_language.items():
        if lang not in lid.labels:
            raise InvalidMatrix(f"accent matrix for {lang!r}, which the LID matrix does not know")
        if not isinstance(m, ConfusionMatrix):
            raise InvalidMatrix(f"accent matrix for {lang!r} is not a ConfusionMatrix")
    langs = tuple(true_languages or lid.labels)
    unknown = [lang for lang in langs if lang not in lid.labels]
    if unknown:
        raise InvalidMatrix(f"true languages {unknown} are not LID labels")
    rng = np.random.default_rng(seed)
    lang_idx = np.array([lid.labels.index(lang) for lang in langs])
    true_lang = lang_idx[rng.integers(len(langs), size=trials)]
    pred_lang = _sample_rows(rng, np.cumsum(lid.rows, axis=1), true_lang)
    lang_ok = pred_lang == true_lang
    full_ok = np.zeros(trials, dtype=bool)
    for li in lang_idx:
        m = _accent_matrix(accent_per_language, lid.labels[li])
        sel = np.flatnonzero(true_lang == li)
        true_acc = rng.integers(len(m.labels), size=sel.size)
        pred_acc = _sample_rows(rng, np.cumsum(m.rows, axis=1), true_acc)
        full_ok[sel] = lang_ok[sel] & (pred_acc == true_acc)
    p_lang = float(lang_ok.mean())
    p_full = float(full_ok.mean())
    exp_lang, exp_full = expected_rates(lid, accent_per_language, langs)
    return SelectionStats(
        trials=trials,
        language_correct_rate=p_lang,
        fully_correct_rate=p_full,
        confidence_interval_95=_half_width(p_lang, trials),
        fully_correct_ci_95=_half_width(p_full, trials),
        seed=seed,
        expected_language_rate=exp_lang,
        expected_fully_correct_rate=exp_full,
        languages=langs,
    )


def uniform_lid_matrix(accuracy: float, labels=DEFAULT_LANGUAGES) -> ConfusionMatrix:
    return ConfusionMatrix.uniform(labels, accuracy)


def uniform_accent_matrix(language: str, accuracy: float) -> ConfusionMatrix:
    return ConfusionMatrix.uniform(DEFAULT_ACCENTS[language], accuracy)
