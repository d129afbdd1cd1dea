"""Desk-scale student classifier over SFT exports.

A hashed character n-gram featurizer feeds a 6-way multinomial logistic
model trained by minibatch SGD on the category-averaged cross-entropy
(each category contributes equally regardless of its record count).

Every SFT input shares the detection template and the rendered rule base as
a common prefix, so the model weighs features by inverse document frequency
learned at training time: n-grams present in (nearly) every record carry no
class signal and are dropped; the informative response tail keeps its mass.
Inputs are L2-normalized after weighting, keeping SGD steps scale-free.

This verifies the knowledge-guided training loop end to end without GPUs;
it is an analogue of full LLM fine-tuning, not a replacement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CATEGORY_ORDER, Category
from .errors import DataValidationError
from .kernels import ngram_hash_counts
from .synthgen import SftRecord

N_CLASSES = len(CATEGORY_ORDER)


@dataclass(frozen=True)
class FeatureExtractor:
    orders: tuple[int, ...] = (1, 2, 3)
    dim: int = 2 ** 18
    seed: int = 0

    def featurize(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        """Sparse hashed n-gram counts: (sorted indices, counts)."""
        return ngram_hash_counts(text, tuple(self.orders), self.dim, self.seed)

    def to_json(self) -> dict:
        return {"orders": list(self.orders), "dim": self.dim, "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureExtractor":
        return cls(orders=tuple(obj["orders"]), dim=int(obj["dim"]),
                   seed=int(obj.get("seed", 0)))


@dataclass
class LinearModel:
    weights: np.ndarray               # (6, dim)
    bias: np.ndarray                  # (6,)
    feature: FeatureExtractor
    idf: dict[int, float] = field(default_factory=dict)
    n_docs: int = 0
    metadata: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, feature: FeatureExtractor) -> "LinearModel":
        return cls(weights=np.zeros((N_CLASSES, feature.dim)),
                   bias=np.zeros(N_CLASSES), feature=feature)

    @property
    def idf_default(self) -> float:
        """Weight for features never seen during training (df = 0)."""
        return math.log(1.0 + self.n_docs) + 1.0 if self.n_docs else 1.0

    def transform(self, idx: np.ndarray, cnt: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray]:
        """Model input vector: idf-weighted counts, L2-normalized."""
        if idx.size == 0:
            return idx, cnt
        default = self.idf_default
        values = cnt * np.asarray([self.idf.get(int(j), default) for j in idx])
        norm = float(np.linalg.norm(values))
        if norm > 0:
            values = values / norm
        return idx, values

    def inputs(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        return self.transform(*self.feature.featurize(text))


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def _logits(model: LinearModel, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    if idx.size == 0:
        return model.bias.copy()
    return model.weights[:, idx] @ vals + model.bias


def predict(model: LinearModel, fx: FeatureExtractor, text: str
            ) -> tuple[Category, np.ndarray]:
    """Most probable category (ties resolve in category order) plus the full
    probability vector."""
    idx, vals = model.transform(*fx.featurize(text))
    probs = _softmax(_logits(model, idx, vals))
    return CATEGORY_ORDER[int(np.argmax(probs))], probs


@dataclass
class TrainConfig:
    epochs: int = 30
    lr: float = 1.0
    batch_size: int = 32
    l2: float = 1e-5
    max_df: float = 0.9    # features in more of the corpus than this are dropped
    seed: int = 0


def _raw_features(records: list[SftRecord], fx: FeatureExtractor):
    feats = []
    classes = []
    for rec in records:
        cat = Category.parse(rec.target)
        feats.append(fx.featurize(rec.input))
        classes.append(CATEGORY_ORDER.index(cat))
    return feats, np.asarray(classes, dtype=np.int64)


def _fit_idf(feats, n_docs: int, max_df: float) -> dict[int, float]:
    """Smoothed idf over the training records; near-ubiquitous features get
    weight 0 (the shared prompt scaffolding carries no class signal)."""
    df: dict[int, int] = {}
    for idx, _ in feats:
        for j in idx:
            j = int(j)
            df[j] = df.get(j, 0) + 1
    cutoff = max_df * n_docs
    return {j: 0.0 if d > cutoff else math.log((1.0 + n_docs) / (1.0 + d)) + 1.0
            for j, d in df.items()}


def _sample_weights(classes: np.ndarray) -> np.ndarray:
    """Per-record weight 1 / (n_present_categories * category_count): every
    category carries the same total mass, so duplicating a category's records
    leaves the objective unchanged."""
    present, counts = np.unique(classes, return_counts=True)
    weight_by_class = {int(c): 1.0 / (len(present) * n)
                       for c, n in zip(present, counts)}
    return np.asarray([weight_by_class[int(c)] for c in classes])


def objective(model: LinearModel, inputs, classes: np.ndarray,
              weights: np.ndarray, l2: float) -> float:
    """Category-averaged cross-entropy plus the L2 term; `inputs` are
    model-transformed feature vectors."""
    total = 0.0
    for (idx, vals), y, w in zip(inputs, classes, weights):
        z = _logits(model, idx, vals)
        z = z - z.max()
        log_probs = z - np.log(np.exp(z).sum())
        total += -float(log_probs[y]) * w
    total += 0.5 * l2 * float((model.weights ** 2).sum())
    return total


def train(records: list[SftRecord], fx: FeatureExtractor,
          hyper: TrainConfig | None = None) -> tuple[LinearModel, list[float]]:
    """Minibatch SGD on the category-averaged cross-entropy.

    Returns the model plus the loss trace: the full objective at
    initialization and after every epoch. Deterministic per seed.
    """
    hyper = hyper or TrainConfig()
    if not records:
        raise DataValidationError("train: no records")
    feats, classes = _raw_features(records, fx)
    if len(np.unique(classes)) < 2:
        raise DataValidationError("train: need records from >= 2 categories")
    weights = _sample_weights(classes)
    n = len(records)

    model = LinearModel.zeros(fx)
    if hyper.epochs > 0:
        model.idf = _fit_idf(feats, n, hyper.max_df)
        model.n_docs = n
    inputs = [model.transform(idx, cnt) for idx, cnt in feats]

    rng = np.random.default_rng(hyper.seed)
    trace = [objective(model, inputs, classes, weights, hyper.l2)]
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            batch = order[start:start + hyper.batch_size]
            scale = n / len(batch)
            grad_b = np.zeros(N_CLASSES)
            contribs = []   # (per-class coefficients, feature idx, values)
            for i in batch:
                idx, vals = inputs[i]
                probs = _softmax(_logits(model, idx, vals))
                g = probs.copy()
                g[classes[i]] -= 1.0
                g *= weights[i] * scale
                grad_b += g
                if idx.size:
                    contribs.append((g, idx, vals))
            # apply the accumulated batch gradient in one step
            if hyper.l2:
                model.weights *= (1.0 - hyper.lr * hyper.l2)
            for g, idx, vals in contribs:
                model.weights[:, idx] -= hyper.lr * np.outer(g, vals)
            model.bias -= hyper.lr * grad_b
        trace.append(objective(model, inputs, classes, weights, hyper.l2))
    model.metadata["records"] = n
    return model, trace


def grad_check(model: LinearModel, fx: FeatureExtractor, record: SftRecord,
               epsilon: float = 1e-5, max_entries: int = 24,
               seed: int = 0) -> float:
    """Max relative error between the analytic cross-entropy gradient and
    central finite differences over a sampled subset of weight entries."""
    if not (0 < epsilon <= 1e-2):
        raise DataValidationError("epsilon must be in (0, 1e-2]")
    idx, vals = model.transform(*fx.featurize(record.input))
    if idx.size == 0:
        raise DataValidationError("record featurizes to the zero vector")
    y = CATEGORY_ORDER.index(Category.parse(record.target))

    def loss_at(w: np.ndarray) -> float:
        z = w[:, idx] @ vals + model.bias
        z = z - z.max()
        return float(np.log(np.exp(z).sum()) - z[y])

    probs = _softmax(_logits(model, idx, vals))
    onehot = np.zeros(N_CLASSES)
    onehot[y] = 1.0

    rng = np.random.default_rng(seed)
    entries = [(c, j) for c in range(N_CLASSES) for j in idx]
    if len(entries) > max_entries:
        pick = rng.choice(len(entries), size=max_entries, replace=False)
        entries = [entries[int(p)] for p in pick]

    w = model.weights
    worst = 0.0
    pos = {int(j): p for p, j in enumerate(idx)}
    for c, j in entries:
        analytic = (probs[c] - onehot[c]) * vals[pos[int(j)]]
        orig = w[c, j]
        w[c, j] = orig + epsilon
        up = loss_at(w)
        w[c, j] = orig - epsilon
        down = loss_at(w)
        w[c, j] = orig
        numeric = (up - down) / (2 * epsilon)
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-10)
        worst = max(worst, rel)
    return worst


def save_model(model: LinearModel, path: str | Path) -> None:
    """Sparse JSON serialization (nonzero weights only) so diffs stay readable."""
    weights_json: dict[str, list] = {}
    for c, cat in enumerate(CATEGORY_ORDER):
        row = model.weights[c]
        nz = np.flatnonzero(row)
        weights_json[cat.canonical] = [[int(j), float(row[j])] for j in nz]
    doc = {
        "feature": model.feature.to_json(),
        "bias": [float(b) for b in model.bias],
        "weights": weights_json,
        "idf": [[j, v] for j, v in sorted(model.idf.items())],
        "n_docs": model.n_docs,
        "metadata": model.metadata,
    }
    Path(path).write_text(json.dumps(doc, ensure_ascii=False) + "\n",
                          encoding="utf-8")


def load_model(path: str | Path) -> LinearModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    fx = FeatureExtractor.from_json(doc["feature"])
    model = LinearModel.zeros(fx)
    model.bias = np.asarray(doc["bias"], dtype=np.float64)
    for cat_name, pairs in doc["weights"].items():
        c = CATEGORY_ORDER.index(Category.parse(cat_name))
        for j, v in pairs:
            model.weights[c, int(j)] = float(v)
    model.idf = {int(j): float(v) for j, v in doc.get("idf", [])}
    model.n_docs = int(doc.get("n_docs", 0))
    model.metadata = doc.get("metadata", {})
    return model
