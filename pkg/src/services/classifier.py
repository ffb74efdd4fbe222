from __future__ import annotations

import itertools
from pathlib import Path
from typing import Dict, List, Mapping, NamedTuple, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
from pydantic import ValidationError
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from src.schemas.demographics import (
    AXIS_KEYS,
    Axis,
    DemographicLabel,
    Gender,
    Race,
)
from src.schemas.records import EmbeddingRecord, stack_embeddings
from src.schemas.svm_schemas import BinarySvm, EvalMetrics, SvmHyperParams, SvmModel
from src.services import smo
from src.services.logger import get_logger
from src.utils.canonical import canonical_json
from src.utils.errors import (
    DegenerateDataError,
    DimensionMismatchError,
    InputValidationError,
)
from src.worker.pool import ordered_map

logger = get_logger("classifier")

_PREDICT_CHUNK = 256


class Prediction(NamedTuple):
    category: str
    votes: Dict[str, int]


def axis_value(label: DemographicLabel, axis: Axis) -> str:
    if axis is Axis.RACE:
        return label.race.value
    if axis is Axis.GENDER:
        return label.gender.value
    raise InputValidationError(f"classifiers are trained per axis (race or gender), not {axis.value}")


def _labels(records: Sequence[EmbeddingRecord], axis: Axis) -> List[str]:
    labels = []
    for record in records:
        if record.true_label is None:
            raise InputValidationError(f"record {record.id!r} is unlabeled")
        labels.append(axis_value(record.true_label, axis))
    return labels


def resolve_gamma(x: np.ndarray, params: SvmHyperParams) -> float:
    if not isinstance(params.gamma, str):
        return float(params.gamma)
    mean_var = float(np.mean(np.var(x, axis=0)))
    if mean_var <= 0.0:
        raise DegenerateDataError("inseparable degenerate data: all embeddings are identical")
    return 1.0 / (x.shape[1] * mean_var)


def _train_pair(
    x: np.ndarray,
    labels: np.ndarray,
    pair: Tuple[str, str],
    gamma: float,
    params: SvmHyperParams,
) -> BinarySvm:
    positive, negative = pair
    mask = (labels == positive) | (labels == negative)
    xs = x[mask]
    ys = np.where(labels[mask] == positive, 1.0, -1.0)

    solution = smo.solve(
        xs,
        ys,
        c=params.c,
        gamma=gamma,
        tolerance=params.tolerance,
        max_iterations=params.max_passes,
        cache_rows=params.cache_rows,
    )
    support = solution.alpha > 0
    logger.info(
        "Binary SVM converged",
        extra={
            "stage": "train",
            "action_details": f"{positive} vs {negative}: {int(support.sum())} SVs, {solution.iterations} iterations",
        },
    )
    return BinarySvm(
        support_vectors=[tuple(row) for row in xs[support].tolist()],
        alphas=(solution.alpha[support] * ys[support]).tolist(),
        bias=-solution.rho,
        gamma=gamma,
        class_pair=pair,
        iterations=solution.iterations,
    )


def train(
    records: Sequence[EmbeddingRecord],
    axis: Axis,
    params: Optional[SvmHyperParams] = None,
    seed: int = 0,
    parallelism: int = 1,
) -> SvmModel:
    """
    One-vs-one RBF SVM over the categories of `axis` present in `records`.

    SMO is deterministic; `seed` is kept on the model for provenance.
    """
    params = params or SvmHyperParams()
    labels = np.asarray(_labels(records, axis))
    classes = [k for k in AXIS_KEYS[axis] if k in set(labels.tolist())]
    if len(classes) < 2:
        raise InputValidationError(f"single-class corpus: need >= 2 {axis.value} classes, found {classes}")

    x = stack_embeddings(list(records))
    if np.all(x == x[0]):
        raise DegenerateDataError("inseparable degenerate data: all embeddings are identical")
    gamma = resolve_gamma(x, params)

    logger.info(
        "Training started",
        extra={
            "stage": "train",
            "action_details": f"axis={axis.value} n={len(records)} dim={x.shape[1]} classes={len(classes)} gamma={gamma:.6g}",
        },
    )
    pairs = list(itertools.combinations(classes, 2))
    binaries = ordered_map(lambda pair: _train_pair(x, labels, pair, gamma, params), pairs, parallelism=parallelism)

    return SvmModel(
        axis=axis,
        classes=classes,
        binaries=binaries,
        training_dim=x.shape[1],
        gamma=gamma,
        params=params,
        seed=seed,
    )


def decision_values(binary: BinarySvm, x: np.ndarray) -> np.ndarray:
    if not binary.alphas:
        return np.full(x.shape[0], binary.bias)
    kernel = smo.rbf_rows(x, np.asarray(binary.support_vectors, dtype=np.float64), binary.gamma)
    coef = np.asarray(binary.alphas, dtype=np.float64)
    return np.array([np.dot(row, coef) for row in kernel]) + binary.bias


def _vote(model: SvmModel, decisions: Sequence[float]) -> Prediction:
    votes = {c: 0 for c in model.classes}
    strength = {c: 0.0 for c in model.classes}
    for binary, f in zip(model.binaries, decisions):
        winner = binary.class_pair[0] if f >= 0 else binary.class_pair[1]
        votes[winner] += 1
        strength[winner] += abs(f)

    top = max(votes.values())
    tied = [c for c in model.classes if votes[c] == top]
    best = max(tied, key=lambda c: (strength[c], -model.classes.index(c)))
    return Prediction(category=best, votes=votes)


def predict_many(model: SvmModel, x: np.ndarray) -> List[Prediction]:
    """
    Row-wise prediction; each row's result is identical to `predict` on it.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.training_dim:
        raise DimensionMismatchError(f"input dimension {x.shape[1]} does not match training dimension {model.training_dim}")

    predictions: List[Prediction] = []
    for start in range(0, x.shape[0], _PREDICT_CHUNK):
        chunk = x[start:start + _PREDICT_CHUNK]
        columns = np.stack([decision_values(b, chunk) for b in model.binaries], axis=1)
        predictions.extend(_vote(model, row.tolist()) for row in columns)
    return predictions


def predict(model: SvmModel, x: Sequence[float]) -> Prediction:
    return predict_many(model, np.asarray(x, dtype=np.float64)[None, :])[0]


def metrics_from_predictions(axis: Axis, classes: Sequence[str], y_true: Sequence[str], y_pred: Sequence[str]) -> EvalMetrics:
    if not y_true:
        raise InputValidationError("no validation records")
    labels = list(classes)
    confusion = confusion_matrix(y_true, y_pred, labels=labels)
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average="macro", zero_division=0
    )
    total = int(confusion.sum())
    return EvalMetrics(
        axis=axis,
        classes=labels,
        accuracy=float(np.trace(confusion)) / total,
        macro_precision=float(precision),
        macro_recall=float(recall),
        macro_f1=float(f1),
        confusion=confusion.astype(int).tolist(),
    )


def evaluate(model: SvmModel, validation: Sequence[EmbeddingRecord]) -> EvalMetrics:
    if not validation:
        raise InputValidationError("no validation records")
    y_true = _labels(validation, model.axis)
    unknown = sorted(set(y_true) - set(model.classes))
    if unknown:
        raise InputValidationError(f"validation classes {unknown} were not seen in training")

    y_pred = [p.category for p in predict_many(model, stack_embeddings(list(validation)))]
    return metrics_from_predictions(model.axis, model.classes, y_true, y_pred)


def format_metrics_table(metrics_by_axis: Mapping[str, EvalMetrics]) -> str:
    """
    Plain-text table: one row per axis, percentage columns.
    """
    header = f"{'Axis':<8}{'Accuracy':>10}{'Precision':>11}{'Recall':>9}{'F1':>8}"
    lines = [header, "-" * len(header)]
    for name in sorted(metrics_by_axis):
        m = metrics_by_axis[name]
        lines.append(
            f"{name:<8}{m.accuracy * 100:>9.1f}%{m.macro_precision * 100:>10.1f}%"
            f"{m.macro_recall * 100:>8.1f}%{m.macro_f1 * 100:>7.1f}%"
        )
    return "\n".join(lines) + "\n"


def save_model(model: SvmModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(model), encoding="utf-8")
    return path


def load_model(path: Path) -> SvmModel:
    try:
        return SvmModel.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InputValidationError(f"model file not found: {path}") from e
    except ValidationError as e:
        raise InputValidationError(f"invalid model file {path}: {e.errors()[0]['msg']}") from e


@runtime_checkable
class DemographicClassifier(Protocol):
    """Anything that labels embedding records with a (race, gender) cell."""

    def classify(self, records: Sequence[EmbeddingRecord]) -> List[DemographicLabel]:
        ...


class SvmClassifierPair:
    def __init__(self, race_model: SvmModel, gender_model: SvmModel) -> None:
        if race_model.axis is not Axis.RACE or gender_model.axis is not Axis.GENDER:
            raise InputValidationError("classifier pair needs a race model and a gender model")
        if race_model.training_dim != gender_model.training_dim:
            raise DimensionMismatchError(
                f"race model dim {race_model.training_dim} != gender model dim {gender_model.training_dim}"
            )
        self.race_model = race_model
        self.gender_model = gender_model

    @property
    def dim(self) -> int:
        return self.race_model.training_dim

    def classify(self, records: Sequence[EmbeddingRecord]) -> List[DemographicLabel]:
        if not records:
            return []
        x = stack_embeddings(list(records))
        races = predict_many(self.race_model, x)
        genders = predict_many(self.gender_model, x)
        return [DemographicLabel(Race(r.category), Gender(g.category)) for r, g in zip(races, genders)]


class OracleClassifier:
    """
    Returns each record's ground-truth label; the identity classifier for
    simulator audits.
    """

    dim: Optional[int] = None

    def classify(self, records: Sequence[EmbeddingRecord]) -> List[DemographicLabel]:
        labels = []
        for record in records:
            if record.true_label is None:
                raise InputValidationError(f"record {record.id!r} carries no ground-truth label")
            labels.append(record.true_label)
        return labels
