"""
Activity recognition on TraceDatasets and the macro-averaged F1 objective.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.ensemble import RandomForestClassifier
from sklearn.metrics import f1_score
from sklearn.neighbors import KNeighborsClassifier

from schemas.config_files import ClassifierConfig
from services.simulator import OccupantSeries, TraceDataset

logger = logging.getLogger(__name__)


class ClassifierError(Exception):
    """Raised on invalid classifier input"""
    pass


@dataclass(frozen=True, eq=False)
class LabeledMatrix:
    features: np.ndarray
    labels: np.ndarray
    class_names: Tuple[str, ...]

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ClassifierError("features must be (n, D) with one label per row")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ClassifierError("class index outside the class set")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def width(self) -> int:
        return self.features.shape[1]


def window_features(bits: np.ndarray, window: int = 1) -> np.ndarray:
    """Concatenate the current and previous window-1 bit vectors (zero padded)"""
    if window <= 1:
        return bits
    shifted = [bits]
    for lag in range(1, window):
        lagged = np.zeros_like(bits)
        lagged[lag:] = bits[:-lag]
        shifted.append(lagged)
    return np.hstack(shifted)


def matrix_from_series(series: Sequence[OccupantSeries], class_names: Sequence[str], window: int = 1) -> LabeledMatrix:
    features = np.vstack([window_features(s.bits, window) for s in series])
    labels = np.concatenate([s.labels for s in series])
    return LabeledMatrix(features=features, labels=labels, class_names=tuple(class_names))


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


class ForestModel:
    """Random forest with hard majority voting across trees"""

    def __init__(self, forest: RandomForestClassifier, n_features: int):
        self.forest = forest
        self.n_features = n_features

    @property
    def n_trees(self) -> int:
        return len(self.forest.estimators_)

    def predict_many(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise ClassifierError(f"expected vectors of length {self.n_features}, got shape {features.shape}")
        classes = self.forest.classes_
        votes = np.zeros((len(features), len(classes)), dtype=np.int64)
        rows = np.arange(len(features))
        for tree in self.forest.estimators_:
            # sub-estimators predict positions in forest.classes_
            np.add.at(votes, (rows, tree.predict(features).astype(int)), 1)
        return classes[np.argmax(votes, axis=1)].astype(int)


class KnnModel:
    """Hamming-distance k nearest neighbours over bit vectors"""

    def __init__(self, knn: KNeighborsClassifier, n_features: int):
        self.knn = knn
        self.n_features = n_features

    def predict_many(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise ClassifierError(f"expected vectors of length {self.n_features}, got shape {features.shape}")
        if len(features) == 0:
            raise ClassifierError("empty query")
        return self.knn.predict(features.astype(float)).astype(int)


Model = Union[ForestModel, KnnModel]


def train_forest(data: LabeledMatrix, params: Optional[ClassifierConfig] = None,
                 rng: Optional[np.random.Generator] = None) -> ForestModel:
    """
    Bootstrap-aggregated Gini trees with sqrt(D) candidate features per split.

    Single-class data yields a constant model. Per-tree seeds come from the
    forest's random_state, so the model does not depend on n_jobs.
    """
    if len(data) == 0:
        raise ClassifierError("cannot train on empty data")
    params = params or ClassifierConfig()
    rng = rng or np.random.default_rng(0)
    forest = RandomForestClassifier(
        n_estimators=params.n_trees,
        criterion="gini",
        max_features="sqrt",
        max_depth=params.max_depth,
        min_samples_leaf=params.min_leaf,
        bootstrap=True,
        n_jobs=params.n_jobs,
        random_state=_seed(rng),
    )
    forest.fit(data.features, data.labels)
    return ForestModel(forest, data.width)


def train_knn(data: LabeledMatrix, k: int = 5) -> KnnModel:
    if len(data) == 0:
        raise ClassifierError("cannot train on empty data")
    knn = KNeighborsClassifier(n_neighbors=min(k, len(data)), metric="hamming", algorithm="brute")
    knn.fit(data.features.astype(float), data.labels)
    return KnnModel(knn, data.width)


def train_classifier(data: LabeledMatrix, params: Optional[ClassifierConfig] = None,
                     rng: Optional[np.random.Generator] = None) -> Model:
    params = params or ClassifierConfig()
    if params.kind == "knn":
        return train_knn(data, params.k)
    return train_forest(data, params, rng)


def predict(model: Model, vector: Sequence[int]) -> int:
    return int(model.predict_many(np.asarray(vector).reshape(1, -1))[0])


def predict_knn(model: KnnModel, vector: Sequence[int]) -> int:
    vector = np.asarray(vector)
    if vector.size == 0:
        raise ClassifierError("empty query")
    return predict(model, vector)


def macro_f1(predictions: Sequence[int], truths: Sequence[int], n_classes: int) -> float:
    """
    Unweighted mean of per-class F1 over all n_classes classes; a class with
    no support and no predictions scores 0.
    """
    predictions = np.asarray(predictions, dtype=int)
    truths = np.asarray(truths, dtype=int)
    if predictions.shape != truths.shape:
        raise ClassifierError("predictions and truths differ in length")
    if truths.size == 0:
        return 0.0
    return float(f1_score(truths, predictions, labels=list(range(n_classes)), average="macro", zero_division=0))


def _fit_and_score(train: LabeledMatrix, test: LabeledMatrix, params: ClassifierConfig,
                   rng: np.random.Generator) -> float:
    model = train_classifier(train, params, rng)
    return macro_f1(model.predict_many(test.features), test.labels, len(test.class_names))


def loocv_scores(ds: TraceDataset, params: Optional[ClassifierConfig] = None,
                 rng: Optional[np.random.Generator] = None) -> List[float]:
    """Per-occupant macro-F1 with that occupant held out"""
    if ds.occupants < 2:
        raise ClassifierError(f"leave-one-occupant-out needs at least 2 occupants, got {ds.occupants}")
    params = params or ClassifierConfig()
    rng = rng or np.random.default_rng(0)
    fold_rngs = rng.spawn(ds.occupants)
    scores = []
    for i in range(ds.occupants):
        train = matrix_from_series([s for j, s in enumerate(ds.series) if j != i], ds.class_names, params.window)
        test = matrix_from_series([ds.series[i]], ds.class_names, params.window)
        scores.append(_fit_and_score(train, test, params, fold_rngs[i]))
    return scores


def evaluate_loocv(ds: TraceDataset, params: Optional[ClassifierConfig] = None,
                   rng: Optional[np.random.Generator] = None) -> float:
    scores = loocv_scores(ds, params, rng)
    value = float(np.mean(scores))
    logger.debug("loocv folds=%s mean=%.4f", ["%.4f" % s for s in scores], value)
    return value


def evaluate_split(train: TraceDataset, test: TraceDataset, params: Optional[ClassifierConfig] = None,
                   rng: Optional[np.random.Generator] = None) -> float:
    """Macro-F1 on the test set of a model trained on the train set"""
    params = params or ClassifierConfig()
    rng = rng or np.random.default_rng(0)
    if tuple(train.class_names) != tuple(test.class_names):
        raise ClassifierError("train and test datasets use different class sets")
    train_matrix = matrix_from_series(train.series, train.class_names, params.window)
    test_matrix = matrix_from_series(test.series, test.class_names, params.window)
    if len(train_matrix) == 0 or len(test_matrix) == 0:
        raise ClassifierError("train and test sets must both be nonempty")
    return _fit_and_score(train_matrix, test_matrix, params, rng)
