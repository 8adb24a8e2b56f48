"""Linear classifiers and the two fusion architectures.

Training minimizes 0.5*||w||^2 + c * sum(loss) with an unregularized bias
via deterministic L-BFGS (zero start, no randomness), so identical data,
config, and backend give bitwise-identical weights. Class encoding is
content_dense = +1; a lead is predicted content_dense when its decision
margin is >= 0 (exact ties go to content_dense).

Feature-level fusion trains one logistic model on the concatenation of all
feature spaces. Decision-level fusion is a two-layer stack: three logistic
models (one per space) trained on the training set, then a linear
squared-hinge model over their three content-dense probabilities trained
on the development set, with Platt-calibrated probability output.

Hyperparameter c is grid-searched by development-set accuracy; ties pick
the smallest c.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import AnnotatedLead
from .errors import (
    DataLeakError,
    NumericError,
    SingleClassError,
    ValidationError,
)
from .features import (
    SPACE_MI,
    SPACE_MRC,
    SPACE_ORDER,
    SPACE_PR,
    FeatureBundle,
    FeatureSpace,
    SparseFeatureVector,
    space_from_lines,
    space_to_lines,
)
from .kernels import (
    LOSS_HINGE,
    LOSS_LOGISTIC,
    LOSSES,
    CsrMatrix,
    build_csr,
    margins,
    objective_and_grad,
)
from .labeling import CONTENT_DENSE, NON_CONTENT_DENSE
from .optimize import fit_platt_sigmoid, minimize_lbfgs

MODE_MRC = "mrc"
MODE_MI = "mi"
MODE_PR = "pr"
MODE_FEATURE_FUSION = "feature_fusion"
MODE_DECISION_FUSION = "decision_fusion"
MODES = (MODE_MRC, MODE_MI, MODE_PR, MODE_FEATURE_FUSION, MODE_DECISION_FUSION)

SINGLE_MODE_SPACE = {MODE_MRC: SPACE_MRC, MODE_MI: SPACE_MI, MODE_PR: SPACE_PR}

SPACE_META = "META"
META_SPACE = FeatureSpace(SPACE_META,
                          {f"p_{name.lower()}": k
                           for k, name in enumerate(SPACE_ORDER)})

DEFAULT_C_GRID = (2.0 ** -5, 2.0 ** -3, 2.0 ** -1, 2.0, 2.0 ** 3, 2.0 ** 5)


@dataclass(frozen=True)
class TrainConfig:
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    max_iters: int = 300
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not self.c_grid:
            raise ValidationError("c_grid is empty")
        if any(c <= 0 for c in self.c_grid):
            raise ValidationError("c_grid values must be positive")
        if self.max_iters < 1 or self.tol <= 0:
            raise ValidationError("max_iters must be >= 1 and tol > 0")

    @property
    def sorted_c_grid(self) -> tuple[float, ...]:
        return tuple(sorted(self.c_grid))


def _label_to_y(labels: Sequence[str]) -> np.ndarray:
    y = np.empty(len(labels), dtype=np.float64)
    for k, label in enumerate(labels):
        if label == CONTENT_DENSE:
            y[k] = 1.0
        elif label == NON_CONTENT_DENSE:
            y[k] = -1.0
        else:
            raise ValidationError(f"unknown label {label!r}")
    return y


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass
class LinearModel:
    """Dense weight vector + bias over one named feature space."""

    weights: np.ndarray
    bias: float
    space_name: str
    loss: str
    l2_c: float
    platt: tuple[float, float] | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.loss not in LOSSES:
            raise ValidationError(f"unknown loss {self.loss!r}")
        if self.l2_c <= 0:
            raise ValidationError("l2_c must be positive")
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise NumericError("model parameters are not finite")

    @property
    def dim(self) -> int:
        return len(self.weights)

    def margin(self, x: SparseFeatureVector) -> float:
        if x.space_name != self.space_name:
            raise ValidationError(
                f"vector from space {x.space_name!r} scored by a "
                f"{self.space_name!r} model"
            )
        acc = self.bias
        for idx, value in x.entries.items():
            if idx >= self.dim:
                raise ValidationError(
                    f"feature index {idx} outside model dimension {self.dim}"
                )
            acc += value * self.weights[idx]
        return acc

    def predict_proba(self, x: SparseFeatureVector) -> float:
        """Probability of the content_dense class.

        Logistic models apply the sigmoid to the margin directly; hinge
        models require a fitted Platt calibration (a, b) and return
        sigmoid(a*margin + b).
        """
        m = self.margin(x)
        if self.loss == LOSS_LOGISTIC:
            return _sigmoid(m)
        if self.platt is None:
            raise ValidationError(
                "hinge model has no Platt calibration; fit one on held-out "
                "margins before asking for probabilities"
            )
        a, b = self.platt
        return _sigmoid(a * m + b)

    def predict_label(self, x: SparseFeatureVector) -> str:
        return CONTENT_DENSE if self.margin(x) >= 0.0 else NON_CONTENT_DENSE


def predict_proba(model: LinearModel, x: SparseFeatureVector) -> float:
    """Module-level alias for LinearModel.predict_proba."""
    return model.predict_proba(x)


def _train_on_csr(X: CsrMatrix, y: np.ndarray, space_name: str, loss: str,
                  c: float, config: TrainConfig) -> LinearModel:
    if c <= 0:
        raise ValidationError("c must be positive")
    n, d = X.n_rows, X.n_cols
    if n < 2:
        raise ValidationError("need at least two training examples")
    if len(np.unique(y)) < 2:
        raise SingleClassError("training labels cover a single class")

    def fun(packed: np.ndarray):
        w = packed[:d]
        b = packed[d]
        value, grad_w, grad_b = objective_and_grad(w, b, X, y, c, loss)
        return value, np.concatenate([grad_w, [grad_b]])

    res = minimize_lbfgs(fun, np.zeros(d + 1), max_iters=config.max_iters,
                         tol=config.tol)
    w = res.x[:d]
    b = float(res.x[d])
    if not (np.all(np.isfinite(w)) and math.isfinite(b)):
        raise NumericError("optimizer produced non-finite parameters")
    return LinearModel(weights=w, bias=b, space_name=space_name, loss=loss,
                       l2_c=c)


def train_linear(X: Sequence[SparseFeatureVector], y: Sequence[str],
                 space: FeatureSpace, loss: str, c: float,
                 config: TrainConfig | None = None) -> LinearModel:
    """Fit one linear model at a fixed c.

    Minimizes 0.5*||w||^2 + c*sum(loss_i) from a zero start to within
    config.tol of a stationary point (gradient infinity norm). The bias is
    not regularized. Deterministic for a fixed backend.
    """
    config = config or TrainConfig()
    if len(X) != len(y):
        raise ValidationError(f"{len(X)} vectors for {len(y)} labels")
    for vec in X:
        if vec.space_name != space.name:
            raise ValidationError(
                f"vector from space {vec.space_name!r} in {space.name!r} training"
            )
    y_arr = _label_to_y(y)
    csr = build_csr(X, space.dim)
    return _train_on_csr(csr, y_arr, space.name, loss, c, config)


def _accuracy_from_margins(margin_values: np.ndarray, y: np.ndarray) -> float:
    predicted = np.where(margin_values >= 0.0, 1.0, -1.0)
    return float((predicted == y).mean())


def accuracy(model: LinearModel, X: CsrMatrix, y: np.ndarray) -> float:
    """Fraction of rows whose margin sign matches y (ties count positive)."""
    return _accuracy_from_margins(margins(X, model.weights, model.bias), y)


def _grid_search(train_X: CsrMatrix, train_y: np.ndarray,
                 dev_X: CsrMatrix | None, dev_y: np.ndarray | None,
                 space_name: str, loss: str,
                 config: TrainConfig) -> LinearModel:
    """Pick c by development accuracy; ties go to the smallest c.

    With a single-value grid no development data is needed.
    """
    grid = config.sorted_c_grid
    if len(grid) == 1:
        return _train_on_csr(train_X, train_y, space_name, loss, grid[0], config)
    if dev_X is None or dev_y is None:
        raise ValidationError(
            "grid search over several c values needs a development set"
        )
    best_model = None
    best_acc = -1.0
    for c in grid:
        model = _train_on_csr(train_X, train_y, space_name, loss, c, config)
        acc = accuracy(model, dev_X, dev_y)
        if acc > best_acc:
            best_model, best_acc = model, acc
    return best_model


def _check_disjoint(train_leads: Sequence[AnnotatedLead],
                    dev_leads: Sequence[AnnotatedLead]) -> None:
    overlap = {l.id for l in train_leads} & {l.id for l in dev_leads}
    if overlap:
        raise DataLeakError(
            f"training and development sets share {len(overlap)} lead(s), "
            f"e.g. {sorted(overlap)[0]!r}"
        )


def train_single(train_leads: Sequence[AnnotatedLead],
                 labels: Mapping[str, str],
                 bundle: FeatureBundle,
                 space_name: str,
                 config: TrainConfig | None = None,
                 dev_leads: Sequence[AnnotatedLead] | None = None,
                 ) -> LinearModel:
    """Grid-searched logistic model on one feature space.

    Also serves as one first-layer member of the decision-fusion stack, so
    a model trained here can be passed to train_decision_fusion unchanged.
    """
    config = config or TrainConfig()
    if dev_leads:
        _check_disjoint(train_leads, dev_leads)
    space = bundle.space(space_name)
    train_X = build_csr([bundle.extract_single(l, space_name)
                         for l in train_leads], space.dim)
    train_y = _label_to_y([labels[l.id] for l in train_leads])
    dev_X = dev_y = None
    if dev_leads:
        dev_X = build_csr([bundle.extract_single(l, space_name)
                           for l in dev_leads], space.dim)
        dev_y = _label_to_y([labels[l.id] for l in dev_leads])
    return _grid_search(train_X, train_y, dev_X, dev_y, space_name,
                        LOSS_LOGISTIC, config)


def train_feature_fusion(train_leads: Sequence[AnnotatedLead],
                         labels: Mapping[str, str],
                         bundle: FeatureBundle,
                         config: TrainConfig | None = None,
                         dev_leads: Sequence[AnnotatedLead] | None = None,
                         ) -> LinearModel:
    """Logistic model on the concatenated feature representation.

    A development set is required whenever config.c_grid has more than one
    value (grid search selects by development accuracy).
    """
    config = config or TrainConfig()
    if dev_leads:
        _check_disjoint(train_leads, dev_leads)
    space = bundle.combined_space
    train_X = build_csr([bundle.extract_combined(l) for l in train_leads],
                        space.dim)
    train_y = _label_to_y([labels[l.id] for l in train_leads])
    dev_X = dev_y = None
    if dev_leads:
        dev_X = build_csr([bundle.extract_combined(l) for l in dev_leads],
                          space.dim)
        dev_y = _label_to_y([labels[l.id] for l in dev_leads])
    return _grid_search(train_X, train_y, dev_X, dev_y, space.name,
                        LOSS_LOGISTIC, config)


@dataclass
class FusionModel:
    """Three per-space first-layer models and one second-layer model.

    The second layer scores the vector of the first layer's content-dense
    probabilities, in the fixed order MRC, MI, PR.
    """

    first_layer: dict[str, LinearModel]
    second_layer: LinearModel

    def __post_init__(self):
        if set(self.first_layer) != set(SPACE_ORDER):
            raise ValidationError(
                f"first layer must cover {SPACE_ORDER}, got "
                f"{sorted(self.first_layer)}"
            )
        if self.second_layer.dim != len(self.first_layer):
            raise ValidationError(
                f"second layer dimension {self.second_layer.dim} does not "
                f"match {len(self.first_layer)} first-layer models"
            )

    def meta_vector(self, probs: Mapping[str, float]) -> SparseFeatureVector:
        entries = {META_SPACE.index_of[f"p_{name.lower()}"]: probs[name]
                   for name in SPACE_ORDER}
        return SparseFeatureVector(SPACE_META, entries)

    def decision_margin(self, probs: Mapping[str, float]) -> float:
        return self.second_layer.margin(self.meta_vector(probs))

    def predict_proba(self, probs: Mapping[str, float]) -> float:
        return self.second_layer.predict_proba(self.meta_vector(probs))


def _platt_from_cv(dev_X: CsrMatrix, dev_y: np.ndarray, space_name: str,
                   loss: str, c: float, config: TrainConfig,
                   k: int = 3) -> tuple[float, float]:
    """Calibration margins from an internal split of the development fold.

    The development set is split k ways; each part's margins come from a
    model trained on the other parts, so no margin is scored by a model
    that saw its lead. Falls back to in-sample margins when a split would
    leave a single-class training part.
    """
    n = dev_X.n_rows
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(n)
    parts = [order[i::k] for i in range(k)]
    margin_out = np.zeros(n)
    ok = n >= 2 * k
    if ok:
        for part in parts:
            rest = np.setdiff1d(order, part)
            if len(np.unique(dev_y[rest])) < 2:
                ok = False
                break
            sub = _csr_take(dev_X, rest)
            model = _train_on_csr(sub, dev_y[rest], space_name, loss, c, config)
            margin_out[part] = margins(_csr_take(dev_X, part), model.weights,
                                       model.bias)
    if not ok:
        model = _train_on_csr(dev_X, dev_y, space_name, loss, c, config)
        margin_out = margins(dev_X, model.weights, model.bias)
    return fit_platt_sigmoid(margin_out, dev_y)


def _csr_take(X: CsrMatrix, rows: np.ndarray) -> CsrMatrix:
    """Row-subset of a CSR matrix."""
    counts = np.diff(X.indptr)
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(counts[rows])
    take = np.concatenate(
        [np.arange(X.indptr[r], X.indptr[r + 1]) for r in rows]
    ) if len(rows) else np.zeros(0, dtype=np.int64)
    return CsrMatrix(data=X.data[take], indices=X.indices[take],
                     indptr=indptr, n_rows=len(rows), n_cols=X.n_cols)


def train_decision_fusion(train_leads: Sequence[AnnotatedLead],
                          dev_leads: Sequence[AnnotatedLead],
                          labels: Mapping[str, str],
                          bundle: FeatureBundle,
                          config: TrainConfig | None = None,
                          first_layer: Mapping[str, LinearModel] | None = None,
                          ) -> FusionModel:
    """Two-layer stack: per-space logistic models, then a hinge combiner.

    First-layer models train on ``train_leads`` with c grid-searched by
    development accuracy (pass ``first_layer`` to reuse models already
    trained that way, one per feature space). The second layer trains on
    the development set's three-probability vectors (squared hinge; c by
    its accuracy on those same vectors, ties to smallest c) and carries a
    Platt calibration fit on margins from an internal split of the
    development fold.

    Raises DataLeakError when the two sets share a lead id.
    """
    config = config or TrainConfig()
    if not train_leads or not dev_leads:
        raise ValidationError("both training and development sets are required")
    _check_disjoint(train_leads, dev_leads)
    if first_layer is not None and set(first_layer) != set(SPACE_ORDER):
        raise ValidationError(
            f"first layer must cover {SPACE_ORDER}, got {sorted(first_layer)}"
        )

    first_layer = dict(first_layer) if first_layer is not None else {}
    dev_probs: dict[str, list[float]] = {}
    train_y = _label_to_y([labels[l.id] for l in train_leads])
    dev_y = _label_to_y([labels[l.id] for l in dev_leads])
    for name in SPACE_ORDER:
        space = bundle.space(name)
        dev_vecs = [bundle.extract_single(l, name) for l in dev_leads]
        model = first_layer.get(name)
        if model is None:
            train_X = build_csr([bundle.extract_single(l, name)
                                 for l in train_leads], space.dim)
            dev_X = build_csr(dev_vecs, space.dim)
            model = _grid_search(train_X, train_y, dev_X, dev_y, name,
                                 LOSS_LOGISTIC, config)
            first_layer[name] = model
        elif model.space_name != name:
            raise ValidationError(
                f"first-layer model for {name!r} was trained on "
                f"{model.space_name!r}"
            )
        dev_probs[name] = [model.predict_proba(v) for v in dev_vecs]

    meta_vectors = [
        SparseFeatureVector(SPACE_META,
                            {k: dev_probs[name][i]
                             for k, name in enumerate(SPACE_ORDER)})
        for i in range(len(dev_leads))
    ]
    meta_X = build_csr(meta_vectors, META_SPACE.dim)
    second = _grid_search(meta_X, dev_y, meta_X, dev_y, SPACE_META,
                          LOSS_HINGE, config)
    second.platt = _platt_from_cv(meta_X, dev_y, SPACE_META, LOSS_HINGE,
                                  second.l2_c, config)
    return FusionModel(first_layer=first_layer, second_layer=second)


@dataclass
class LeadClassifier:
    """A trained model bound to its feature bundle; scores raw leads."""

    mode: str
    bundle: FeatureBundle
    model: LinearModel | FusionModel

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        is_fusion = isinstance(self.model, FusionModel)
        if is_fusion != (self.mode == MODE_DECISION_FUSION):
            raise ValidationError(f"model type does not match mode {self.mode!r}")

    def _first_layer_probs(self, lead: AnnotatedLead) -> dict[str, float]:
        return {name: self.model.first_layer[name].predict_proba(
                    self.bundle.extract_single(lead, name))
                for name in SPACE_ORDER}

    def decision_margin(self, lead: AnnotatedLead) -> float:
        if self.mode == MODE_DECISION_FUSION:
            return self.model.decision_margin(self._first_layer_probs(lead))
        if self.mode == MODE_FEATURE_FUSION:
            return self.model.margin(self.bundle.extract_combined(lead))
        name = SINGLE_MODE_SPACE[self.mode]
        return self.model.margin(self.bundle.extract_single(lead, name))

    def predict_proba(self, lead: AnnotatedLead) -> float:
        if self.mode == MODE_DECISION_FUSION:
            return self.model.predict_proba(self._first_layer_probs(lead))
        if self.mode == MODE_FEATURE_FUSION:
            return self.model.predict_proba(self.bundle.extract_combined(lead))
        name = SINGLE_MODE_SPACE[self.mode]
        return self.model.predict_proba(self.bundle.extract_single(lead, name))

    def predict_label(self, lead: AnnotatedLead) -> str:
        return (CONTENT_DENSE if self.decision_margin(lead) >= 0.0
                else NON_CONTENT_DENSE)


def _linear_to_record(model: LinearModel) -> dict:
    return {
        "space_name": model.space_name,
        "loss": model.loss,
        "l2_c": model.l2_c,
        "bias": model.bias,
        "platt": list(model.platt) if model.platt is not None else None,
        "weights": [float(v) for v in model.weights],
    }


def _linear_from_record(rec: dict) -> LinearModel:
    platt = rec.get("platt")
    return LinearModel(
        weights=np.array(rec["weights"], dtype=np.float64),
        bias=float(rec["bias"]),
        space_name=rec["space_name"],
        loss=rec["loss"],
        l2_c=float(rec["l2_c"]),
        platt=tuple(platt) if platt is not None else None,
    )


MODEL_FORMAT = "contentdense-model"
MODEL_VERSION = 1


def classifier_to_record(clf: LeadClassifier) -> dict:
    """Self-describing JSON object: mode, spaces, and model parameters."""
    spaces = {}
    for space in clf.bundle.active_spaces():
        spaces[space.name] = space_to_lines(space)
    rec: dict = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "mode": clf.mode,
        "pr_value": clf.bundle.pr_value,
        "spaces": spaces,
    }
    if isinstance(clf.model, FusionModel):
        rec["first_layer"] = {name: _linear_to_record(m)
                              for name, m in sorted(clf.model.first_layer.items())}
        rec["second_layer"] = _linear_to_record(clf.model.second_layer)
    else:
        rec["model"] = _linear_to_record(clf.model)
    return rec


def classifier_from_record(rec: dict) -> LeadClassifier:
    if rec.get("format") != MODEL_FORMAT:
        raise ValidationError("not a model file (missing format marker)")
    if rec.get("version") != MODEL_VERSION:
        raise ValidationError(f"unsupported model version {rec.get('version')!r}")
    spaces = {name: space_from_lines(lines)
              for name, lines in rec["spaces"].items()}
    bundle = FeatureBundle(
        mrc=spaces.get(SPACE_MRC), mi=spaces.get(SPACE_MI),
        pr=spaces.get(SPACE_PR), pr_value=rec.get("pr_value", "count"),
    )
    mode = rec["mode"]
    if mode == MODE_DECISION_FUSION:
        model: LinearModel | FusionModel = FusionModel(
            first_layer={name: _linear_from_record(m)
                         for name, m in rec["first_layer"].items()},
            second_layer=_linear_from_record(rec["second_layer"]),
        )
    else:
        model = _linear_from_record(rec["model"])
    return LeadClassifier(mode=mode, bundle=bundle, model=model)


def save_classifier(clf: LeadClassifier, path: str | Path) -> None:
    text = json.dumps(classifier_to_record(clf), ensure_ascii=False,
                      separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_classifier(path: str | Path) -> LeadClassifier:
    with Path(path).open("r", encoding="utf-8") as fh:
        return classifier_from_record(json.load(fh))
