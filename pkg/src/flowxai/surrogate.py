"""Depth-limited CART surrogate, rule-clause extraction, and rule metrics.

The tree is trained on the classifier's pseudolabels with greedy Gini
splits; thresholds sit at midpoints of adjacent sorted values, both
children must satisfy the leaf minimum, and all tie-breaks are pinned
(lower feature index, then lower threshold; leaf majority ties go to the
lowest class code) so fitting is fully deterministic.

Every leaf becomes a rule clause: the conjunction of feature-threshold
conditions on its root path, the leaf's class, and the set of test rows
routed to it (the support set). Rule-set metrics over a clause subset:

    coverage   = |union of supports| / n_test
    fidelity   = matching rows within the union / |union|
    redundancy = mean pairwise Jaccard index among the supports
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from . import schema
from .errors import EmptyTrain, TooFewRules


@dataclass
class TreeNode:
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    prediction: int | None = None
    n_samples: int = 0
    leaf_index: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.prediction is not None


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p**2).sum())


def _best_split(x: np.ndarray, y: np.ndarray, n_classes: int,
                min_leaf: int) -> tuple[int, float, float] | None:
    """Best (feature, threshold, weighted_gini) or None if no legal split.

    Within a feature, the lowest qualifying threshold wins Gini ties
    (candidates are swept in ascending order and replaced only on strict
    improvement); across features the lower index wins.
    """
    n = len(y)
    best: tuple[int, float, float] | None = None
    for feature in range(x.shape[1]):
        col = x[:, feature]
        order = np.argsort(col, kind="stable")
        sorted_vals = col[order]
        sorted_y = y[order]

        one_hot = np.zeros((n, n_classes))
        one_hot[np.arange(n), sorted_y] = 1.0
        left_counts = np.cumsum(one_hot, axis=0)
        total_counts = left_counts[-1]

        # Candidate boundary after position i requires a value change and
        # at least min_leaf rows on each side.
        boundary = np.nonzero(sorted_vals[:-1] != sorted_vals[1:])[0]
        boundary = boundary[(boundary + 1 >= min_leaf) & (n - boundary - 1 >= min_leaf)]
        if len(boundary) == 0:
            continue

        lc = left_counts[boundary]
        rc = total_counts - lc
        n_left = (boundary + 1).astype(np.float64)
        n_right = n - n_left
        gini_left = 1.0 - (lc**2).sum(axis=1) / n_left**2
        gini_right = 1.0 - (rc**2).sum(axis=1) / n_right**2
        weighted = (n_left * gini_left + n_right * gini_right) / n

        pos = int(np.argmin(weighted))  # first minimum -> lowest threshold
        gini = float(weighted[pos])
        i = boundary[pos]
        threshold = float((sorted_vals[i] + sorted_vals[i + 1]) / 2.0)
        if best is None or gini < best[2]:
            best = (feature, threshold, gini)
    return best


def _majority(y: np.ndarray, n_classes: int) -> int:
    counts = np.bincount(y, minlength=n_classes)
    return int(np.argmax(counts))  # argmax ties -> lowest class code


class SurrogateTreeClassifier(BaseEstimator, ClassifierMixin):
    """Greedy Gini CART with a depth limit and a minimum leaf size."""

    def __init__(self, max_depth: int = 4, min_samples_leaf: int = 40,
                 n_classes: int = schema.N_CLASSES):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.n_classes = n_classes

    def fit(self, x: np.ndarray, y: np.ndarray):
        if self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("max_depth and min_samples_leaf must be >= 1")
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if len(x) == 0:
            raise EmptyTrain("empty training set")
        if len(x) != len(y):
            raise ValueError(f"{len(x)} rows vs {len(y)} pseudolabels")
        self.n_features_in_ = x.shape[1]
        self.root_ = self._build(x, y, depth=0)
        self.leaves_ = []
        self._index_leaves(self.root_)
        return self

    def _build(self, x: np.ndarray, y: np.ndarray, depth: int) -> TreeNode:
        counts = np.bincount(y, minlength=self.n_classes)
        if depth >= self.max_depth or _gini(counts) == 0.0:
            return TreeNode(prediction=_majority(y, self.n_classes), n_samples=len(y))
        split = _best_split(x, y, self.n_classes, self.min_samples_leaf)
        if split is None:
            return TreeNode(prediction=_majority(y, self.n_classes), n_samples=len(y))
        feature, threshold, _ = split
        mask = x[:, feature] <= threshold
        return TreeNode(
            feature=feature,
            threshold=threshold,
            left=self._build(x[mask], y[mask], depth + 1),
            right=self._build(x[~mask], y[~mask], depth + 1),
            n_samples=len(y),
        )

    def _index_leaves(self, node: TreeNode) -> None:
        # Pre-order, left first: stable leaf numbering for tie-breaks.
        if node.is_leaf:
            node.leaf_index = len(self.leaves_)
            self.leaves_.append(node)
            return
        self._index_leaves(node.left)
        self._index_leaves(node.right)

    def _check_fitted(self):
        if not hasattr(self, "root_"):
            raise NotFittedError("SurrogateTreeClassifier is not fitted")

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index for every row."""
        self._check_fitted()
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(len(x), dtype=np.int64)
        for i, row in enumerate(x):
            node = self.root_
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.leaf_index
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        leaf_pred = np.array([leaf.prediction for leaf in self.leaves_])
        return leaf_pred[self.apply(x)]

    def depth(self) -> int:
        self._check_fitted()

        def walk(node: TreeNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root_)

    def to_dict(self) -> dict:
        self._check_fitted()

        def walk(node: TreeNode) -> dict:
            if node.is_leaf:
                return {"leaf_index": node.leaf_index,
                        "prediction": int(node.prediction),
                        "n_samples": int(node.n_samples)}
            return {"feature": int(node.feature),
                    "threshold": float(node.threshold),
                    "n_samples": int(node.n_samples),
                    "left": walk(node.left),
                    "right": walk(node.right)}

        return {"max_depth": self.max_depth,
                "min_samples_leaf": self.min_samples_leaf,
                "n_classes": self.n_classes,
                "root": walk(self.root_)}

    @classmethod
    def from_dict(cls, payload: dict) -> "SurrogateTreeClassifier":
        tree = cls(max_depth=payload["max_depth"],
                   min_samples_leaf=payload["min_samples_leaf"],
                   n_classes=payload["n_classes"])

        def walk(d: dict) -> TreeNode:
            if "prediction" in d:
                return TreeNode(prediction=d["prediction"],
                                n_samples=d["n_samples"],
                                leaf_index=d["leaf_index"])
            return TreeNode(feature=d["feature"], threshold=d["threshold"],
                            n_samples=d["n_samples"],
                            left=walk(d["left"]), right=walk(d["right"]))

        tree.root_ = walk(payload["root"])
        tree.leaves_ = []
        tree._index_leaves(tree.root_)
        return tree


# -- rule clauses ---------------------------------------------------------------


@dataclass
class RuleClause:
    conditions: list[tuple[str, str, float]]  # (feature_name, "<=" or ">", threshold)
    predicted_class: int
    leaf_index: int
    support: frozenset[int] = field(default_factory=frozenset)
    train_count: int = 0

    def matches(self, row: np.ndarray, feature_index=schema.FEATURE_INDEX) -> bool:
        for name, op, threshold in self.conditions:
            value = row[feature_index[name]]
            ok = value <= threshold if op == "<=" else value > threshold
            if not ok:
                return False
        return True

    def render(self, decimals: int = 4) -> str:
        cls = schema.class_name(self.predicted_class)
        if not self.conditions:
            return f"class({cls}) :- true"
        conds = ", ".join(f"{name} {op} {threshold:.{decimals}f}"
                          for name, op, threshold in self.conditions)
        return f"class({cls}) :- {conds}"

    def to_dict(self) -> dict:
        return {
            "class": schema.class_name(self.predicted_class),
            "leaf_index": self.leaf_index,
            "conditions": [{"feature": n, "op": o, "threshold": t}
                           for n, o, t in self.conditions],
            "support_size": len(self.support),
            "train_count": self.train_count,
        }


@dataclass
class RuleSetMetrics:
    coverage: float
    fidelity: float
    redundancy: float
    n_rules: int
    n_rules_nonzero_support: int

    def to_dict(self) -> dict:
        return {"coverage": self.coverage, "fidelity": self.fidelity,
                "redundancy": self.redundancy, "n_rules": self.n_rules,
                "n_rules_nonzero_support": self.n_rules_nonzero_support}


def _clauses_from_tree(tree: SurrogateTreeClassifier,
                       feature_names) -> list[RuleClause]:
    clauses: list[RuleClause] = []

    def walk(node: TreeNode, path: list[tuple[str, str, float]]):
        if node.is_leaf:
            clauses.append(RuleClause(conditions=list(path),
                                      predicted_class=node.prediction,
                                      leaf_index=node.leaf_index,
                                      train_count=node.n_samples))
            return
        name = feature_names[node.feature]
        walk(node.left, path + [(name, "<=", node.threshold)])
        walk(node.right, path + [(name, ">", node.threshold)])

    walk(tree.root_, [])
    clauses.sort(key=lambda c: c.leaf_index)
    return clauses


def rule_set_metrics(rules: list[RuleClause], model_preds: np.ndarray,
                     n_test: int) -> RuleSetMetrics:
    """Metrics for an arbitrary clause subset against the model predictions."""
    model_preds = np.asarray(model_preds, dtype=np.int64)
    covered: set[int] = set()
    matches = 0
    for rule in rules:
        covered.update(rule.support)
        matches += sum(1 for i in rule.support
                       if model_preds[i] == rule.predicted_class)
    coverage = len(covered) / n_test if n_test else 0.0
    fidelity = matches / len(covered) if covered else 0.0

    supports = [rule.support for rule in rules]
    pair_scores = []
    for a in range(len(supports)):
        for b in range(a + 1, len(supports)):
            union = supports[a] | supports[b]
            if union:
                pair_scores.append(len(supports[a] & supports[b]) / len(union))
            else:
                pair_scores.append(0.0)
    redundancy = float(np.mean(pair_scores)) if pair_scores else 0.0
    return RuleSetMetrics(
        coverage=coverage,
        fidelity=fidelity,
        redundancy=redundancy,
        n_rules=len(rules),
        n_rules_nonzero_support=sum(1 for r in rules if r.support),
    )


def extract_rules(tree: SurrogateTreeClassifier, x_test: np.ndarray,
                  model_preds: np.ndarray,
                  feature_names=schema.FEATURE_NAMES
                  ) -> tuple[list[RuleClause], RuleSetMetrics]:
    """One clause per leaf with its test support; fidelity is measured
    against the classifier's test predictions, not ground truth."""
    tree._check_fitted()
    model_preds = np.asarray(model_preds, dtype=np.int64)
    if len(x_test) != len(model_preds):
        raise ValueError("x_test and model_preds lengths differ")

    clauses = _clauses_from_tree(tree, feature_names)
    leaf_of_row = tree.apply(x_test)
    for clause in clauses:
        clause.support = frozenset(np.nonzero(leaf_of_row == clause.leaf_index)[0].tolist())
    metrics = rule_set_metrics(clauses, model_preds, len(x_test))
    return clauses, metrics


def pruning_curve(rules: list[RuleClause], model_preds: np.ndarray,
                  n_test: int) -> list[tuple[int, float, float]]:
    """(k, coverage, fidelity) for prefixes of the support-ordered rules.

    Rules are added in descending support size; ties keep the lower leaf
    index first.
    """
    model_preds = np.asarray(model_preds, dtype=np.int64)
    ordered = sorted(rules, key=lambda r: (-len(r.support), r.leaf_index))
    curve = []
    covered: set[int] = set()
    matches = 0
    for k, rule in enumerate(ordered, start=1):
        covered.update(rule.support)
        matches += sum(1 for i in rule.support
                       if model_preds[i] == rule.predicted_class)
        coverage = len(covered) / n_test if n_test else 0.0
        fidelity = matches / len(covered) if covered else 0.0
        curve.append((k, coverage, fidelity))
    return curve


def prune_least_supported(rules: list[RuleClause]) -> list[RuleClause]:
    """Drop exactly the rule with minimal support (tie: higher leaf index)."""
    if len(rules) < 2:
        raise TooFewRules("need at least 2 rules to prune")
    victim = min(rules, key=lambda r: (len(r.support), -r.leaf_index))
    return [r for r in rules if r is not victim]


def rules_to_json(rules: list[RuleClause], metrics: RuleSetMetrics,
                  path: str | Path) -> None:
    payload = {"rules": [r.to_dict() for r in rules], "metrics": metrics.to_dict()}
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2))


def rules_to_text(rules: list[RuleClause], path: str | Path) -> None:
    lines = [f"[{r.leaf_index:>2}] (support={len(r.support)}) {r.render()}"
             for r in rules]
    Path(path).write_text("\n".join(lines) + "\n")
