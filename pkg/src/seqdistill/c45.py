"""C4.5 induction over categorical attributes with a binary class.

Multi-way splits (one branch per observed value), gain-ratio selection with
the usual "gain at least average" guard, pessimistic pruning by subtree
replacement and subtree raising, and conversion of the pruned tree into an
ordered IF-THEN rule list.

Rows are given as a ``(N, L)`` integer matrix of attribute values plus an
``(N,)`` 0/1 label vector.
"""
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import beta

from .errors import FormatError, ValidationError

FORMAT_VERSION = 1
_GAIN_EPS = 1e-12
_PRUNE_TOL = 1e-9


@dataclass
class Leaf:
    cls: int
    support: int
    errors: int


@dataclass
class Node:
    attribute: int
    branches: dict
    default_class: int
    support: int
    errors: int


@dataclass(frozen=True)
class Rule:
    conditions: tuple          # ((attribute, value), ...)
    cls: int
    confidence: float
    support: int = 0

    def matches(self, path):
        return all(path[a] == v for a, v in self.conditions)


@dataclass
class RuleSet:
    rules: list
    default_class: int
    target_dimension: int
    n_layers: int = None

    @property
    def deepest_layer(self):
        """1-based index of the deepest layer any condition tests; 0 when there are no conditions."""
        return max((a + 1 for r in self.rules for a, _ in r.conditions), default=0)

    def __len__(self):
        return len(self.rules)


class SplitScore(NamedTuple):
    gain_ratio: float
    gain: float
    split_info: float
    usable: bool


def entropy(counts):
    """Shannon entropy in bits of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValidationError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValidationError("entropy of an empty count vector is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _contingency(column, labels):
    values, inverse = np.unique(column, return_inverse=True)
    table = np.bincount(inverse * 2 + labels, minlength=2 * len(values)).reshape(-1, 2)
    return values, inverse, table


def gain_ratio(paths, labels, attribute):
    """Gain ratio and raw information gain of splitting the rows on ``attribute``.

    Attributes with fewer than two distinct values among the rows come back
    with ``usable=False`` and zero scores.
    """
    labels = np.asarray(labels, dtype=np.int64)
    column = np.asarray(paths)[:, attribute]
    _, _, table = _contingency(column, labels)
    if len(table) < 2:
        return SplitScore(0.0, 0.0, 0.0, False)
    n = len(labels)
    branch_n = table.sum(axis=1)
    parent = entropy(table.sum(axis=0))
    children = sum(bn / n * entropy(row) for bn, row in zip(branch_n, table))
    gain = float(parent - children)
    split = entropy(branch_n)
    return SplitScore(gain / split, gain, split, True)


def _majority(labels):
    ones = int(labels.sum())
    return int(ones > len(labels) - ones)


def _leaf(labels):
    cls = _majority(labels)
    return Leaf(cls, len(labels), int((labels != cls).sum()))


def _choose(paths, labels, idx):
    scores = {a: gain_ratio(paths[idx], labels[idx], a) for a in range(paths.shape[1])}
    usable = {a: s for a, s in scores.items() if s.usable}
    if not usable:
        return None
    gains = [s.gain for s in usable.values()]
    if max(gains) <= _GAIN_EPS:
        # no single attribute is informative here; splitting on the first usable
        # one still lets deeper splits separate interacting attributes
        return min(usable)
    floor = np.mean(gains) - _GAIN_EPS
    best, best_ratio = None, -1.0
    for a in sorted(usable):
        s = usable[a]
        if s.gain >= floor and s.gain_ratio > best_ratio + _GAIN_EPS:
            best, best_ratio = a, s.gain_ratio
    return best


def _grow(paths, labels, idx, min_cases):
    y = labels[idx]
    leaf = _leaf(y)
    if leaf.errors == 0 or len(idx) < 2 * min_cases:
        return leaf
    attribute = _choose(paths, labels, idx)
    if attribute is None:
        return leaf
    column = paths[idx, attribute]
    branches = {}
    for value in np.unique(column):
        branches[int(value)] = _grow(paths, labels, idx[column == value], min_cases)
    return Node(attribute, branches, leaf.cls, leaf.support, leaf.errors)


def _rows(rows):
    if hasattr(rows, "paths"):
        return np.asarray(rows.paths, dtype=np.int64), np.asarray(rows.labels, dtype=np.int64)
    paths, labels = rows
    return np.asarray(paths, dtype=np.int64), np.asarray(labels, dtype=np.int64)


def build_tree(rows, min_cases=2):
    """Grow an unpruned tree from a PathDataset (or a ``(paths, labels)`` pair).

    A node becomes a leaf when it is pure, has fewer than ``2 * min_cases``
    rows, or no attribute takes two values in it. Otherwise it splits on the
    attribute with the highest gain ratio among those whose gain is at least
    the mean gain; ties go to the lowest column.
    """
    paths, labels = _rows(rows)
    if len(labels) == 0:
        raise ValidationError("cannot build a tree from zero rows")
    return _grow(paths, labels, np.arange(len(labels)), min_cases)


def pessimistic_errors(n, e, confidence=0.25):
    """``n`` times the upper ``confidence`` binomial limit on the error rate ``e / n``."""
    if n <= 0:
        return 0.0
    if e >= n:
        return float(n)
    return float(n * beta.ppf(1.0 - confidence, e + 1, n - e))


def _estimate(node, paths, labels, idx, cf):
    """Re-fit node statistics to rows ``idx`` and return the subtree's pessimistic error."""
    y = labels[idx]
    if isinstance(node, Leaf):
        node.support = len(idx)
        node.errors = int((y != node.cls).sum())
        return pessimistic_errors(node.support, node.errors, cf)
    leaf = _leaf(y)
    node.default_class, node.support, node.errors = leaf.cls, leaf.support, leaf.errors
    column = paths[idx, node.attribute]
    total = 0.0
    seen = np.zeros(len(idx), dtype=bool)
    for value, child in node.branches.items():
        mask = column == value
        seen |= mask
        total += _estimate(child, paths, labels, idx[mask], cf)
    if not seen.all():
        unseen = y[~seen]
        total += pessimistic_errors(len(unseen), int((unseen != node.default_class).sum()), cf)
    return total


def _copy(node):
    if isinstance(node, Leaf):
        return Leaf(node.cls, node.support, node.errors)
    return Node(node.attribute, {v: _copy(c) for v, c in node.branches.items()},
                node.default_class, node.support, node.errors)


def _prune(node, paths, labels, idx, cf):
    if isinstance(node, Leaf):
        return node, _estimate(node, paths, labels, idx, cf)
    column = paths[idx, node.attribute]
    for value in list(node.branches):
        node.branches[value], _ = _prune(node.branches[value], paths, labels,
                                         idx[column == value], cf)
    subtree_est = _estimate(node, paths, labels, idx, cf)
    leaf = _leaf(labels[idx])
    leaf_est = pessimistic_errors(leaf.support, leaf.errors, cf)

    counts = {v: int((column == v).sum()) for v in node.branches}
    top = min(counts, key=lambda v: (-counts[v], v))
    raised = _copy(node.branches[top])
    raised_est = _estimate(raised, paths, labels, idx, cf)

    if leaf_est <= subtree_est + _PRUNE_TOL and leaf_est <= raised_est + _PRUNE_TOL:
        return leaf, leaf_est
    if isinstance(raised, Node) and raised_est <= subtree_est + _PRUNE_TOL:
        return _prune(raised, paths, labels, idx, cf)
    return node, subtree_est


def prune_tree(tree, rows, confidence=0.25):
    """Pessimistic pruning, bottom-up, on a copy of ``tree``.

    Each subtree is replaced by a leaf, or by its most-used branch, when the
    replacement's pessimistic error is no larger than the subtree's.
    """
    paths, labels = _rows(rows)
    pruned, _ = _prune(_copy(tree), paths, labels, np.arange(len(labels)), confidence)
    return pruned


def tree_error_estimate(tree, rows, confidence=0.25):
    paths, labels = _rows(rows)
    return _estimate(_copy(tree), paths, labels, np.arange(len(labels)), confidence)


def count_nodes(tree):
    if isinstance(tree, Leaf):
        return 1
    return 1 + sum(count_nodes(c) for c in tree.branches.values())


def count_leaves(tree):
    if isinstance(tree, Leaf):
        return 1
    return sum(count_leaves(c) for c in tree.branches.values())


def tree_classify(tree, path):
    node = tree
    while isinstance(node, Node):
        child = node.branches.get(int(path[node.attribute]))
        if child is None:
            return node.default_class
        node = child
    return node.cls


def tree_to_rules(tree, target_dimension=0, n_layers=None):
    """One rule per root-to-leaf path, most confident (then best supported) first."""
    if isinstance(tree, Leaf):
        return RuleSet([], tree.cls, target_dimension, n_layers)
    rules = []

    def walk(node, conds):
        if isinstance(node, Leaf):
            conf = 1.0 - node.errors / node.support if node.support else 0.0
            rules.append(Rule(tuple(conds), node.cls, conf, node.support))
            return
        for value in sorted(node.branches):
            walk(node.branches[value], conds + [(node.attribute, value)])

    walk(tree, [])
    rules.sort(key=lambda r: (-r.confidence, -r.support))
    return RuleSet(rules, tree.default_class, target_dimension, n_layers)


def classify(rs, path):
    """Class of the first rule whose conditions all hold, else the default class."""
    for rule in rs.rules:
        if rule.matches(path):
            return rule.cls
    return rs.default_class


def induce(pd, min_cases=2, confidence=0.25, prune=True):
    """Build (and by default prune) a tree for a PathDataset; returns ``(tree, ruleset)``."""
    tree = build_tree(pd, min_cases)
    if prune:
        tree = prune_tree(tree, pd, confidence)
    return tree, tree_to_rules(tree, pd.target_dimension, pd.n_layers)


def format_rule(rule, names=None):
    def name(a):
        return names[a] if names else f"layer{a + 1}"

    cond = " AND ".join(f"{name(a)}={v}" for a, v in rule.conditions)
    return f"IF {cond} THEN {rule.cls} [conf {rule.confidence:.2f}]"


def ruleset_to_dict(rs):
    return {
        "target_dimension": int(rs.target_dimension),
        "default_class": int(rs.default_class),
        "n_layers": rs.n_layers,
        "rules": [
            {"conditions": [[f"layer{a + 1}", int(v)] for a, v in r.conditions],
             "class": int(r.cls), "confidence": float(r.confidence), "support": int(r.support)}
            for r in rs.rules
        ],
    }


def _attr_index(name):
    if not (isinstance(name, str) and name.startswith("layer") and name[5:].isdigit()):
        raise FormatError(f"bad attribute name {name!r}")
    return int(name[5:]) - 1


def ruleset_from_dict(doc):
    try:
        rules = [
            Rule(tuple((_attr_index(a), int(v)) for a, v in r["conditions"]),
                 int(r["class"]), float(r["confidence"]), int(r.get("support", 0)))
            for r in doc["rules"]
        ]
        return RuleSet(rules, int(doc["default_class"]), int(doc["target_dimension"]),
                       doc.get("n_layers"))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed ruleset record: {exc}") from exc


def dumps_rulesets(rulesets, metadata=None):
    doc = {"format_version": FORMAT_VERSION, "kind": "rulesets",
           "rulesets": [ruleset_to_dict(rs) for rs in rulesets],
           "metadata": metadata or {}}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def loads_rulesets(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"ruleset file is not JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "rulesets":
        raise FormatError("not a ruleset file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    return [ruleset_from_dict(d) for d in doc["rulesets"]]
