"""Batch certification, certified-accuracy curves, and dataset/CSV I/O."""

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_alpha, check_count, check_k, check_method, check_positive
from .predict import predict_topk
from .radius import DEFAULT_MU, certify
from .smoothing import GENERATOR_NAME, NoiseModel, SyntheticTabularClassifier

DEFAULT_GRID = tuple(round(0.05 * i, 2) for i in range(41))
DEFAULT_RHO = 0.001

CERTIFY_COLUMNS = ("example_id", "true_label", "abstained", "radius_lower", "best_t", "n", "method")
PREDICT_COLUMNS = ("example_id", "true_label", "abstained", "predicted_labels", "pvalues", "n")
CURVE_COLUMNS = ("radius", "approx_certified_topk_accuracy", "lemma8_lower_bound")


def check_grid(grid):
    grid = [float(r) for r in grid]
    if not grid:
        raise ValueError("radius grid is empty")
    if any(not (math.isfinite(r) and r >= 0) for r in grid):
        raise ValueError("radius grid entries must be finite and non-negative")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("radius grid must be sorted ascending")
    return tuple(grid)


@dataclass(frozen=True)
class EvaluationConfig:
    sigma: float = 0.5
    k: int = 3
    n: int = 100_000
    alpha: float = 0.001
    mu: float = DEFAULT_MU
    method: str = "simuem"
    seed: int = 0
    grid: tuple = DEFAULT_GRID
    rho: float = DEFAULT_RHO
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sigma", check_positive(self.sigma, "sigma"))
        check_count(self.k, "k")
        check_count(self.n, "n")
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        object.__setattr__(self, "mu", check_positive(self.mu, "mu"))
        object.__setattr__(self, "method", check_method(self.method))
        check_count(self.seed, "seed", minimum=0)
        object.__setattr__(self, "grid", check_grid(self.grid))
        object.__setattr__(self, "rho", check_alpha(self.rho, "rho"))
        check_count(self.workers, "workers")

    def metadata(self):
        return {
            "sigma": self.sigma,
            "k": self.k,
            "n": self.n,
            "alpha": self.alpha,
            "mu": self.mu,
            "bound_method": self.method,
            "seed": self.seed,
            "rho": self.rho,
            "generator": GENERATOR_NAME,
        }


@dataclass(frozen=True)
class Dataset:
    """Examples for a :class:`SyntheticTabularClassifier`.

    ``true_labels`` entries are ``None`` where the file gives no label.
    """

    probabilities: np.ndarray
    ids: tuple
    true_labels: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def label_count(self):
        return self.probabilities.shape[1]

    def __len__(self):
        return len(self.ids)

    def classifier(self, sigma):
        return SyntheticTabularClassifier(self.probabilities, sigma=sigma)

    def select(self, ids):
        wanted = [str(i) for i in ids]
        index = {example_id: j for j, example_id in enumerate(self.ids)}
        missing = [i for i in wanted if i not in index]
        if missing:
            raise KeyError(f"unknown example ids: {', '.join(missing)}")
        rows = [index[i] for i in wanted]
        return Dataset(
            self.probabilities[rows],
            tuple(self.ids[j] for j in rows),
            tuple(self.true_labels[j] for j in rows),
            dict(self.metadata),
        )


def dataset_from_dict(data):
    try:
        c = int(data["label_count"])
        examples = data["examples"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"dataset needs 'label_count' and 'examples': {exc}") from None
    if not examples:
        raise ValueError("dataset has no examples")
    ids, labels, rows = [], [], []
    for j, example in enumerate(examples):
        row = [float(p) for p in example["probabilities"]]
        if len(row) != c:
            raise ValueError(f"example {j} has {len(row)} probabilities, expected {c}")
        label = example.get("true_label")
        if label is not None:
            label = int(label)
            if not 0 <= label < c:
                raise ValueError(f"example {j} true_label {label} outside 0..{c - 1}")
        ids.append(str(example.get("id", j)))
        labels.append(label)
        rows.append(row)
    if len(set(ids)) != len(ids):
        raise ValueError("example ids must be unique")
    probabilities = np.array(rows)
    SyntheticTabularClassifier(probabilities)  # validates rows
    return Dataset(probabilities, tuple(ids), tuple(labels), dict(data.get("metadata", {})))


def load_dataset(path):
    path = Path(path)
    try:
        with path.open() as fh:
            data = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read dataset {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"dataset {path} is not valid JSON: {exc}") from exc
    return dataset_from_dict(data)


def save_dataset(dataset, path):
    data = {
        "label_count": dataset.label_count,
        "metadata": dataset.metadata,
        "examples": [
            {"id": i, "true_label": label, "probabilities": row.tolist()}
            for i, label, row in zip(dataset.ids, dataset.true_labels, dataset.probabilities)
        ],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def example_seed(seed, index):
    """Per-example seed derived from the run seed, independent of scheduling."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint32)[0])


def certified_accuracy_curve(results, grid=DEFAULT_GRID, alpha=None, rho=DEFAULT_RHO):
    """Certified top-k accuracy at each radius in ``grid``.

    ``results`` holds ``(certificate, true_label)`` pairs.  An example counts at
    radius ``r`` when its certificate is for the true label, does not abstain,
    and has radius at least ``r``.  With ``alpha`` given, each point also carries
    the high-probability lower bound from :func:`accuracy_lower_bound`.
    Returns a list of ``(r, accuracy, lower_bound_or_None)``.
    """
    results = list(results)
    if not results:
        raise ValueError("no results to summarise")
    grid = check_grid(grid)
    radii = np.array([
        cert.radius if (not cert.abstained and cert.label == truth) else -np.inf
        for cert, truth in results
    ])
    m = radii.size
    curve = []
    for r in grid:
        hits = int(np.count_nonzero(radii >= r))
        bound = accuracy_lower_bound(m, hits, alpha, rho) if alpha is not None else None
        curve.append((r, hits / m, bound))
    accuracies = [a for _, a, _ in curve]
    assert all(b <= a for a, b in zip(accuracies, accuracies[1:])), "curve must be non-increasing"
    return curve


def accuracy_lower_bound(m, approx_count, alpha, rho=DEFAULT_RHO):
    """Lower bound on the true certified accuracy holding with probability ``1 - rho``.

    ``approx_count`` examples were certified, each certificate failing with
    probability at most ``alpha``.  The value may be negative.
    """
    m = check_count(m, "m")
    approx_count = check_count(approx_count, "approx_count", minimum=0)
    if approx_count > m:
        raise ValueError(f"approx_count {approx_count} exceeds m {m}")
    alpha = check_alpha(alpha)
    rho = check_alpha(rho, "rho")
    log_term = math.log(1 / rho)
    a = approx_count / m
    slack = math.sqrt(2 * alpha * (1 - alpha) * log_term / m) + log_term / (3 * m)
    return (a - alpha - slack) / (1 - alpha)


def _certify_one(task):
    probabilities, label, index, config = task
    f = SyntheticTabularClassifier(probabilities[None, :], sigma=config.sigma)
    return certify(
        f, f.example_point(0), label, config.k, NoiseModel(config.sigma), config.n,
        config.alpha, config.mu, config.method, example_seed(config.seed, index),
    )


def _predict_one(task):
    probabilities, index, config = task
    f = SyntheticTabularClassifier(probabilities[None, :], sigma=config.sigma)
    return predict_topk(
        f, f.example_point(0), config.k, NoiseModel(config.sigma), config.n,
        config.alpha, example_seed(config.seed, index),
    )


def _map(func, tasks, workers):
    if workers == 1 or len(tasks) < 2:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _resolve_labels(dataset, label):
    labels = []
    for example_id, truth in zip(dataset.ids, dataset.true_labels):
        chosen = truth if label is None else label
        if chosen is None:
            raise ValueError(f"example {example_id} has no true_label; pass a label to certify")
        labels.append(int(chosen))
    return labels


def certify_dataset(config, dataset, label=None):
    """Certificates for every example, in dataset order.

    Each example certifies its ``true_label`` unless ``label`` overrides it.
    """
    check_k(config.k, dataset.label_count)
    labels = _resolve_labels(dataset, label)
    tasks = [(dataset.probabilities[j], labels[j], j, config) for j in range(len(dataset))]
    return _map(_certify_one, tasks, config.workers)


def predict_dataset(config, dataset):
    check_k(config.k, dataset.label_count)
    tasks = [(dataset.probabilities[j], j, config) for j in range(len(dataset))]
    return _map(_predict_one, tasks, config.workers)


def _fmt(value):
    if value is None:
        return ""
    return repr(float(value))


def certify_rows(dataset, certificates):
    return [
        {
            "example_id": example_id,
            "true_label": "" if truth is None else truth,
            "abstained": int(cert.abstained),
            "radius_lower": _fmt(cert.radius),
            "best_t": cert.best_t,
            "n": cert.n,
            "method": cert.method,
        }
        for example_id, truth, cert in zip(dataset.ids, dataset.true_labels, certificates)
    ]


def predict_rows(dataset, predictions, n):
    return [
        {
            "example_id": example_id,
            "true_label": "" if truth is None else truth,
            "abstained": int(result.abstained),
            "predicted_labels": " ".join(str(i) for i in result.labels),
            "pvalues": " ".join(_fmt(p) for p in result.pvalues),
            "n": n,
        }
        for example_id, truth, result in zip(dataset.ids, dataset.true_labels, predictions)
    ]


def curve_rows(curve):
    return [
        {"radius": _fmt(r), "approx_certified_topk_accuracy": _fmt(a), "lemma8_lower_bound": _fmt(b)}
        for r, a, b in curve
    ]


def format_csv(rows, columns):
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_metadata(path, metadata):
    write_text(Path(str(path) + ".meta.json"), json.dumps(metadata, indent=2, sort_keys=True) + "\n")


def run_batch(config, dataset, out_dir=None):
    """Certify every example and build the accuracy curve.

    Requires a true label on every example.  With ``out_dir`` set, writes
    ``certify.csv``, ``curve.csv`` and their metadata sidecars; identical
    inputs give identical bytes.  Returns ``(certificates, curve)``.
    """
    certificates = certify_dataset(config, dataset)
    curve = certified_accuracy_curve(
        zip(certificates, dataset.true_labels), config.grid, config.alpha, config.rho
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        metadata = config.metadata()
        for name, text in (
            ("certify.csv", format_csv(certify_rows(dataset, certificates), CERTIFY_COLUMNS)),
            ("curve.csv", format_csv(curve_rows(curve), CURVE_COLUMNS)),
        ):
            write_text(out_dir / name, text)
            write_metadata(out_dir / name, metadata)
    return certificates, curve
