"""Seeded synthetic flow generator.

Class proportions default to the reference traffic mix. Every attack
class carries a planted threshold rule on one of the dominant timing /
stream features: its rows are guaranteed to exceed the threshold while
benign rows never do, which makes the classes separable by construction
(the hook the surrogate-fidelity tests rely on). All remaining features
are class-conditioned Gaussians with heavy overlap, so they carry only
weak signal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import schema
from .errors import WeightMismatch
from .ingest import Dataset, RawTable, encode

# Reference per-class traffic mix (training-side counts of the dataset
# this mimics). The printed total disagrees with the column sum, so
# weights are normalized by the actual sum to satisfy sum-to-1.
_REFERENCE_COUNTS = {
    "Benign": 1_322_254,
    "BruteForce": 291,
    "DDoS": 165_070,
    "DeviceSpoofing": 70,
    "DoS_MQTT": 250_514,
    "Eavesdropping": 3_525,
    "MITM": 677,
    "SQLInjection": 475,
    "UnauthorizedDataAccess": 207,
}
_REFERENCE_TOTAL = sum(_REFERENCE_COUNTS.values())

DEFAULT_CLASS_WEIGHTS: dict[str, float] = {
    name: count / _REFERENCE_TOTAL for name, count in _REFERENCE_COUNTS.items()
}

# (class, feature, threshold): rows of `class` have `feature` > threshold,
# benign rows never do. Features are the dominant ones in this domain.
DEFAULT_PLANTED_RULES: tuple[tuple[str, str, float], ...] = (
    ("BruteForce", "frame.time_relative", 600.0),
    ("Eavesdropping", "frame.time_relative", 1200.0),
    ("MITM", "frame.time_relative", 1800.0),
    ("DDoS", "tcp.time_relative", 400.0),
    ("SQLInjection", "tcp.time_relative", 900.0),
    ("UnauthorizedDataAccess", "tcp.time_relative", 1400.0),
    ("DoS_MQTT", "tcp.stream", 500_000.0),
    ("DeviceSpoofing", "tcp.stream", 1_200_000.0),
)

# Rough per-feature location/scale so the CSV looks like flow data.
_BASE_PROFILES: dict[str, tuple[float, float]] = {
    "http.request": (0.5, 0.5),
    "tcp.dstport": (8000.0, 2500.0),
    "tcp.srcport": (32000.0, 9000.0),
    "tcp.port": (20000.0, 8000.0),
    "tcp.time_delta": (0.05, 0.02),
    "tcp.time_relative": (250.0, 60.0),
    "tcp.reassembled.length": (900.0, 300.0),
    "tcp.segments": (3.0, 1.0),
    "tcp.analysis.ack_rtt": (0.02, 0.008),
    "tcp.flags": (18.0, 6.0),
    "tcp.urgent_pointer": (0.0, 0.5),
    "tcp.stream": (100_000.0, 30_000.0),
    "tcp.len": (400.0, 140.0),
    "tcp.seq": (52_000.0, 15_000.0),
    "tcp.ack": (48_000.0, 15_000.0),
    "tcp.ack_raw": (2_100_000_000.0, 400_000_000.0),
    "tcp.window_size": (65_000.0, 9_000.0),
    "tcp.window_size.1": (64.0, 18.0),
    "udp.port": (5000.0, 1800.0),
    "udp.length": (120.0, 40.0),
    "ip.proto": (6.0, 2.0),
    "ip.ttl": (64.0, 12.0),
    "ip.fragments": (0.0, 0.4),
    "ip.flags.mf": (0.0, 0.3),
    "ip.flags.df": (1.0, 0.3),
    "ip.len": (520.0, 160.0),
    "frame.time_delta": (0.04, 0.015),
    "frame.time_relative": (300.0, 70.0),
}

_URI_VOCAB = ("/", "/admin", "/api/v1/data", "/index.html", "/login",
              "/mqtt/connect", "/static/app.js")

# Fraction of the band kept clear of its edges; guarantees the planted
# inequality holds for every generated row.
_BAND_MARGIN = 0.02
_BAND_SIGMA_FRACTION = 0.05  # noise sigma as fraction of the band gap


@dataclass
class SynthConfig:
    total_records: int
    seed: int = 0
    class_weights: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_CLASS_WEIGHTS))
    planted_rules: tuple[tuple[str, str, float], ...] = DEFAULT_PLANTED_RULES

    def validate(self) -> None:
        if self.total_records < schema.N_CLASSES:
            raise ValueError("total_records must cover at least one row per class")
        total_weight = sum(self.class_weights.values())
        if abs(total_weight - 1.0) > 1e-9:
            raise WeightMismatch(f"class weights sum to {total_weight!r}, expected 1.0")
        for name in self.class_weights:
            schema.class_code(name)
        for cls, feature, _ in self.planted_rules:
            schema.class_code(cls)
            if feature not in schema.FEATURE_INDEX:
                raise ValueError(f"planted rule on unknown feature {feature!r}")


def class_counts(cfg: SynthConfig) -> dict[str, int]:
    """round(weight*total) per class; the rounding remainder lands on Benign."""
    counts = {
        name: int(np.floor(cfg.class_weights.get(name, 0.0) * cfg.total_records + 0.5))
        for name in schema.CLASS_NAMES
    }
    remainder = cfg.total_records - sum(counts.values())
    counts["Benign"] += remainder
    if counts["Benign"] < 0:
        raise WeightMismatch("weights leave no room for Benign remainder")
    return counts


def _band_layout(rules) -> dict[str, list[tuple[str, float, float]]]:
    """Per planted feature: (class, low, high) bands between thresholds."""
    per_feature: dict[str, list[tuple[str, float]]] = {}
    for cls, feature, threshold in rules:
        per_feature.setdefault(feature, []).append((cls, float(threshold)))
    layout = {}
    for feature, pairs in per_feature.items():
        pairs.sort(key=lambda p: p[1])
        thresholds = [t for _, t in pairs]
        gaps = np.diff(thresholds)
        top_gap = float(gaps[-1]) if len(gaps) else thresholds[0]
        bands = []
        for i, (cls, t) in enumerate(pairs):
            hi = pairs[i + 1][1] if i + 1 < len(pairs) else t + top_gap
            bands.append((cls, t, hi))
        layout[feature] = bands
    return layout


def generate_table(cfg: SynthConfig) -> RawTable:
    """Produce the raw string table (CSV view) for `cfg`, seeded."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    counts = class_counts(cfg)
    layout = _band_layout(cfg.planted_rules)
    planted_features = set(layout)

    # Weak per-(class, feature) mean offsets: at most 0.3 sigma, so no
    # single background feature separates the classes on its own.
    offsets = rng.uniform(-0.3, 0.3, size=(schema.N_CLASSES, schema.N_FEATURES))
    uri_tilt = rng.dirichlet(np.full(len(_URI_VOCAB), 8.0), size=schema.N_CLASSES)
    http_p = rng.uniform(0.2, 0.8, size=schema.N_CLASSES)

    rows: list[list[str]] = []
    labels: list[str] = []
    for name in schema.CLASS_NAMES:
        n = counts[name]
        if n == 0:
            continue
        code = schema.class_code(name)
        x = np.empty((n, schema.N_FEATURES), dtype=np.float64)
        for j, feat in enumerate(schema.FEATURES):
            if feat.kind == "categorical":
                continue
            base_mean, base_scale = _BASE_PROFILES[feat.name]
            if feat.name in planted_features:
                band = next((b for b in layout[feat.name] if b[0] == name), None)
                if band is not None:
                    _, lo, hi = band
                    gap = hi - lo
                    margin = _BAND_MARGIN * gap
                    vals = rng.normal((lo + hi) / 2.0, _BAND_SIGMA_FRACTION * gap, n)
                    x[:, j] = np.clip(vals, lo + margin, hi - margin)
                else:
                    # Benign-level values, held strictly below the lowest
                    # threshold so no foreign rule fires.
                    min_t = layout[feat.name][0][1]
                    vals = rng.normal(base_mean, base_scale, n)
                    x[:, j] = np.clip(vals, None, 0.9 * min_t)
                continue
            if feat.name == "http.request":
                x[:, j] = (rng.random(n) < http_p[code]).astype(np.float64)
                continue
            mean = base_mean + offsets[code, j] * base_scale
            x[:, j] = rng.normal(mean, base_scale, n)

        uris = rng.choice(len(_URI_VOCAB), size=n, p=uri_tilt[code])
        uri_col = schema.FEATURE_INDEX["http.request.uri"]
        for i in range(n):
            row = [""] * schema.N_FEATURES
            for j, feat in enumerate(schema.FEATURES):
                if j == uri_col:
                    row[j] = _URI_VOCAB[uris[i]]
                else:
                    row[j] = repr(float(x[i, j]))
            rows.append(row)
            labels.append(name)

    order = rng.permutation(len(rows))
    rows = [rows[i] for i in order]
    labels = [labels[i] for i in order]
    return RawTable(list(schema.FEATURE_NAMES), rows, labels)


def generate(cfg: SynthConfig) -> Dataset:
    """Encode the generated table into a numeric Dataset."""
    dataset, _ = encode(generate_table(cfg))
    dataset.provenance = "synthetic"
    return dataset


def write_csv(table: RawTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(table.columns) + [schema.LABEL_COLUMN])
        for row, label in zip(table.rows, table.labels):
            writer.writerow(row + [label])
