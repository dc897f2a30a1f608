"""Fixed 29-column flow feature schema and the 9-class label codebook.

Feature ordering is frozen: the same index means the same feature in the
CSV loader, the scaler, the model embeddings, the attribution vectors and
the extracted rules.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    layer: str  # one of HTTP, TCP, UDP, IP, Frame
    kind: str   # "numeric" | "categorical"


# Canonical 29-feature schema. Column order is load-bearing everywhere.
FEATURES: tuple[FeatureDescriptor, ...] = (
    FeatureDescriptor("http.request.uri", "HTTP", "categorical"),
    FeatureDescriptor("http.request", "HTTP", "numeric"),
    FeatureDescriptor("tcp.dstport", "TCP", "numeric"),
    FeatureDescriptor("tcp.srcport", "TCP", "numeric"),
    FeatureDescriptor("tcp.port", "TCP", "numeric"),
    FeatureDescriptor("tcp.time_delta", "TCP", "numeric"),
    FeatureDescriptor("tcp.time_relative", "TCP", "numeric"),
    FeatureDescriptor("tcp.reassembled.length", "TCP", "numeric"),
    FeatureDescriptor("tcp.segments", "TCP", "numeric"),
    FeatureDescriptor("tcp.analysis.ack_rtt", "TCP", "numeric"),
    FeatureDescriptor("tcp.flags", "TCP", "numeric"),
    FeatureDescriptor("tcp.urgent_pointer", "TCP", "numeric"),
    FeatureDescriptor("tcp.stream", "TCP", "numeric"),
    FeatureDescriptor("tcp.len", "TCP", "numeric"),
    FeatureDescriptor("tcp.seq", "TCP", "numeric"),
    FeatureDescriptor("tcp.ack", "TCP", "numeric"),
    FeatureDescriptor("tcp.ack_raw", "TCP", "numeric"),
    FeatureDescriptor("tcp.window_size", "TCP", "numeric"),
    FeatureDescriptor("tcp.window_size.1", "TCP", "numeric"),
    FeatureDescriptor("udp.port", "UDP", "numeric"),
    FeatureDescriptor("udp.length", "UDP", "numeric"),
    FeatureDescriptor("ip.proto", "IP", "numeric"),
    FeatureDescriptor("ip.ttl", "IP", "numeric"),
    FeatureDescriptor("ip.fragments", "IP", "numeric"),
    FeatureDescriptor("ip.flags.mf", "IP", "numeric"),
    FeatureDescriptor("ip.flags.df", "IP", "numeric"),
    FeatureDescriptor("ip.len", "IP", "numeric"),
    FeatureDescriptor("frame.time_delta", "Frame", "numeric"),
    FeatureDescriptor("frame.time_relative", "Frame", "numeric"),
)

N_FEATURES = len(FEATURES)

FEATURE_NAMES: tuple[str, ...] = tuple(f.name for f in FEATURES)
FEATURE_INDEX: dict[str, int] = {f.name: i for i, f in enumerate(FEATURES)}
CATEGORICAL_FEATURES: tuple[str, ...] = tuple(
    f.name for f in FEATURES if f.kind == "categorical"
)

# Class codebook: Benign is 0, attack classes follow in lexicographic order.
CLASS_NAMES: tuple[str, ...] = (
    "Benign",
    "BruteForce",
    "DDoS",
    "DeviceSpoofing",
    "DoS_MQTT",
    "Eavesdropping",
    "MITM",
    "SQLInjection",
    "UnauthorizedDataAccess",
)

N_CLASSES = len(CLASS_NAMES)

CLASS_CODE: dict[str, int] = {name: i for i, name in enumerate(CLASS_NAMES)}

# Display order for per-class reports: attack classes first, Benign last.
REPORT_CLASS_ORDER: tuple[int, ...] = tuple(range(1, N_CLASSES)) + (0,)

LABEL_COLUMN = "label"


def class_name(code: int) -> str:
    return CLASS_NAMES[code]


def class_code(name: str) -> int:
    try:
        return CLASS_CODE[name]
    except KeyError:
        raise ValueError(f"unknown class label {name!r}") from None
