import numpy as np
import pytest

from flowxai.classifier import FlowTransformerClassifier
from flowxai.ingest import FlowScaler, stratified_split
from flowxai.synth import SynthConfig, generate

# Populated by tests/test_acceptance.py; echoed after the run so the
# one-line-per-criterion verdicts are visible without -s.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_model():
    """Untrained desk-scale model with seeded weights; enough for shape,
    determinism and gradient tests."""
    clf = FlowTransformerClassifier(d_model=16, n_layers=1, n_heads=2, seed=7)
    clf.init_params(n_features=29)
    return clf


@pytest.fixture(scope="session")
def small_synth_splits():
    """4k synthetic rows split and standardized, shared across tests."""
    data = generate(SynthConfig(total_records=4000, seed=3))
    trainval, test = stratified_split(data, 0.8, seed=1)
    train, val = stratified_split(trainval, 0.8, seed=2)
    scaler = FlowScaler().fit(train.x)
    return {
        "train_x": scaler.transform(train.x), "train_y": train.y,
        "val_x": scaler.transform(val.x), "val_y": val.y,
        "test_x": scaler.transform(test.x), "test_y": test.y,
        "scaler": scaler,
    }


@pytest.fixture(scope="session")
def trained_small_model(small_synth_splits):
    """Desk-scale model trained on the 4k fixture (used where a trained,
    non-degenerate network is needed but the 20k run would be overkill)."""
    s = small_synth_splits
    clf = FlowTransformerClassifier(learning_rate=1e-3, weight_decay=1e-5,
                                    class_weights="capped_inverse_frequency",
                                    max_epochs=8, patience=8, seed=0)
    clf.fit(s["train_x"], s["train_y"], s["val_x"], s["val_y"])
    return clf


def rng_of(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
