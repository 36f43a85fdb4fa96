import itertools

import numpy as np
import pytest

from qnes.ansatz import AmplitudeModel


def hidden_sum_psi(model: AmplitudeModel, x) -> complex:
    """psi(x) by explicit summation over every hidden configuration z."""
    x = np.asarray(x, dtype=float)
    total = 0j
    for z in itertools.product((1.0, -1.0), repeat=model.m):
        z = np.array(z)
        total += np.exp(z @ (model.W @ x + model.b) + x @ model.c)
    return total


def hidden_sum_score(model: AmplitudeModel, x) -> np.ndarray:
    """d log psi / d theta from the explicit hidden sum (RBM only).

    d psi / dW_ji = sum_z z_j x_i e^{...}, and likewise for b and c, divided
    by psi; flattened in [W, b, c] order.
    """
    x = np.asarray(x, dtype=float)
    psi = 0j
    dW = np.zeros(model.W.shape, dtype=complex)
    db = np.zeros(model.m, dtype=complex)
    for z in itertools.product((1.0, -1.0), repeat=model.m):
        z = np.array(z)
        w = np.exp(z @ (model.W @ x + model.b) + x @ model.c)
        psi += w
        dW += w * np.outer(z, x)
        db += w * z
    return np.concatenate([(dW / psi).ravel(), db / psi, x.astype(complex)])


def random_model(rng, n, m, field="real", architecture="RBM", scale=0.5):
    def draw(*shape):
        a = scale * rng.standard_normal(shape)
        if field == "complex":
            a = a + 1j * scale * rng.standard_normal(shape)
        return a

    v = draw(m) if architecture == "FC" else None
    return AmplitudeModel(architecture, field, W=draw(m, n), b=draw(m), c=draw(n), v=v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
