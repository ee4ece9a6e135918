import numpy as np
import pytest

from koebe_fatou.pipeline import corpus_map
from koebe_fatou.puzzle import assemble_forest, build_invariant_disk
from koebe_fatou.ratmap import classify_postcritical


def _forest(name, depth):
    f = corpus_map(name)
    reports = classify_postcritical(f, budget=3000)
    disk = build_invariant_disk(f, reports)
    return f, assemble_forest(f, disk, depth, reports=reports)


@pytest.fixture(scope="session")
def forest_z2():
    return _forest("z2", 6)


@pytest.fixture(scope="session")
def forest_z2p5():
    return _forest("z2+5", 6)


@pytest.fixture(scope="session")
def forest_mixed():
    return _forest("mixed-cubic", 6)


@pytest.fixture(scope="session")
def forest_mixed_deep():
    return _forest("mixed-cubic", 8)


@pytest.fixture(scope="session")
def forest_super():
    return _forest("mixed-cubic-super", 5)


def square_polyline(n_per_side: int, size: float = 1.0, center: complex = 0.0):
    from koebe_fatou.curves import JordanPolyline

    ts = np.linspace(0.0, size, n_per_side, endpoint=False)
    pts = np.concatenate(
        [ts, size + 1j * ts, size - ts + 1j * size, 1j * (size - ts)]
    )
    return JordanPolyline(pts - (0.5 + 0.5j) * size + center)


def ellipse_polyline(a, b, n, center=0.0):
    from koebe_fatou.curves import JordanPolyline

    th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return JordanPolyline(center + a * np.cos(th) + 1j * b * np.sin(th))
