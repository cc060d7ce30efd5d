import numpy as np
import pytest

from fvclust.manifold import FeasiblePoint, WeightVector, project_tangent


def random_point(rng, n, q, positive_v=True):
    v = WeightVector(rng.uniform(0.5, 2.0, n)) if positive_v else WeightVector.ones(n)
    return FeasiblePoint.from_matrix(rng.standard_normal((n, q)), v)


def random_tangent(rng, x, unit=False):
    V = project_tangent(x, rng.standard_normal(x.X.shape))
    if unit:
        nv = np.linalg.norm(V)
        V = V / nv if nv > 0 else V
    return V


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


class criterion:
    """Context manager recording PASS/FAIL for an acceptance criterion."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.details = []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.details)
        if exc is not None:
            first = str(exc).strip().splitlines()
            detail = (detail + "; " if detail else "") + (first[0] if first else exc_type.__name__)
        ACCEPTANCE[self.number] = f"criterion {self.number:>2} {status}: {self.title}" + (
            f" [{detail}]" if detail else "")
        return False


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
