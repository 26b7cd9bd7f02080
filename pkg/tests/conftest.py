import numpy as np
import pytest

from driftlens.embedding_store import Snapshot
from driftlens.kernels import BACKENDS


def random_snapshot(rng, n=50, dim=8, label="1900", prefix="w", **kw):
    vocab = tuple(f"{prefix}{i}" for i in range(n))
    return Snapshot(label, vocab, rng.standard_normal((n, dim)), **kw)


def random_orthogonal(dim, rng):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return request.param


# One PASS/FAIL line per acceptance criterion, echoed live and again in the summary.
ACCEPTANCE = []


@pytest.fixture
def accept(capsys):
    def report(name, ok, detail):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"{status}  {name}: {detail}"
        ACCEPTANCE.append(line)
        with capsys.disabled():
            print(f"\n[acceptance] {line}")
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
