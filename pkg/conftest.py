# conftest.py
import numpy as np
import pytest

from graphs import generators
from graphs.graph import Graph


@pytest.fixture
def triangle():
    return generators.complete(3)


@pytest.fixture
def star5():
    return generators.star(5)


@pytest.fixture
def path4():
    return generators.path(4)


@pytest.fixture
def weighted_square():
    return Graph.from_edges(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 0, 1.5), (0, 2, 1.0)])


@pytest.fixture
def make_random_graph():
    def _make(n=8, p=0.4, seed=0):
        return generators.random_connected(n, p, seed=seed)

    return _make


@pytest.fixture
def homophilic_sbm():
    """Two 30-node blocks with noisy one-hot features."""
    return generators.sbm([30, 30], 0.3, 0.02, seed=3, feature_noise=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def stub_rq_queue(settings, monkeypatch):
    """Collect enqueue calls instead of talking to redis."""
    settings.RQ_QUEUES = {"default": {"ASYNC": False, "URL": "redis://localhost:6379/0"}}

    class DummyQueue:
        def __init__(self):
            self.jobs = {}
            self.calls = []

        def enqueue(self, func, *args, **kwargs):
            self.calls.append((func, args, kwargs))
            self.jobs[kwargs.get("job_id")] = func
            return None

        def fetch_job(self, job_id):
            return self.jobs.get(job_id)

    queue = DummyQueue()
    monkeypatch.setattr("django_rq.get_queue", lambda name="default", **kw: queue)
    return queue
