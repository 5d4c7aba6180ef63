"""Shared session fixtures: the default background, its small solutions and glued connections."""

import os
from functools import lru_cache

import numpy as np
import pytest

os.environ.setdefault("YMB_CACHE_DIR", os.path.join(os.path.dirname(__file__), ".cache"))

from ymbubble import cli, gluing  # noqa: E402
from ymbubble.config import load_config  # noqa: E402


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def background(cfg):
    return cli.background(cfg)


@pytest.fixture(scope="session")
def fixture_g(cfg, background):
    return cli.fixture_gauge(cfg, background[1])


class Glued:
    """Lazily built small solutions and glued connections for the default fixture."""

    def __init__(self, cfg, background, g):
        self.cfg, self.A0, self.base, self.g = cfg, background[0], background[1], g
        self.small = lru_cache(None)(self._small)
        self.connection = lru_cache(None)(self._connection)

    def _small(self, eps):
        return cli.small_potential(self.cfg, eps, self.A0, self.base)

    def q(self, eps):
        return self.cfg.fixture_q(eps, self.g)

    def _connection(self, eps):
        return gluing.build_glued(self.q(eps), self.small(eps))


@pytest.fixture(scope="session")
def glued(cfg, background, fixture_g):
    return Glued(cfg, background, fixture_g)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store one acceptance line; they are printed together at the end of the run."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
