import pytest

from proxyforecast.base import Forecaster


class ProbeForecaster(Forecaster):
    """Records when each originating round's proxy and outcome arrive."""

    def __init__(self, spaces, origin_of):
        self.spaces = spaces
        self.origin_of = origin_of  # maps (kind, instance, proxy[, outcome]) events to origin rounds
        self.t = 1
        self.log = []
        self.proxies = []
        self.outcomes = []

    def predict(self, instance):
        self.log.append(("predict", self.t))
        return [1.0 / self.spaces.n_outcomes] * self.spaces.n_outcomes

    def observe_proxy(self, instance, proxy):
        self.proxies.append((self.t, instance, proxy))

    def observe_outcome(self, instance, proxy, outcome):
        self.outcomes.append((self.t, instance, proxy, outcome))

    def end_round(self, t):
        assert t == self.t
        self.t += 1

    def reset(self):
        pass


@pytest.fixture
def probe_cls():
    return ProbeForecaster


# acceptance verdicts, filled in by tests/test_acceptance.py
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAILED'} ({info})" for name, good, info in parts)
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {detail}")
