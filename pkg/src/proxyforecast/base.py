"""The interface every forecaster exposes to the game loop."""

from __future__ import annotations

import numpy as np


class Forecaster:
    """Online forecaster of a delayed outcome given an instance.

    The harness calls, for each round ``t``: ``predict(x_t)``, then at the end
    of the round ``observe_proxy`` for the proxy due at ``t``,
    ``observe_outcome`` for the outcome due at ``t``, and finally
    ``end_round(t)``. ``predict`` never mutates state.
    """

    name = "forecaster"

    def predict(self, instance: int) -> np.ndarray:
        raise NotImplementedError

    def observe_proxy(self, instance: int, proxy: int) -> None:
        pass

    def observe_outcome(self, instance: int, proxy: int, outcome: int) -> None:
        pass

    def end_round(self, t: int) -> None:
        pass

    def reset(self) -> None:
        raise NotImplementedError

    def factor_probs(self, instance: int, proxy: int, outcome: int) -> tuple[float, float]:
        """Current (g(outcome | proxy), h(proxy | instance)) estimates, for factored models."""
        raise NotImplementedError(f"{type(self).__name__} is not a factored forecaster")
