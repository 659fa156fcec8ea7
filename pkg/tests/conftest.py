import pytest

from macsim.core import HistoryWindow, Params, ProtocolKind, RandomSource
from macsim.kernel import run_chain


@pytest.fixture(scope="session")
def csma_k1_chain_1m():
    """One million CSMA kappa=1 steps at lambda=1, shared across files."""
    return run_chain(Params(1.0, 1), ProtocolKind.CSMA, 1_000_000,
                     HistoryWindow.saturated(()), RandomSource(2024))
