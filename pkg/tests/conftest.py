import numpy as np
import pytest

from frond.cli_runner import RunConfig

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[_ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def acceptance_sweep_config(**overrides) -> RunConfig:
    """The frozen deviation-ordering fixture: SBM(50; 2 blocks, 0.2 / 0.02), static GRAND at L = 0.8."""
    base = dict(
        subcommand="sweep",
        seed=6,  # graph seed 7, features 8, dynamics 9, perturbations 106..125
        graph_kind="sbm",
        graph_n=50,
        sbm_blocks=2,
        sbm_p_in=0.2,
        sbm_p_out=0.02,
        feature_dim=4,
        dynamics_kind="grand",
        attention_mode="static",
        lipschitz_target=0.8,
        perturbation_kind="feature",
        epsilon=0.1,
        step_h=0.1,
        horizon_T=10.0,
        betas=[0.2, 0.4, 0.6, 0.8, 1.0],
        n_seeds=20,
    )
    base.update(overrides)
    return RunConfig(**base)
