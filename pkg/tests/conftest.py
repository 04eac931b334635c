import numpy as np
import pytest

from testsched import InnovationDist, PriorSpec, ProblemSpec, SafetyRequirement
from testsched.kernel import available_backends

ACCEPTANCE_LINES = []


def make_spec(lambda_ref=1.0, c_ref=0.95, eta=0.95, prior=None, innovation=None, **kw):
    """ProblemSpec from flat arguments; ``prior`` is (mu, sigma2), ``innovation`` is (values, probs)."""
    return ProblemSpec(
        requirement=SafetyRequirement(lambda_ref, c_ref),
        eta=eta,
        prior=PriorSpec(*prior) if prior else None,
        innovation=InnovationDist(*innovation) if innovation else InnovationDist(),
        **kw,
    )


def micro_specs(count, seed):
    from oracles import micro_spec_params

    rng = np.random.default_rng(seed)
    return [make_spec(**micro_spec_params(rng)) for _ in range(count)]


FIG1_INNOVATION = ((0, 1, 2), (0.5, 0.25, 0.25))

# solved configurations used for the structural properties
MATRIX = [
    make_spec(k_max=20, n_max=20),
    make_spec(k_max=15, n_max=15, gamma=0.5, horizon=4),
    make_spec(prior=(0.5, 0.1), k_max=15, n_max=15),
    make_spec(prior=(1.2, 0.4), lambda_ref=1.0, c_ref=0.9, eta=0.9, k_max=15, n_max=15, horizon=3),
    make_spec(innovation=((0, 1), (0.7, 0.3)), k_max=12, n_max=12, horizon=3),
    make_spec(prior=(0.5, 0.1), innovation=((-1, 0, 2), (0.2, 0.5, 0.3)), k_max=10, n_max=10, beta_i_min=-4,
              beta_i_max=6, horizon=3),
]

compiled_only = pytest.mark.skipif("compiled" not in available_backends(), reason="extension not built")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
