import numpy as np
import pytest

from rbmcs.rbm import RbmModel
from rbmcs.recovery import build_recovery_model
from rbmcs.sensing import build_noise_model, gen_bernoulli_matrix
from rbmcs.transforms import dictionary_model


def random_recovery_model(rng, m=12, n=16, j=24, k=3, hidden=5, rbm_scale=1.0,
                          sigma_n_sq=None):
    """A small fully random instance; every piece is drawn from ``rng``."""
    D = dictionary_model(rng.standard_normal((n, j)))
    op = gen_bernoulli_matrix(m, n, seed=int(rng.integers(2 ** 31)))
    sigma_r = 0.05 * rng.random(n)
    sn = 0.01 + 0.2 * rng.random() if sigma_n_sq is None else sigma_n_sq
    noise = build_noise_model(op, sigma_r, sn)
    rbm = RbmModel(rbm_scale * rng.standard_normal((j, hidden)),
                   rbm_scale * rng.standard_normal(j),
                   rbm_scale * rng.standard_normal(hidden))
    var = 0.5 + rng.random(j)
    return build_recovery_model(op, D, noise, rbm, var, k)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL/SKIP line per acceptance criterion."""
    def report(number, status, detail):
        if isinstance(status, (bool, np.bool_)):
            status = "PASS" if status else "FAIL"
        line = f"criterion {number:>2}: {status:<4}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
