import itertools
import math

import numpy as np
import pytest


def brute_shell(d, n):
    """All k in the box [-⌈√n⌉, ⌈√n⌉]^d with ‖k‖² = n, by plain scan."""
    b = math.isqrt(n) + 1
    return sorted(k for k in itertools.product(range(-b, b + 1), repeat=d)
                  if sum(c * c for c in k) == n)


def grid_points(d, m):
    axis = np.arange(m) / m
    return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)


def direct_eval(coeffs, x):
    """Term-by-term Σ â_p e^{2πi p·x}, independent of TrigPoly.evaluate."""
    x = np.atleast_2d(x)
    out = np.zeros(len(x), dtype=complex)
    for p, v in coeffs.items():
        out += v * np.exp(2j * np.pi * (x @ np.array(p, dtype=float)))
    return out


def psi_values(shell, c, x):
    return direct_eval(dict(zip(shell.vectors, c)), x)


CLI_SYMBOL = "1,1:0.5; -1,-1:0.5; 2,0:0.3; -2,0:0.3"

#: Small configs exercising every CLI command.
CONFIGS_CLI = {
    "shells": "d = 2\nn = 25, 3, 65\nlambdas = 4e4\n",
    "qvariance": f"d = 2\nlambdas = 4e3, 1e4, 2e4, 4e4\nsymbol = {CLI_SYMBOL}\nmin_shells = 1\n",
    "birkhoff": f"d = 2\nT = 2, 100\nsymbol = {CLI_SYMBOL}\nn_samples = 2000\n",
    "smallball": "d = 2\nlambdas = 1e3, 1e4\nnu1 = 0.1\ncenters_per_axis = 4\n",
    "l4": "d = 2\nn = 25, 65\nseeds = 0, 1\n",
    "weyl": "d = 2\nlambdas = 1e3, 1e4\n",
    "theorem2": "d = 2\nlambdas = 1e3, 4e3\ns = 3.5\nnu1 = 0.05\ncutoff = 32\n",
}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


#: (criterion, passed, detail) lines recorded by the acceptance suite
ACCEPTANCE = []


def record(cid, passed, detail):
    ACCEPTANCE.append((cid, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(ACCEPTANCE, key=lambda t: str(t[0])):
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if passed else 'FAIL'}  {detail}")
