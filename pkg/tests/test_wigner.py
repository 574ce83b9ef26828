import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import eval_genlaguerre

from heraldfock.fock import DensityMatrix, bernoulli_loss, random_density_matrix
from heraldfock.quadrature import HomodyneModel, hermite_table, prob_density
from heraldfock.wigner import (
    PhaseSpaceGrid,
    laguerre,
    marginal,
    read_grid,
    wigner,
    wigner_grid,
    wigner_point,
    write_grid,
)

IDEAL = HomodyneModel.ideal()


def wigner_by_integral(rho, x, p):
    """W(x, p) = (1/pi) int <x-y|rho|x+y> exp(2ipy) dy from position wavefunctions."""
    r = np.asarray(rho.elements)

    def integrand(y):
        a = hermite_table(np.array([x - y]), rho.n_max)[0]
        b = hermite_table(np.array([x + y]), rho.n_max)[0]
        return ((a @ r @ b) * np.exp(2j * p * y)).real

    # the imaginary part integrates to zero for Hermitian rho
    return integrate.quad(integrand, -10, 10, limit=200)[0] / math.pi


def test_vacuum_and_single_photon_at_origin():
    assert wigner_point(DensityMatrix.fock(0), 0, 0) == pytest.approx(1 / math.pi, abs=1e-15)
    assert wigner_point(DensityMatrix.fock(1), 0, 0) == pytest.approx(-1 / math.pi, abs=1e-15)
    assert -1 / math.pi == pytest.approx(-0.3183, abs=1e-4)


def test_laguerre_matches_scipy():
    y = np.linspace(0, 30, 31)
    for n in range(8):
        for alpha in range(6):
            np.testing.assert_allclose(laguerre(n, alpha, y), eval_genlaguerre(n, alpha, y), rtol=1e-12, atol=1e-9)


def test_matches_wavefunction_integral(rng):
    rho = random_density_matrix(5, rng)
    for x, p in [(0.0, 0.0), (0.7, -0.3), (-1.2, 1.5), (2.0, 0.4)]:
        assert wigner_point(rho, x, p) == pytest.approx(wigner_by_integral(rho, x, p), abs=1e-9)


def test_parity_at_origin(rng):
    rho = random_density_matrix(5, rng)
    diag = np.diag(rho.elements).real
    expected = np.dot((-1.0) ** np.arange(6), diag) / math.pi
    assert wigner_point(rho, 0, 0) == pytest.approx(expected, abs=1e-14)


def test_lossy_single_photon_at_origin():
    # parity of 0.24|0><0| + 0.76|1><1|
    rho = bernoulli_loss(DensityMatrix.fock(1), 0.76)
    assert wigner_point(rho, 0, 0) == pytest.approx((0.24 - 0.76) / math.pi, abs=1e-14)


def test_rotational_symmetry_of_diagonal_states():
    rho = DensityMatrix.diagonal([0.1, 0.5, 0.3, 0.1, 0, 0])
    r = np.linspace(0, 3, 13)
    ref = wigner(rho, r, 0 * r)
    for phi in (0.3, 1.1, 2.0):
        np.testing.assert_allclose(wigner(rho, r * math.cos(phi), r * math.sin(phi)), ref, atol=1e-14)


def test_wigner_is_real(rng):
    rho = random_density_matrix(5, rng)
    out = wigner(rho, np.linspace(-2, 2, 5), np.linspace(-1, 3, 5))
    assert out.dtype.kind == "f"


@pytest.mark.parametrize("n", [1, 2])
def test_grid_integral_and_minimum(n):
    grid = wigner_grid(DensityMatrix.fock(n), (-6, 6, -6, 6), 241, 241)
    assert grid.integral() == pytest.approx(1.0, abs=1e-6)
    w_min, x, p = grid.minimum()
    if n == 1:
        assert w_min == pytest.approx(-1 / math.pi, abs=1e-12)
        assert (x, p) == (0.0, 0.0)
    else:
        # |2> has a positive centre; L2(2r^2) exp(-r^2) is smallest at r^2 = (4 - sqrt 6) / 2
        assert wigner_point(DensityMatrix.fock(2), 0, 0) == pytest.approx(1 / math.pi, abs=1e-14)
        assert w_min < -0.1
        assert math.hypot(x, p) == pytest.approx(math.sqrt((4 - math.sqrt(6)) / 2), abs=0.05)


def test_marginal_reproduces_quadrature_distribution(rng):
    xs = np.linspace(-3, 3, 13)
    worst = 0.0
    for _ in range(20):
        rho = random_density_matrix(5, rng)
        theta = rng.uniform(0, math.pi)
        worst = max(worst, np.max(np.abs(marginal(rho, theta, xs) - prob_density(rho, theta, xs, IDEAL))))
    assert worst < 1e-4


def test_marginal_from_grid(rng):
    rho = random_density_matrix(3, rng)
    grid = wigner_grid(rho, (-6, 6, -6, 6), 301, 301)
    xs = np.linspace(-2, 2, 9)
    err = np.abs(marginal(grid, 0.8, xs) - prob_density(rho, 0.8, xs, IDEAL))
    assert err.max() < 2e-3


def test_grid_file_round_trip(tmp_path):
    grid = wigner_grid(DensityMatrix.fock(1), (-2, 2, -1, 1), 5, 4)
    path = tmp_path / "w.txt"
    write_grid(path, grid, {"state": "fock1"})
    back = read_grid(path)
    assert isinstance(back, PhaseSpaceGrid)
    assert (back.x_min, back.x_max, back.p_min, back.p_max) == (-2, 2, -1, 1)
    assert np.array_equal(back.values, grid.values)
    lines = path.read_text().splitlines()
    assert lines[0] == "# state: fock1"
    assert len([ln for ln in lines if not ln.startswith("#")]) == 20


@pytest.mark.parametrize(
    "bounds, n",
    [((1, 1, -1, 1), 11), ((-1, 1, 2, -2), 11), ((-1, 1, -1, 1), 1), ((-1, float("nan"), -1, 1), 11)],
)
def test_grid_validation(bounds, n):
    with pytest.raises(ValueError):
        wigner_grid(DensityMatrix.fock(1), bounds, n, n)


def test_grid_size_guard():
    with pytest.raises(ValueError):
        wigner_grid(DensityMatrix.fock(1), (-1, 1, -1, 1), 5000, 5000)
