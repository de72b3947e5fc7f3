import numpy as np
import pytest

from ksnbc.errors import NoConvergenceError, ValidationError
from ksnbc.grid import Field, Grid, integrate
from ksnbc.operators import (
    FluxSpec,
    boundary_flux_source,
    chemo_divergence,
    helmholtz_solve,
    laplacian,
    laplacian_homogeneous,
)

SQUARE = Grid((1.0, 1.0), (16, 16))


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return Field(grid, rng.standard_normal(grid.shape()))


class TestFluxSpec:
    def test_power_law_needs_exponent_above_one(self):
        with pytest.raises(ValidationError):
            FluxSpec.power_law(1.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError):
            FluxSpec("weird")


class TestLaplacian:
    def test_constant_homogeneous_is_zero(self):
        lap = laplacian(Field.constant(SQUARE, 3.0), FluxSpec.homogeneous())
        assert np.abs(lap.values).max() == 0.0

    def test_constant_power_law_boundary_gain(self):
        c, p = 2.0, 1.3
        g = Grid((1.0, 1.0), (8, 8))
        lap = laplacian(Field.constant(g, c), FluxSpec.power_law(p))
        vol = g.cell_volume
        hy = g.h[1]
        assert np.abs(lap.values[1:-1, 1:-1]).max() == 0.0
        # edge (non-corner) cell: one boundary face
        assert lap.values[0, 3] == pytest.approx(c**p * hy / vol)
        # corner cell: two boundary faces
        assert lap.values[0, 0] == pytest.approx(2 * c**p * hy / vol)

    @pytest.mark.parametrize("n", [32, 64])
    def test_cosine_second_order(self, n):
        g = Grid((1.0,), (n,))
        f = Field.from_function(g, lambda x: np.cos(np.pi * x))
        lap = laplacian(f, FluxSpec.homogeneous())
        err = np.abs(lap.values + np.pi**2 * f.values).max()
        assert err < 10.0 / n**2 * np.pi**4

    def test_divergence_theorem(self):
        # integral of the Laplacian equals the total prescribed boundary flux
        rng = np.random.default_rng(0)
        f = Field(SQUARE, rng.uniform(0.1, 2.0, SQUARE.shape()))
        assert abs(integrate(laplacian(f, FluxSpec.homogeneous()))) < 1e-12
        p = 1.3
        total = integrate(laplacian(f, FluxSpec.power_law(p)))
        influx = integrate(boundary_flux_source(f, FluxSpec.power_law(p)))
        assert total == pytest.approx(influx, rel=1e-12)

    def test_symmetric_negative_semidefinite(self):
        vol = SQUARE.cell_volume
        for seed in range(3):
            f = random_field(SQUARE, seed)
            g = random_field(SQUARE, seed + 50)
            lf = laplacian_homogeneous(f).values
            lg = laplacian_homogeneous(g).values
            lhs = (lf * g.values).sum() * vol
            rhs = (f.values * lg).sum() * vol
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
            assert (lf * f.values).sum() * vol <= 1e-10


class TestChemoDivergence:
    def test_constant_v_gives_zero(self):
        u = random_field(SQUARE, 1)
        cd = chemo_divergence(u, Field.constant(SQUARE, 5.0))
        assert np.abs(cd.values).max() == 0.0

    def test_constant_u_matches_laplacian(self):
        g = Grid((1.0,), (128,))
        u = Field.constant(g, 3.0)
        v = Field.from_function(g, lambda x: np.cos(np.pi * x))
        cd = chemo_divergence(u, v)
        lap = laplacian_homogeneous(v)
        assert np.abs(cd.values - 3.0 * lap.values).max() < 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_conserves_mass_exactly(self, seed):
        rng = np.random.default_rng(seed)
        u = Field(SQUARE, rng.uniform(0, 3, SQUARE.shape()))
        v = random_field(SQUARE, seed + 10)
        assert abs(integrate(chemo_divergence(u, v))) < 1e-13

    def test_upwind_first_order(self):
        # truncation error decays at least linearly for variable u
        errs = []
        for n in (64, 128):
            g = Grid((1.0,), (n,))
            u = Field.from_function(g, lambda x: 2 + np.cos(np.pi * x))
            v = Field.from_function(g, lambda x: np.cos(2 * np.pi * x))
            cd = chemo_divergence(u, v)
            x = g.centers()[0]
            exact = (
                -np.pi * np.sin(np.pi * x) * (-2 * np.pi * np.sin(2 * np.pi * x))
                + (2 + np.cos(np.pi * x)) * (-4 * np.pi**2 * np.cos(2 * np.pi * x))
            )
            errs.append(np.abs(cd.values - exact).max())
        assert errs[1] < 0.7 * errs[0]


class TestHelmholtzSolve:
    @pytest.mark.parametrize("backend", ["dct", "direct", "cg"])
    def test_constant_balance(self, backend):
        sigma, c = 4.0, 1.7
        w, rep = helmholtz_solve(Field.constant(SQUARE, sigma * c), sigma,
                                 backend=backend)
        assert np.abs(w.values - c).max() < 1e-9
        assert rep.converged

    def test_elliptic_signal_balance(self):
        # alpha*u = beta*v for constant u
        alpha, beta, c = 2.0, 4.0, 3.0
        w, _ = helmholtz_solve(Field.constant(SQUARE, alpha * c), beta)
        assert np.abs(w.values - alpha * c / beta).max() < 1e-10

    @pytest.mark.parametrize("backend", ["dct", "direct", "cg"])
    def test_reflection_symmetry(self, backend):
        rng = np.random.default_rng(3)
        half = rng.standard_normal((8, 16))
        rhs = Field(SQUARE, np.concatenate([half, half[::-1]], axis=0))
        w, _ = helmholtz_solve(rhs, 2.0, backend=backend)
        assert np.abs(w.values - w.values[::-1]).max() < 1e-8

    @pytest.mark.parametrize("backend", ["dct", "direct", "cg"])
    def test_round_trip_identity(self, backend):
        sigma = 3.0
        f = random_field(SQUARE, 9)
        rhs = Field(SQUARE, sigma * f.values - laplacian_homogeneous(f).values)
        w, _ = helmholtz_solve(rhs, sigma, backend=backend)
        assert np.abs(w.values - f.values).max() < 1e-7

    def test_backends_agree(self):
        rhs = random_field(SQUARE, 4)
        sols = [helmholtz_solve(rhs, 1.3, backend=b)[0].values
                for b in ("dct", "direct", "cg")]
        assert np.abs(sols[0] - sols[1]).max() < 1e-9
        assert np.abs(sols[0] - sols[2]).max() < 1e-7

    def test_no_convergence_carries_report(self):
        rhs = random_field(SQUARE, 5)
        with pytest.raises(NoConvergenceError) as exc:
            helmholtz_solve(rhs, 1e-6, tol=1e-14, maxiter=2, backend="cg")
        assert exc.value.report.iterations >= 1
        assert not exc.value.report.converged

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValidationError):
            helmholtz_solve(Field.zeros(SQUARE), 0.0)
