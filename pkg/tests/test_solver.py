import numpy as np
import pytest

from tnfo.errors import InvalidParameter, IterationLimit, NonFiniteValue, SingularJacobian
from tnfo.nlp import assemble_tnfo
from tnfo.scenario import Scenario, run_scenario, unmet_fraction
from tnfo.solver import SolverOptions, fd_jacobian, row_relative_error, solve_newton, solve_nlp
from tnfo.synth import minimal_network


class Linear:
    def __init__(self, A, b):
        self.A, self.b = np.asarray(A, float), np.asarray(b, float)

    def residual(self, z):
        return self.A @ z - self.b

    def jacobian(self, z):
        return self.A


def test_newton_solves_linear_system_in_one_step():
    sys_ = Linear([[4.0, 1.0], [1.0, 3.0]], [1.0, 2.0])
    res = solve_newton(sys_, np.zeros(2), tol=1e-14)
    assert res.iterations == 1
    assert np.allclose(sys_.A @ res.x, sys_.b, atol=1e-14)


def test_newton_singular_jacobian():
    with pytest.raises(SingularJacobian):
        solve_newton(Linear([[1.0, 1.0], [1.0, 1.0]], [1.0, 0.0]), np.zeros(2))


def test_fd_matches_polynomial_derivative():
    f = lambda x: np.array([x[0] ** 3 + x[0] * x[1], np.sin(x[1])])  # noqa: E731
    x = np.array([1.3, -0.4])
    exact = np.array([[3 * 1.3**2 - 0.4, 1.3], [0.0, np.cos(-0.4)]])
    assert np.max(row_relative_error(exact, fd_jacobian(f, x))) < 1e-8


def test_fd_argument_checks():
    with pytest.raises(InvalidParameter):
        fd_jacobian(lambda x: x, np.ones(2), step=0.0)
    with pytest.raises(NonFiniteValue):
        fd_jacobian(lambda x: np.where(x > 0, x, np.inf), np.ones(1), relative=False, step=2.0)


def test_options_are_validated():
    with pytest.raises(InvalidParameter):
        SolverOptions(mu_decrease=1.5)
    with pytest.raises(InvalidParameter):
        SolverOptions(linear_solver="cholesky")


def test_minimal_network_meets_demand(mini):
    run = run_scenario(mini)
    assert run.summary.status == "optimal"
    assert run.summary.unmet == pytest.approx(0.0, abs=1.0)
    assert run.summary.supplied == pytest.approx(1e6 + run.summary.pipe_losses, rel=1e-6)


def test_capacity_short_of_demand_leaves_about_half_unmet():
    run = run_scenario(minimal_network(capacity=0.5e6))
    assert run.summary.status == "optimal"
    assert run.summary.supplied <= 0.5e6 + 1.0
    assert 0.5 <= unmet_fraction(run.state, run.problem.inputs) < 0.52


def test_iteration_limit_carries_best_iterate(campus):
    with pytest.raises(IterationLimit) as info:
        solve_nlp(assemble_tnfo(campus), opts=SolverOptions(max_iter=2))
    assert info.value.x is not None
    assert info.value.report.status == "iteration-limit"


def test_dense_and_sparse_factorizations_agree(mini):
    a, _ = solve_nlp(assemble_tnfo(mini), opts=SolverOptions(linear_solver="dense"))
    b, _ = solve_nlp(assemble_tnfo(mini), opts=SolverOptions(linear_solver="sparse"))
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_repeated_solves_are_bit_identical(mini):
    scen = Scenario("x", multipliers={"*": 1.3})
    a, _ = solve_nlp(assemble_tnfo(mini, scen))
    b, _ = solve_nlp(assemble_tnfo(mini, scen))
    assert np.array_equal(a.x, b.x)
