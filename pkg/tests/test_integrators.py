"""
Tests for the one-step methods, composition drivers and the RK4 oracle
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import linregress

from tsympnets.dynamics import hamiltonians,integrators
from tsympnets.input import read_package_config
from tsympnets.networks.sympnet import symplectic_residual
from tsympnets.verify import composition_order

SPLIT_SCHEMES = ["symplectic_euler","stormer_verlet","composition6"]


class TestSteps:
    def test_symplectic_euler_formula(self,pendulum):
        x = np.array([0.3,1.2])
        h = 0.1
        p = x[0] - h*np.sin(x[1])
        assert_allclose(integrators.symplectic_euler_step(pendulum,h,0.0,x),[p,x[1] + h*p],rtol=0,atol=1e-15)

    def test_stormer_verlet_is_symmetric(self,pendulum):
        x = np.array([0.8,-0.4])
        forward = integrators.stormer_verlet_step(pendulum,0.3,0.0,x)
        assert_allclose(integrators.stormer_verlet_step(pendulum,-0.3,0.3,forward),x,atol=1e-14)

    def test_composition_coefficients_are_consistent(self):
        for gammas in integrators.COMPOSITION_COEFFICIENTS.values():
            assert sum(gammas) == pytest.approx(1.0,abs=1e-13)
            assert gammas == pytest.approx(gammas[::-1],abs=1e-15)
            # third order condition of a symmetric composition
            assert sum(g**3 for g in gammas) == pytest.approx(0.0,abs=1e-12)

    def test_unknown_coefficients(self,pendulum):
        with pytest.raises(SystemExit):
            integrators.composition6_step(pendulum,0.1,0.0,np.zeros(2),coefficients="ruth4")

    def test_batched_steps_match_single_steps(self,pendulum,rng):
        x = rng.uniform(-1.0,1.0,(5,2))
        h = rng.uniform(0.0,0.5,5)
        batched = integrators.composition6_step(pendulum,h,0.0,x)
        for i in range(5):
            assert_allclose(batched[i],integrators.composition6_step(pendulum,h[i],0.0,x[i]),atol=1e-15)

    def test_state_dimension_checked(self,pendulum):
        with pytest.raises(SystemExit):
            integrators.stormer_verlet_step(pendulum,0.1,0.0,np.zeros(4))


class TestOrder:
    @pytest.mark.parametrize("coefficients",list(integrators.COMPOSITION_COEFFICIENTS.keys()))
    def test_composition6_is_sixth_order(self,pendulum,coefficients):
        config = read_package_config("verify")['integrators']
        order = composition_order(pendulum,config['h_list'],config['horizon'],oracle_step=config['oracle_step'],coefficients=coefficients)
        assert 5.5 <= order['slope'] <= 6.5
        assert all(b < a for a,b in zip(order['errors'][:-1],order['errors'][1:]))

    def test_rk4_is_fourth_order(self,pendulum):
        x0 = np.array([0.0,2.5])
        reference = integrators.reference_flow(pendulum,0.0,1.0,x0,step=1e-4)
        h_list = [0.2,0.1,0.05,0.025]
        errors = [np.max(np.abs(integrators.integrate("rk4",pendulum,0.0,h,int(round(1.0/h)),x0)[-1] - reference)) for h in h_list]
        assert 3.5 <= linregress(np.log(h_list),np.log(errors)).slope <= 4.5

    def test_stormer_verlet_is_second_order(self,pendulum):
        x0 = np.array([0.0,2.5])
        reference = integrators.reference_flow(pendulum,0.0,1.0,x0,step=1e-4)
        h_list = [0.1,0.05,0.025,0.0125]
        errors = [np.max(np.abs(integrators.integrate("stormer_verlet",pendulum,0.0,h,int(round(1.0/h)),x0)[-1] - reference)) for h in h_list]
        assert 1.8 <= linregress(np.log(h_list),np.log(errors)).slope <= 2.2

    def test_time_dependent_composition(self,forced_oscillator):
        x = np.array([-0.2,-0.5])
        for t0 in [0.0,2.5]:
            assert_allclose(integrators.composition_flow(forced_oscillator,t0,0.3,x),forced_oscillator['exact_flow'](t0,0.3,x),atol=1e-9)


class TestJacobians:
    @pytest.mark.parametrize("scheme",SPLIT_SCHEMES)
    def test_split_schemes_are_symplectic(self,pendulum,scheme,rng):
        x = rng.uniform(-2.0,2.0,(50,2))
        h = rng.uniform(0.0,1.0,50)
        D = integrators.step_jacobian(scheme,pendulum,h,0.0,x)
        assert D.shape == (50,2,2)
        assert np.max(symplectic_residual(D)) <= 1e-11

    @pytest.mark.parametrize("scheme",SPLIT_SCHEMES)
    def test_jacobian_matches_finite_differences(self,forced_oscillator,scheme):
        x = np.array([0.4,-0.3])
        h,t = 0.4,1.7
        step = integrators.get_step(scheme)
        eps = 1e-6
        fd = np.zeros((2,2))
        for j in range(2):
            shift = np.zeros(2)
            shift[j] = eps
            fd[:,j] = (step(forced_oscillator,h,t,x + shift) - step(forced_oscillator,h,t,x - shift))/(2.0*eps)
        assert_allclose(integrators.step_jacobian(scheme,forced_oscillator,h,t,x),fd,atol=1e-8)

    def test_rk4_has_no_split_jacobian(self,pendulum):
        with pytest.raises(SystemExit):
            integrators.step_jacobian("rk4",pendulum,0.1,0.0,np.zeros(2))


class TestDrivers:
    def test_integrate_includes_initial_state(self,pendulum):
        x = np.array([0.1,0.2])
        trajectory = integrators.integrate("stormer_verlet",pendulum,0.0,0.1,7,x)
        assert trajectory.shape == (8,2)
        assert np.array_equal(trajectory[0],x)
        assert integrators.integrate("stormer_verlet",pendulum,0.0,0.1,0,x).shape == (1,2)

    def test_integrate_rejects_negative_steps(self,pendulum):
        with pytest.raises(SystemExit):
            integrators.integrate("stormer_verlet",pendulum,0.0,0.1,-1,np.zeros(2))

    def test_composition6_long_run_energy(self,pendulum):
        trajectory = integrators.integrate("composition6",pendulum,0.0,0.1,10000,np.array([1.0,0.0]))
        energy = hamiltonians.energy(pendulum,trajectory)
        assert trajectory.shape == (10001,2)
        assert np.max(np.abs(energy - energy[0])) <= 1e-8

    def test_unknown_scheme(self,pendulum):
        with pytest.raises(SystemExit):
            integrators.get_step("leapfrog4")

    def test_single_trotter_substep_is_symplectic_euler(self,pendulum):
        x = np.array([0.5,0.5])
        assert np.array_equal(integrators.trotter_composition(pendulum,0.2,1,x),integrators.symplectic_euler_step(pendulum,0.2,0.0,x))

    def test_trotter_composition_rejects_zero_substeps(self,pendulum):
        with pytest.raises(SystemExit):
            integrators.trotter_composition(pendulum,0.2,0,np.zeros(2))

    def test_trotter_composition_converges(self,pendulum):
        x = np.array([0.5,-0.5])
        flow = pendulum['exact_flow'](0.0,0.5,x)
        errors = [np.max(np.abs(integrators.trotter_composition(pendulum,0.5,m,x) - flow)) for m in [8,16,32,64]]
        assert all(b < a for a,b in zip(errors[:-1],errors[1:]))
