"""
Tests for the reverse-mode gradients of the training loss
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from tsympnets.networks import autodiff,sympnet

from conftest import SMALL_ARCH,perturbed


def make_batch(rng,n=6,d=1,noise=0.1):
    batch = {'x':rng.uniform(-1.0,1.0,(n,2*d)),'h':rng.uniform(0.1,0.5,n),'t':rng.uniform(0.0,2.0,n)}
    batch['y'] = batch['x'] + rng.normal(0.0,noise,(n,2*d))
    return batch


class TestParameterGradients:
    def test_matches_finite_differences(self,small_model,rng):
        check = autodiff.gradient_check(small_model,make_batch(rng))
        assert check['pass'],check

    def test_matches_finite_differences_two_dimensions(self,kind,rng):
        model = perturbed(sympnet.init_model(kind,2,SMALL_ARCH[kind],seed=1),seed=4)
        check = autodiff.gradient_check(model,make_batch(rng,n=3,d=2))
        assert check['pass'],check

    def test_fresh_models_match_finite_differences(self,kind,rng):
        model = sympnet.init_model(kind,1,SMALL_ARCH[kind],seed=0)
        assert autodiff.gradient_check(model,make_batch(rng))['pass']

    def test_gradients_congruent_with_model(self,small_model,rng):
        _,grads = autodiff.loss_and_gradients(small_model,make_batch(rng))
        assert len(sympnet.flatten_params(grads)) == sympnet.param_count(small_model)


class TestGradientAgreement:
    def test_relative_error_above_small(self):
        # 5% off on a 1e-5 component is only 5e-7 absolute
        check = autodiff.gradient_agreement([1.05e-5],[1e-5])
        assert not check['pass']
        assert check['max_rel_error'] == pytest.approx(0.05)

    def test_absolute_error_below_small(self):
        assert autodiff.gradient_agreement([5e-7],[4e-7])['pass']
        assert not autodiff.gradient_agreement([3e-7],[-5e-7])['pass']

    def test_large_components_within_relative_tolerance(self):
        assert autodiff.gradient_agreement([1.0 + 5e-5,-2.0],[1.0,-2.0])['pass']
        assert not autodiff.gradient_agreement([1.0 + 5e-4,-2.0],[1.0,-2.0])['pass']


class TestInputGradients:
    def test_state_step_and_clock(self,small_model,rng):
        batch = make_batch(rng,n=3)
        _,_,inputs = autodiff.loss_and_gradients(small_model,batch,with_inputs=True)
        eps = 1e-6
        for key in ['x','h','t']:
            values = np.asarray(batch[key],dtype=float)
            fd = np.zeros_like(values)
            for index in np.ndindex(*values.shape):
                plus,minus = dict(batch),dict(batch)
                plus[key] = values.copy()
                minus[key] = values.copy()
                plus[key][index] += eps
                minus[key][index] -= eps
                fd[index] = (autodiff.mse(small_model,plus) - autodiff.mse(small_model,minus))/(2.0*eps)
            assert_allclose(inputs[key],fd,atol=1e-7,err_msg=key)

    def test_autonomous_kinds_have_no_clock_gradient(self,rng):
        model = perturbed(sympnet.init_model("TLA",1,SMALL_ARCH["TLA"],seed=0))
        _,_,inputs = autodiff.loss_and_gradients(model,make_batch(rng),with_inputs=True)
        assert np.all(inputs['t'] == 0.0)


class TestLoss:
    def test_loss_is_mean_squared_error(self,small_model,rng):
        batch = make_batch(rng)
        loss,_ = autodiff.loss_and_gradients(small_model,batch)
        t = batch['t'] if small_model['kind'] in sympnet.NON_AUTONOMOUS else None
        residual = sympnet.forward(small_model,batch['h'],t,batch['x']) - batch['y']
        assert loss == pytest.approx(np.mean(np.sum(residual**2,axis=1)),rel=1e-14)
        assert autodiff.mse(small_model,batch) == pytest.approx(loss,rel=1e-14)

    def test_exact_labels_give_zero_loss_and_gradient(self,small_model,rng):
        batch = make_batch(rng)
        batch['y'] = sympnet.forward(small_model,batch['h'],batch['t'],batch['x'])
        loss,grads = autodiff.loss_and_gradients(small_model,batch)
        assert loss == 0.0
        assert np.all(sympnet.flatten_params(grads) == 0.0)

    def test_chunking_does_not_change_result(self,small_model,rng):
        batch = make_batch(rng,n=10)
        loss,grads = autodiff.loss_and_gradients(small_model,batch)
        chunked_loss,chunked_grads = autodiff.loss_and_gradients(small_model,batch,chunk_size=3)
        assert chunked_loss == pytest.approx(loss,rel=1e-13)
        assert_allclose(sympnet.flatten_params(chunked_grads),sympnet.flatten_params(grads),rtol=1e-12,atol=1e-15)

    def test_workers_do_not_change_result(self,rng):
        model = perturbed(sympnet.init_model("NATG",1,SMALL_ARCH["NATG"],seed=0))
        batch = make_batch(rng,n=12)
        serial = autodiff.loss_and_gradients(model,batch,chunk_size=4,n_jobs=1)
        parallel = autodiff.loss_and_gradients(model,batch,chunk_size=4,n_jobs=2)
        assert serial[0] == parallel[0]
        assert np.array_equal(sympnet.flatten_params(serial[1]),sympnet.flatten_params(parallel[1]))

    def test_empty_batch(self,small_model):
        with pytest.raises(SystemExit):
            autodiff.loss_and_gradients(small_model,{'x':np.zeros((0,2)),'h':np.zeros(0),'t':np.zeros(0),'y':np.zeros((0,2))})

    def test_mismatched_labels(self,small_model):
        with pytest.raises(SystemExit):
            autodiff.loss_and_gradients(small_model,{'x':np.zeros((2,2)),'h':np.ones(2),'t':np.zeros(2),'y':np.zeros((3,2))})

    def test_unknown_loss(self,small_model,rng):
        with pytest.raises(SystemExit):
            autodiff.loss_and_gradients(small_model,make_batch(rng),loss="mae")
