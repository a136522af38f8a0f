"""
Tests for the SympNet families: structure, counts, derivatives and checkpoints
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from tsympnets.networks import sympnet
from tsympnets.verify import separability_diagnostic

from conftest import SMALL_ARCH,perturbed


def random_inputs(rng,n=100,d=1):
    return rng.uniform(0.0,1.0,n),rng.uniform(0.0,10.0,n),rng.uniform(-2.0,2.0,(n,2*d))


class TestArchitectures:
    def test_table_parameter_counts(self):
        for experiment,rows in sympnet.experiment_architectures().items():
            for row in rows:
                arch = {key:value for key,value in row.items() if not key in ['kind','params']}
                model = sympnet.init_model(row['kind'],1,arch,seed=0)
                assert sympnet.param_count(model) == row['params'],(experiment,row['kind'])
                assert sympnet.param_count_formula(row['kind'],1,arch) == row['params']

    def test_counts_listed(self):
        counts = [row['params'] for rows in sympnet.experiment_architectures().values() for row in rows]
        assert counts == [450,34,30,450,55,48,360,960,480,1200]

    def test_formula_in_higher_dimension(self,kind):
        model = sympnet.init_model(kind,3,SMALL_ARCH[kind],seed=0)
        assert sympnet.param_count(model) == sympnet.param_count_formula(kind,3,SMALL_ARCH[kind])
        assert len(sympnet.param_labels(model)) == sympnet.param_count(model)

    def test_unknown_kind(self):
        with pytest.raises(SystemExit):
            sympnet.init_model("LA",1,{'layers':2,'sublayers':2},seed=0)

    def test_missing_width(self):
        with pytest.raises(SystemExit):
            sympnet.check_arch("TG",{'layers':3})

    @pytest.mark.parametrize("layers",[0,-2,2.5,True])
    def test_invalid_layers(self,layers):
        with pytest.raises(SystemExit):
            sympnet.check_arch("TLA",{'layers':layers,'sublayers':2})

    def test_defaults_filled(self):
        arch = sympnet.check_arch("OTLA",{'layers':2,'sublayers':1})
        assert arch['activation'] == "tanh"
        assert arch['first_direction'] == "up"

    def test_seed_determines_model(self,kind):
        first = sympnet.flatten_params(sympnet.init_model(kind,1,SMALL_ARCH[kind],seed=7))
        second = sympnet.flatten_params(sympnet.init_model(kind,1,SMALL_ARCH[kind],seed=7))
        other = sympnet.flatten_params(sympnet.init_model(kind,1,SMALL_ARCH[kind],seed=8))
        assert np.array_equal(first,second)
        assert not np.array_equal(first,other)

    def test_directions_alternate(self):
        model = sympnet.init_model("TG",1,{'layers':4,'width':3,'first_direction':"low"},seed=0)
        assert [m['direction'] for m in model['modules']] == ["low","up","low","up"]

    def test_unknown_activation(self):
        with pytest.raises(SystemExit):
            sympnet.activation_builder("relu6")

    def test_activation_derivatives(self):
        z = np.linspace(-2.0,2.0,9)
        _,dtanh = sympnet.activation_builder("tanh")
        sigmoid,dsigmoid = sympnet.activation_builder("sigmoid")
        assert_allclose(dtanh(z),1.0 - np.tanh(z)**2)
        assert_allclose(dsigmoid(z),sigmoid(z)*(1.0 - sigmoid(z)))


class TestStructure:
    def test_identity_at_zero_step(self,small_model,rng):
        _,t,x = random_inputs(rng)
        assert np.max(np.abs(sympnet.forward(small_model,0.0,t,x) - x)) <= 1e-13

    def test_symplectic(self,small_model,rng):
        h,t,x = random_inputs(rng)
        D = sympnet.forward_jacobian(small_model,h,t,x)
        assert np.max(sympnet.symplectic_residual(D)) <= 1e-11

    def test_symplectic_in_two_dimensions(self,kind,rng):
        model = perturbed(sympnet.init_model(kind,2,SMALL_ARCH[kind],seed=0),seed=5)
        h,t,x = random_inputs(rng,n=20,d=2)
        assert np.max(sympnet.symplectic_residual(sympnet.forward_jacobian(model,h,t,x))) <= 1e-11

    def test_jacobian_matches_finite_differences(self,small_model):
        x = np.array([0.3,-0.8])
        h,t = 0.6,2.0
        eps = 1e-6
        fd = np.zeros((2,2))
        for j in range(2):
            shift = np.zeros(2)
            shift[j] = eps
            fd[:,j] = (sympnet.forward(small_model,h,t,x + shift) - sympnet.forward(small_model,h,t,x - shift))/(2.0*eps)
        assert_allclose(sympnet.forward_jacobian(small_model,h,t,x),fd,atol=1e-7)

    def test_batch_matches_single_states(self,small_model,rng):
        h,t,x = random_inputs(rng,n=4)
        batched = sympnet.forward(small_model,h,t,x)
        for i in range(4):
            assert_allclose(batched[i],sympnet.forward(small_model,h[i],t[i],x[i]),atol=1e-13)

    def test_linear_module_round_trip(self,rng):
        x = rng.uniform(-2.0,2.0,(50,2))
        for kind in ["OTLA","TLA","NATLA"]:
            model = perturbed(sympnet.init_model(kind,1,SMALL_ARCH[kind],seed=1),seed=2)
            for module in model['modules']:
                linear = module['linear'] if module['type'] == "block" else module
                if linear['type'] != "linear":
                    continue
                back = sympnet.linear_module_inverse(linear,sympnet.linear_module_apply(linear,x,scale=0.7),scale=0.7)
                assert np.max(np.abs(back - x)) <= 1e-12

    def test_single_gradient_module(self):
        model = sympnet.init_model("TG",1,{'layers':1,'width':4},seed=2)
        params = model['modules'][0]
        x = np.array([0.2,0.9])
        h = 0.35
        increment = (params['a']*np.tanh(params['K'] @ x[1:] + params['b'])) @ params['K']
        assert_allclose(sympnet.forward(model,h,None,x),[x[0] + h*increment[0],x[1]],atol=1e-14)

    def test_tla_without_activation_is_identity(self,rng):
        model = sympnet.init_model("TLA",1,{'layers':3,'sublayers':3},seed=4)
        for module in model['modules']:
            module['activation']['a'] = np.zeros(1)
        x = rng.uniform(-1.0,1.0,(10,2))
        assert_allclose(sympnet.forward(model,0.8,None,x),x,atol=1e-14)

    def test_otla_bias_scaled_by_step(self):
        model = sympnet.init_model("OTLA",1,{'layers':1,'sublayers':1},seed=0)
        model['modules'][0]['S'] = np.zeros((1,1))
        model['modules'][0]['bias'] = np.array([0.5,-1.0])
        assert_allclose(sympnet.forward(model,0.2,None,np.zeros(2)),[0.1,-0.2],atol=1e-15)

    def test_non_autonomous_kinds_need_time(self,rng):
        for kind in sympnet.NON_AUTONOMOUS:
            model = sympnet.init_model(kind,1,SMALL_ARCH[kind],seed=0)
            with pytest.raises(SystemExit):
                sympnet.forward(model,0.1,None,np.zeros(2))

    def test_autonomous_kinds_ignore_time(self):
        model = perturbed(sympnet.init_model("TLA",1,SMALL_ARCH["TLA"],seed=0))
        x = np.array([0.4,0.1])
        assert np.array_equal(sympnet.forward(model,0.3,None,x),sympnet.forward(model,0.3,5.0,x))

    def test_clock_advances_by_step(self):
        for kind in sympnet.NON_AUTONOMOUS:
            model = sympnet.init_model(kind,1,SMALL_ARCH[kind],seed=0)
            _,t_out = sympnet.forward(model,0.25,1.5,np.zeros(2),return_clock=True)
            assert t_out == pytest.approx(1.75,abs=1e-14)

    def test_time_changes_non_autonomous_output(self):
        model = perturbed(sympnet.init_model("NATG",1,SMALL_ARCH["NATG"],seed=0))
        x = np.array([0.4,0.1])
        assert not np.allclose(sympnet.forward(model,0.3,0.0,x),sympnet.forward(model,0.3,2.0,x))

    def test_dimension_mismatch(self,small_model):
        with pytest.raises(SystemExit):
            sympnet.forward(small_model,0.1,0.0,np.zeros(3))


class TestVectorField:
    def test_analytic_matches_finite_difference(self,small_model,rng):
        _,t,x = random_inputs(rng,n=10)
        assert_allclose(sympnet.dh_at_zero(small_model,t,x),sympnet.dh_at_zero(small_model,t,x,method="fd"),atol=1e-8)

    def test_unknown_method(self,small_model):
        with pytest.raises(SystemExit):
            sympnet.dh_at_zero(small_model,0.0,np.zeros(2),method="complex_step")

    def test_learned_hamiltonian_gradient(self):
        model = sympnet.init_model("TG",1,{'layers':1,'width':4},seed=2)
        x = np.array([0.2,0.9])
        dh = sympnet.dh_at_zero(model,None,x)
        assert dh[1] == 0.0
        assert_allclose(sympnet.learned_hamiltonian_gradient(model,None,x),[0.0,-dh[0]])

    def test_separable_kinds_pass_diagnostic(self,rng):
        probes = rng.uniform(-2.0,2.0,(30,2))
        for kind in ["TG","OTLA","NATG"]:
            model = perturbed(sympnet.init_model(kind,1,SMALL_ARCH[kind],seed=0))
            report = separability_diagnostic(model,probes,t=1.0)
            assert report['pass']
            assert report['measured']['separable']

    def test_tla_is_not_separable(self,rng):
        probes = rng.uniform(-2.0,2.0,(30,2))
        model = perturbed(sympnet.init_model("TLA",1,SMALL_ARCH["TLA"],seed=0),scale=1.0)
        report = separability_diagnostic(model,probes)
        assert report['pass']
        assert not report['measured']['asserted']
        assert not report['measured']['separable']


class TestParameters:
    def test_flatten_round_trip(self,small_model):
        theta = sympnet.flatten_params(small_model)
        rebuilt = sympnet.unflatten_params(small_model,theta)
        assert np.array_equal(sympnet.flatten_params(rebuilt),theta)

    def test_unflatten_does_not_touch_template(self,small_model):
        theta = sympnet.flatten_params(small_model)
        sympnet.unflatten_params(small_model,np.zeros_like(theta))
        assert np.array_equal(sympnet.flatten_params(small_model),theta)

    def test_wrong_vector_length(self,small_model):
        with pytest.raises(SystemExit):
            sympnet.unflatten_params(small_model,np.zeros(sympnet.param_count(small_model) + 1))

    def test_checkpoint_round_trip_is_bitwise(self,small_model,tmp_path):
        f_name = str(tmp_path/"model.json")
        sympnet.save_checkpoint(small_model,f_name)
        loaded = sympnet.load_checkpoint(f_name)
        assert loaded['kind'] == small_model['kind']
        assert loaded['arch'] == small_model['arch']
        assert np.array_equal(sympnet.flatten_params(loaded),sympnet.flatten_params(small_model))
        x = np.array([0.3,0.3])
        assert np.array_equal(sympnet.forward(loaded,0.4,1.0,x),sympnet.forward(small_model,0.4,1.0,x))

    def test_checkpoint_version_checked(self,small_model):
        doc = sympnet.model_to_document(small_model)
        doc['format_version'] = 99
        with pytest.raises(SystemExit):
            sympnet.model_from_document(doc)
