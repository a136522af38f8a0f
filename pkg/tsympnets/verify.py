"""
tsympnets module turning the structural and approximation claims into executable checks

Every check returns a report dictionary {'check', 'pass', 'measured', 'tolerances'}
"""
import numpy as np
import sympy
from sympy.utilities.lambdify import lambdify
from scipy.stats import linregress

from .input import read_package_config
from .output import fatal_error,warning
from .dynamics import hamiltonians,integrators
from .networks import sympnet,autodiff

SUITES = ["structural","counterexample","rate","gradients","integrators","all"]
SEPARABLE_KINDS = ["TG","OTLA","NATG"]


def make_report(check,passed,measured,tolerances):
    return {'check':check,'pass':bool(passed),'measured':measured,'tolerances':tolerances}

def c1_norm_grid(f,df,interval,grid_n):
    """
    max|f| + max|f'| over an evenly spaced grid including both endpoints

    Arguments
    ---------------------------
    f : function
        Vectorised scalar function
    df : function
        Its derivative
    interval : tuple
        (a, b)
    grid_n : int
        Number of grid points, >= 2

    Returns
    ---------------------------
    norm : float
    """
    if grid_n < 2:
        fatal_error(f"c1_norm_grid() requires grid_n >= 2, not {grid_n}")
    grid = np.linspace(interval[0],interval[1],grid_n)
    values = np.broadcast_to(f(grid),grid.shape)
    slopes = np.broadcast_to(df(grid),grid.shape)
    return float(np.max(np.abs(values)) + np.max(np.abs(slopes)))

def _c1_pair(expr,var):
    return lambdify(var,expr,"numpy"),lambdify(var,sympy.diff(expr,var),"numpy")

def counterexample_check(grid_n=101,tol=1e-9):
    """
    Shows that closeness of composed maps does not follow from closeness of the factors in C^1:
    F(x) = x^2, F0(x) = x^2 - 1, G0 = G1 = x^2 give |F o F0 - G1 o G0| = 5 on [0,1] while the
    bound |F'| |F0 - G0| + |F - G1| only gives 4

    Arguments
    ---------------------------
    grid_n : int, optional
        Grid points per interval
    tol : float, optional
        Tolerance on the values 5 and 4

    Returns
    ---------------------------
    report : dictionary
    """
    x = sympy.Symbol("x")
    F = x**2
    F0 = x**2 - 1
    G0 = x**2
    G1 = x**2
    lhs = c1_norm_grid(*_c1_pair(sympy.expand(F.subs(x,F0) - G1.subs(x,G0)),x),(0.0,1.0),grid_n)
    rhs = c1_norm_grid(*_c1_pair(sympy.diff(F,x),x),(-1.0,1.0),grid_n)*c1_norm_grid(*_c1_pair(F0 - G0,x),(0.0,1.0),grid_n)
    rhs += c1_norm_grid(*_c1_pair(F - G1,x),(-1.0,1.0),grid_n)
    passed = abs(lhs - 5.0) <= tol and abs(rhs - 4.0) <= tol and lhs > rhs
    return make_report("counterexample",passed,{'lhs':lhs,'rhs':rhs,'margin':lhs - rhs,'grid_n':grid_n},{'value_tol':tol})

def composition_rate_study(sys,w_grid,h,m_list,t0=0.0):
    """
    Errors of the m-fold symplectic Euler composition against the system flow

    Arguments
    ---------------------------
    sys : dictionary
        Separable Hamiltonian system with an exact flow
    w_grid : array-like (N,2d)
        Compact set of states
    h : float
        Total step
    m_list : list of int
        Increasing substep counts, at least 4
    t0 : float, optional
        Initial clock time

    Returns
    ---------------------------
    study : dictionary
        'm' list, 'errors' (max infinity norm over the grid per m), 'slope' of log error vs log m,
        'monotone' flag
    """
    if not sys['separable']:
        fatal_error(f"composition_rate_study() needs a separable system, {sys['name']} is not separable")
    if sys['exact_flow'] is None:
        fatal_error(f"composition_rate_study() needs the exact flow of {sys['name']}")
    m_list = [int(m) for m in m_list]
    if len(m_list) < 4 or any(b <= a for a,b in zip(m_list[:-1],m_list[1:])):
        fatal_error(f"composition_rate_study() needs at least 4 increasing m values, got {m_list}")
    w_grid = np.asarray(w_grid,dtype=float)
    flow = sys['exact_flow'](t0,h,w_grid)
    errors = np.array([np.max(np.abs(integrators.trotter_composition(sys,h,m,w_grid,t0=t0) - flow)) for m in m_list])
    fit = linregress(np.log(m_list),np.log(errors))
    return {'m':m_list,'errors':errors,'slope':float(fit.slope),'monotone':bool(np.all(np.diff(errors) <= 0.0))}

def square_grid(bounds,grid_n,d=1):
    """
    Tensor grid over [a,b]^(2d) with grid_n points per coordinate
    """
    axis = np.linspace(bounds[0],bounds[1],grid_n)
    mesh = np.meshgrid(*([axis]*(2*d)),indexing="ij")
    return np.stack([m.ravel() for m in mesh],axis=-1)

def rate_report(study,slope_range=(-1.3,-0.8),final_error_max=1e-2):
    passed = slope_range[0] <= study['slope'] <= slope_range[1] and study['errors'][-1] <= final_error_max
    if not study['monotone']:
        warning("Composition errors are not monotone in m")
    measured = {'slope':study['slope'],'errors':[float(e) for e in study['errors']],'m':study['m'],'monotone':study['monotone']}
    return make_report("composition_rate",passed,measured,{'slope_range':list(slope_range),'final_error_max':final_error_max})

def separability_diagnostic(model,probe_points,t=None,tol=1e-9):
    """
    Variation of dh_at_zero blocks that separable structure keeps constant

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    probe_points : array-like (N,2d)
        States, each one is recombined with the others: the p-half of every point with the
        q-half of the first point and the q-half of every point with the p-half of the first
    t : float, optional
        Clock time (non-autonomous kinds)
    tol : float, optional
        Variation tolerance

    Returns
    ---------------------------
    report : dictionary
        Passes for TG/OTLA/NATG when both variations are within tol; for TLA/NATLA the
        variation is reported and the check always passes
    """
    probe_points = np.atleast_2d(np.asarray(probe_points,dtype=float))
    if probe_points.shape[0] < 2:
        fatal_error("separability_diagnostic() needs at least 2 probe points")
    d = model['d']
    if model['kind'] in sympnet.NON_AUTONOMOUS and t is None:
        t = 0.0
    base = probe_points[0]
    vary_p = probe_points.copy()
    vary_p[:,d:] = base[d:]
    vary_q = probe_points.copy()
    vary_q[:,:d] = base[:d]
    dh_p = sympnet.dh_at_zero(model,t,vary_p)
    dh_q = sympnet.dh_at_zero(model,t,vary_q)
    # first block must not see p, second block must not see q
    p_variation = float(np.max(np.abs(dh_p[:,:d] - dh_p[0,:d])))
    q_variation = float(np.max(np.abs(dh_q[:,d:] - dh_q[0,d:])))
    asserted = model['kind'] in SEPARABLE_KINDS
    within = max(p_variation,q_variation) <= tol
    measured = {'kind':model['kind'],'p_variation':p_variation,'q_variation':q_variation,'asserted':asserted,'separable':within}
    return make_report("separability",within or not asserted,measured,{'variation_tol':tol})

def symplectic_suite(models,n_samples,tol=1e-11,identity_tol=1e-13,roundtrip_tol=1e-12,seed=0,x_bound=2.0,h_range=(0.0,1.0),t_range=(0.0,10.0)):
    """
    Symplecticity, identity at h = 0 and linear-module round trips over random points

    Arguments
    ---------------------------
    models : list of dictionaries
        SympNet models
    n_samples : int
        Random (h, t, x) per model
    tol : float, optional
        Symplectic residual tolerance
    identity_tol : float, optional
        Tolerance on |psi(0, t, x) - x|
    roundtrip_tol : float, optional
        Tolerance on |v^-1(v(x)) - x|
    seed : int, optional
        Seed of the sample generator
    x_bound, h_range, t_range : optional
        Sampling box

    Returns
    ---------------------------
    report : dictionary
    """
    rng = np.random.default_rng(seed)
    worst = {'symplectic':0.0,'identity':0.0,'roundtrip':0.0}
    for model in models:
        d = model['d']
        x = rng.uniform(-x_bound,x_bound,(n_samples,2*d))
        h = rng.uniform(h_range[0],h_range[1],n_samples)
        t = rng.uniform(t_range[0],t_range[1],n_samples)
        D = sympnet.forward_jacobian(model,h,t,x)
        worst['symplectic'] = max(worst['symplectic'],float(np.max(sympnet.symplectic_residual(D))))
        worst['identity'] = max(worst['identity'],float(np.max(np.abs(sympnet.forward(model,0.0,t,x) - x))))
        for module in model['modules']:
            linear = module['linear'] if module['type'] == "block" else module
            if linear['type'] != "linear":
                continue
            back = sympnet.linear_module_inverse(linear,sympnet.linear_module_apply(linear,x))
            worst['roundtrip'] = max(worst['roundtrip'],float(np.max(np.abs(back - x))))
    passed = worst['symplectic'] <= tol and worst['identity'] <= identity_tol and worst['roundtrip'] <= roundtrip_tol
    measured = dict(worst)
    measured['n_models'] = len(models)
    return make_report("symplectic",passed,measured,{'symplectic_tol':tol,'identity_tol':identity_tol,'roundtrip_tol':roundtrip_tol})

def random_models(n_models,arch_dict,d=1,seed=0,kinds=None):
    """
    n_models freshly initialised models of each kind, seeds seed, seed+1, ...
    """
    kinds = sympnet.KINDS if kinds is None else kinds
    return {kind:[sympnet.init_model(kind,d,arch_dict[kind],seed + i) for i in range(n_models)] for kind in kinds}

def _perturbed(model,rng,scale=0.3):
    """
    Model with parameters moved away from the small initial values, so every term contributes
    """
    theta = sympnet.flatten_params(model)
    return sympnet.unflatten_params(model,theta + rng.normal(0.0,scale,theta.shape))

def structural_suite(config,seed=0):
    """
    Symplectic and separability reports over random models of every kind
    """
    rng = np.random.default_rng(seed)
    models = random_models(config['n_models'],config['arch'],seed=seed)
    reports = []
    for kind in sympnet.KINDS:
        kind_models = [_perturbed(model,rng) for model in models[kind]]
        report = symplectic_suite(kind_models,config['n_samples'],config['symplectic_tol'],config['identity_tol'],config['roundtrip_tol'],seed=seed,x_bound=config['x_bound'],h_range=config['h_range'],t_range=config['t_range'])
        report['check'] = f"symplectic_{kind}"
        reports.append(report)
        worst = {'p_variation':0.0,'q_variation':0.0}
        passed = True
        for model in kind_models:
            probes = rng.uniform(-config['x_bound'],config['x_bound'],(config['n_samples'],2*model['d']))
            diag = separability_diagnostic(model,probes,t=rng.uniform(*config['t_range']),tol=config['separability_tol'])
            passed = passed and diag['pass']
            worst['p_variation'] = max(worst['p_variation'],diag['measured']['p_variation'])
            worst['q_variation'] = max(worst['q_variation'],diag['measured']['q_variation'])
        worst['asserted'] = kind in SEPARABLE_KINDS
        reports.append(make_report(f"separability_{kind}",passed,worst,{'variation_tol':config['separability_tol']}))
    return reports

def gradient_suite(config,seed=0):
    """
    Reverse-mode against finite-difference gradients for random instances of every kind
    """
    rng = np.random.default_rng(seed)
    arch = read_package_config("verify")['structural']['arch']
    reports = []
    for kind in sympnet.KINDS:
        worst_rel,worst_abs,passed = 0.0,0.0,True
        for i in range(config['n_instances']):
            model = _perturbed(sympnet.init_model(kind,1,arch[kind],seed + i),rng,scale=0.3)
            n = config['n_samples']
            batch = {'x':rng.uniform(-1.0,1.0,(n,2)),'h':rng.uniform(0.1,0.5,n),'t':rng.uniform(0.0,2.0,n)}
            batch['y'] = batch['x'] + rng.normal(0.0,0.1,(n,2))
            check = autodiff.gradient_check(model,batch,step=config['fd_step'],rel_tol=config['rel_tol'],abs_tol=config['abs_tol'],small=config['small'])
            worst_rel = max(worst_rel,check['max_rel_error'])
            worst_abs = max(worst_abs,check['max_abs_error'])
            passed = passed and check['pass']
        reports.append(make_report(f"gradients_{kind}",passed,{'max_rel_error':worst_rel,'max_abs_error':worst_abs,'n_instances':config['n_instances']},{'rel_tol':config['rel_tol'],'abs_tol':config['abs_tol']}))
    return reports

def composition_order(sys,h_list,horizon=1.0,x0=(0.0,2.5),oracle_step=1e-4,coefficients="kahan_li_s9odr6a"):
    """
    Fitted convergence order of composition6 at time horizon against the RK4 oracle

    Returns
    ---------------------------
    order : dictionary
        'h', 'errors', 'slope'
    """
    x0 = np.asarray(x0,dtype=float)
    reference = integrators.reference_flow(sys,0.0,horizon,x0,step=oracle_step)
    errors = []
    for h in h_list:
        n_steps = int(round(horizon/h))
        x = integrators.integrate("composition6",sys,0.0,h,n_steps,x0,coefficients=coefficients)[-1]
        errors.append(float(np.max(np.abs(x - reference))))
    fit = linregress(np.log(h_list),np.log(errors))
    return {'h':list(h_list),'errors':errors,'slope':float(fit.slope)}

def integrator_suite(config,seed=0):
    """
    Convergence order of both composition coefficient sets and symplecticity of the split schemes
    """
    sys = hamiltonians.pendulum()
    reports = []
    for coefficients in integrators.COMPOSITION_COEFFICIENTS.keys():
        order = composition_order(sys,config['h_list'],config['horizon'],oracle_step=config['oracle_step'],coefficients=coefficients)
        passed = config['slope_range'][0] <= order['slope'] <= config['slope_range'][1]
        reports.append(make_report(f"order_{coefficients}",passed,order,{'slope_range':config['slope_range']}))
    rng = np.random.default_rng(seed)
    n = config['n_samples']
    x = rng.uniform(-2.0,2.0,(n,2))
    h = rng.uniform(0.0,1.0,n)
    worst = {}
    for scheme in ["symplectic_euler","stormer_verlet","composition6"]:
        D = integrators.step_jacobian(scheme,sys,h,0.0,x)
        worst[scheme] = float(np.max(sympnet.symplectic_residual(D)))
    reports.append(make_report("integrator_symplectic",max(worst.values()) <= config['symplectic_tol'],worst,{'symplectic_tol':config['symplectic_tol']}))
    return reports

def run_suite(name,seed=0,config=None):
    """
    Runs a named verification suite

    Arguments
    ---------------------------
    name : str
        One of SUITES
    seed : int, optional
        Seed for random models and points
    config : dictionary, optional
        Overrides of config/verify.yaml, keyed by suite

    Returns
    ---------------------------
    reports : list of dictionaries
    """
    if not name in SUITES:
        fatal_error(f"Verification suite {name} is not valid, use one of {SUITES}")
    verify_config = read_package_config("verify")
    if not config is None:
        for key,value in config.items():
            verify_config[key] = {**verify_config.get(key,{}),**value}
    names = SUITES[:-1] if name == "all" else [name]
    reports = []
    for suite in names:
        suite_config = verify_config[suite]
        if suite == "counterexample":
            values = [counterexample_check(grid_n,suite_config['tol']) for grid_n in suite_config['grid_sizes']]
            reports += values
            spread = max(abs(r['measured']['lhs'] - values[0]['measured']['lhs']) + abs(r['measured']['rhs'] - values[0]['measured']['rhs']) for r in values)
            reports.append(make_report("counterexample_grid_independence",spread <= suite_config['grid_tol'],{'spread':spread},{'grid_tol':suite_config['grid_tol']}))
        elif suite == "rate":
            rate_config = read_package_config("experiments")['rate_study']
            sys = hamiltonians.system_builder(rate_config['system_data'])
            study = composition_rate_study(sys,square_grid(rate_config['grid_bounds'],rate_config['grid_n'],sys['dim']),rate_config['h'],rate_config['m_list'])
            reports.append(rate_report(study,suite_config['slope_range'],suite_config['final_error_max']))
        elif suite == "structural":
            reports += structural_suite(suite_config,seed)
        elif suite == "gradients":
            reports += gradient_suite(suite_config,seed)
        elif suite == "integrators":
            reports += integrator_suite(suite_config,seed)
    return reports
