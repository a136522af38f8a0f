"""
tsympnets.networks module defining the five time-adaptive SympNet families

Kinds
---------------------------
TG    : gradient modules scaled by h
OTLA  : linear modules with h-scaled shears and bias, interleaved with activation modules diag(a)sigma(x)
TLA   : blocks v^-1 o w(h) o v with unit linear shears v and an h-scaled activation module w
NATG  : TG with a time coefficient c and a clock advanced by h/m after each module
NATLA : TLA with a time coefficient c and a clock advanced by h/m after each block

Models are dictionaries of numpy arrays and are never modified after construction,
training produces new models through unflatten_params
"""
import copy
from functools import lru_cache
import numpy as np
import sympy
from sympy.utilities.lambdify import lambdify

from ..input import read_package_config,read_json
from ..output import fatal_error,write_json

KINDS = ["TG","OTLA","TLA","NATG","NATLA"]
NON_AUTONOMOUS = ["NATG","NATLA"]
CHECKPOINT_VERSION = 1
PARAM_ORDER = ["K","a","b","c","S","bias"]


@lru_cache(maxsize=None)
def activation_builder(name):
    """
    Builds an activation function and its derivative from config/activations.yaml

    Arguments
    ---------------------------
    name : str
        Activation label

    Returns
    ---------------------------
    sigma, dsigma : functions
        Vectorised activation and derivative
    """
    act_dict = read_package_config("activations")
    if not name in act_dict.keys():
        fatal_error(f"Activation {name} is not valid, use one of {list(act_dict.keys())}")
    z = sympy.Symbol("z")
    expr = sympy.sympify(act_dict[name]['expression'],locals={'z':z})
    sigma = lambdify(z,expr,"numpy")
    d_expr = sympy.diff(expr,z)
    d_func = lambdify(z,d_expr,"numpy")
    dsigma = lambda v: np.broadcast_to(d_func(v),np.shape(v)).astype(float)
    return sigma,dsigma

def triu_size(d):
    return d*(d + 1)//2

def symmetric_from_triu(theta,d):
    """
    Symmetric d x d matrix from its stored upper triangle
    """
    rows,cols = np.triu_indices(d)
    S = np.zeros((d,d))
    S[rows,cols] = theta
    S[cols,rows] = theta
    return S

def triu_gradient(G):
    """
    Gradient with respect to the stored upper triangle given the gradient G with respect to the full matrix
    """
    d = G.shape[0]
    rows,cols = np.triu_indices(d)
    return (G + G.T - np.diag(np.diag(G)))[rows,cols]

def canonical_J(d):
    """
    Canonical skew matrix for states ordered (p,q)
    """
    eye = np.eye(d)
    zero = np.zeros((d,d))
    return np.block([[zero,eye],[-eye,zero]])

def _alternate(count,first):
    other = "low" if first == "up" else "up"
    return [first if i%2 == 0 else other for i in range(count)]

def sublayer_directions(linear_params):
    return _alternate(len(linear_params['S']),linear_params['start'])

def check_arch(kind,arch):
    """
    Validates and completes an architecture dictionary

    Arguments
    ---------------------------
    kind : str
        One of KINDS
    arch : dictionary
        Architecture variables, 'layers' and 'width' or 'sublayers'

    Returns
    ---------------------------
    arch : dictionary
        Copy of arch with defaults from config/architectures.yaml
    """
    if not kind in KINDS:
        fatal_error(f"Architecture kind {kind} is not valid, use one of {KINDS}")
    if not isinstance(arch,dict):
        fatal_error("Architecture must be given as a dictionary")
    arch_config = read_package_config("architectures")
    arch = dict(arch)
    for var in arch_config['kinds'][kind]:
        if not var in arch.keys():
            fatal_error(f"Architecture variable {var} required for kind {kind}")
        if isinstance(arch[var],bool) or not isinstance(arch[var],(int,np.integer)) or arch[var] < 1:
            fatal_error(f"Architecture variable {var} must be a positive integer, not {arch[var]}")
        arch[var] = int(arch[var])
    for var,value in arch_config['defaults'].items():
        if not var in arch.keys():
            arch[var] = value
    if not arch['first_direction'] in ["up","low"]:
        fatal_error(f"Architecture variable first_direction must be up or low, not {arch['first_direction']}")
    if not arch['init_scale'] > 0:
        fatal_error(f"Architecture variable init_scale must be positive, not {arch['init_scale']}")
    return arch

def init_model(kind,d,arch,seed):
    """
    Builds a randomly initialised model

    Arguments
    ---------------------------
    kind : str
        One of KINDS
    d : int
        Half-dimension of phase space
    arch : dictionary
        Architecture variables, see check_arch
    seed : int
        Seed of the numpy generator

    Returns
    ---------------------------
    model : dictionary
        SympNet model

    Notes
    ---------------------------
    K entries are drawn from N(0, 1/n), every other parameter from N(0, init_scale^2)
    """
    if isinstance(d,bool) or not isinstance(d,(int,np.integer)) or d < 1:
        fatal_error(f"Phase space half-dimension must be a positive integer, not {d}")
    d = int(d)
    arch = check_arch(kind,arch)
    rng = np.random.default_rng(seed)
    scale = arch['init_scale']
    na = kind in NON_AUTONOMOUS
    layers = arch['layers']
    modules = []
    if kind in ["TG","NATG"]:
        n = arch['width']
        for direction in _alternate(layers,arch['first_direction']):
            module = {'type':"gradient",'direction':direction}
            module['K'] = rng.normal(0.0,1.0/np.sqrt(n),(n,d))
            module['a'] = rng.normal(0.0,scale,n)
            module['b'] = rng.normal(0.0,scale,n)
            if na:
                module['c'] = rng.normal(0.0,scale,n)
            modules.append(module)
    elif kind == "OTLA":
        directions = _alternate(2*layers - 1,arch['first_direction'])
        for i in range(2*layers - 1):
            if i%2 == 0:
                modules.append({'type':"linear",'start':directions[i//2],'S':rng.normal(0.0,scale,(arch['sublayers'],triu_size(d))),'bias':rng.normal(0.0,scale,2*d)})
            else:
                modules.append({'type':"activation",'direction':directions[i//2],'a':rng.normal(0.0,scale,d)})
    else:
        for direction in _alternate(layers,arch['first_direction']):
            linear = {'type':"linear",'start':"up",'S':rng.normal(0.0,scale,(arch['sublayers'],triu_size(d)))}
            activation = {'type':"activation",'direction':direction,'a':rng.normal(0.0,scale,d),'b':rng.normal(0.0,scale,d)}
            if na:
                activation['c'] = rng.normal(0.0,scale,d)
            modules.append({'type':"block",'linear':linear,'activation':activation})
    activation_builder(arch['activation'])
    return {'kind':kind,'d':d,'activation':arch['activation'],'arch':arch,'seed':seed,'module_count':len(modules),'modules':modules}

def compile_ops(model):
    """
    Flattens a model into its sequence of primitive maps

    Returns
    ---------------------------
    ops : list of dictionaries
        'op' in gradient, activation, shear, bias, clock; 'path' locating the parameters;
        'direction' up or low; 'sub' shear index; 'scale' "h" or a constant factor
    """
    ops = []
    na = model['kind'] in NON_AUTONOMOUS
    for i,module in enumerate(model['modules']):
        if module['type'] == "gradient":
            ops.append({'op':"gradient",'path':(i,),'direction':module['direction'],'scale':"h"})
        elif module['type'] == "activation":
            ops.append({'op':"activation",'path':(i,),'direction':module['direction'],'scale':"h"})
        elif module['type'] == "linear":
            for j,direction in enumerate(sublayer_directions(module)):
                ops.append({'op':"shear",'path':(i,),'sub':j,'direction':direction,'scale':"h"})
            if 'bias' in module.keys():
                ops.append({'op':"bias",'path':(i,),'scale':"h"})
        elif module['type'] == "block":
            directions = sublayer_directions(module['linear'])
            for j,direction in enumerate(directions):
                ops.append({'op':"shear",'path':(i,"linear"),'sub':j,'direction':direction,'scale':1.0})
            ops.append({'op':"activation",'path':(i,"activation"),'direction':module['activation']['direction'],'scale':"h"})
            for j in reversed(range(len(directions))):
                ops.append({'op':"shear",'path':(i,"linear"),'sub':j,'direction':directions[j],'scale':-1.0})
        else:
            fatal_error(f"Module type {module['type']} is not valid")
        if na:
            ops.append({'op':"clock"})
    return ops

def lookup(modules,path):
    params = modules[path[0]]
    for key in path[1:]:
        params = params[key]
    return params

def increment(op,params,sigma,src,t,d):
    """
    Unscaled shear increment of one primitive map

    Arguments
    ---------------------------
    op : dictionary
        Primitive map from compile_ops
    params : dictionary
        Parameters of the module owning op
    sigma : function
        Activation
    src : array-like (N,d)
        Half of the state the shear reads
    t : array-like (N)
        Clock times
    d : int
        Half-dimension

    Returns
    ---------------------------
    f : array-like (N,d)
        Increment before the scale factor
    z : array-like or None
        Activation arguments
    S : array-like (d,d) or None
        Full shear matrix
    """
    if op['op'] == "gradient":
        z = src @ params['K'].T + params['b']
        if 'c' in params.keys():
            z = z + t[:,None]*params['c']
        return (params['a']*sigma(z)) @ params['K'],z,None
    elif op['op'] == "activation":
        z = src
        if 'b' in params.keys():
            z = z + params['b']
        if 'c' in params.keys():
            z = z + t[:,None]*params['c']
        return params['a']*sigma(z),z,None
    S = symmetric_from_triu(params['S'][op['sub']],d)
    return src @ S,None,S

def local_matrix(op,params,dsigma,z,S,n):
    """
    Derivative of the unscaled increment with respect to its source half, shape (N,d,d), always symmetric
    """
    if op['op'] == "gradient":
        return np.einsum("jk,nj,jl->nkl",params['K'],params['a']*dsigma(z),params['K'])
    elif op['op'] == "activation":
        weights = params['a']*dsigma(z)
        return weights[:,:,None]*np.eye(weights.shape[1])[None,:,:]
    return np.broadcast_to(S,(n,) + S.shape)

def prepare_inputs(model,h,t,x):
    """
    Checks dimensions and broadcasts h and t to one value per state

    Returns
    ---------------------------
    p, q : array-like (N,d)
    h, t : array-like (N)
    single : bool
        Whether x was a single state
    """
    x = np.asarray(x,dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    d = model['d']
    if x.ndim != 2 or x.shape[1] != 2*d:
        fatal_error(f"State dimension {x.shape[-1]} does not match model dimension 2d = {2*d}")
    n = x.shape[0]
    h = np.array(np.broadcast_to(np.asarray(h,dtype=float),(n,)))
    if model['kind'] in NON_AUTONOMOUS:
        if t is None:
            fatal_error(f"Model kind {model['kind']} requires a clock time t")
        t = np.array(np.broadcast_to(np.asarray(t,dtype=float),(n,)))
    else:
        t = np.zeros(n)
    return x[:,:d].copy(),x[:,d:].copy(),h,t,single

def evaluate(model,h,t,x,tape=None,jacobian=False):
    """
    Runs the primitive maps of a model on a batch

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    h : float or array-like (N)
        Step sizes
    t : float, array-like (N) or None
        Clock times, required for non-autonomous kinds
    x : array-like (2d) or (N,2d)
        States (p,q)
    tape : list, optional
        Receives one record per primitive map for the reverse pass
    jacobian : bool, optional
        Accumulate the state Jacobian

    Returns
    ---------------------------
    result : dictionary
        'p', 'q', 't' (final clock), 'h', 'D' (N,2d,2d) or None, 'single'
    """
    p,q,h,t,single = prepare_inputs(model,h,t,x)
    sigma,dsigma = activation_builder(model['activation'])
    d = model['d']
    n = p.shape[0]
    m = model['module_count']
    D = np.tile(np.eye(2*d),(n,1,1)) if jacobian else None
    for op in compile_ops(model):
        if op['op'] == "clock":
            if not tape is None:
                tape.append({'op':op})
            t = t + h/m
            continue
        params = lookup(model['modules'],op['path'])
        factor = h[:,None] if op['scale'] == "h" else op['scale']
        if op['op'] == "bias":
            if not tape is None:
                tape.append({'op':op,'params':params})
            p = p + factor*params['bias'][:d]
            q = q + factor*params['bias'][d:]
            continue
        up = op['direction'] == "up"
        src = q if up else p
        f,z,S = increment(op,params,sigma,src,t,d)
        if jacobian:
            M = local_matrix(op,params,dsigma,z,S,n)
            M = M*(h[:,None,None] if op['scale'] == "h" else op['scale'])
            if up:
                D[:,:d,:] += M @ D[:,d:,:]
            else:
                D[:,d:,:] += M @ D[:,:d,:]
        if not tape is None:
            tape.append({'op':op,'params':params,'src':src,'z':z,'S':S,'f':f,'t':t})
        if up:
            p = p + factor*f
        else:
            q = q + factor*f
    return {'p':p,'q':q,'t':t,'h':h,'D':D,'single':single}

def forward(model,h,t,x,return_clock=False):
    """
    Evaluates psi(h, t, x)

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    h : float or array-like (N)
        Step sizes
    t : float, array-like (N) or None
        Clock times, required for NATG and NATLA, ignored otherwise
    x : array-like (2d) or (N,2d)
        States (p,q)
    return_clock : bool, optional
        Also return the clock after the pass

    Returns
    ---------------------------
    x : array-like
        Mapped states, same shape as the input
    t : array-like, optional
        Final clock times
    """
    result = evaluate(model,h,t,x)
    x_out = np.concatenate([result['p'],result['q']],axis=-1)
    t_out = result['t']
    if result['single']:
        x_out,t_out = x_out[0],t_out[0]
    if return_clock:
        return x_out,t_out
    return x_out

def forward_jacobian(model,h,t,x):
    """
    Exact state Jacobian of psi(h, t, .) as a product of shear Jacobians

    Returns
    ---------------------------
    D : array-like (2d,2d) or (N,2d,2d)
    """
    result = evaluate(model,h,t,x,jacobian=True)
    return result['D'][0] if result['single'] else result['D']

def symplectic_residual(D):
    """
    max |D^T J D - J| for each Jacobian in D

    Arguments
    ---------------------------
    D : array-like (2d,2d) or (N,2d,2d)

    Returns
    ---------------------------
    residual : float or array-like (N)
    """
    D = np.asarray(D,dtype=float)
    J = canonical_J(D.shape[-1]//2)
    R = np.einsum("...ji,jk,...kl->...il",D,J,D) - J
    return np.max(np.abs(R),axis=(-2,-1))

def dh_at_zero(model,t,x,method="analytic",step=1e-6):
    """
    Derivative of psi with respect to h at h = 0

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    t : float, array-like (N) or None
        Clock times
    x : array-like (2d) or (N,2d)
        States
    method : str, optional
        "analytic" propagates the h-tangent through the primitive maps at h = 0, which
        is the sum of the per-module (per-block) h-derivatives since each is the identity there;
        "fd" takes a central difference in h
    step : float, optional
        Finite difference step

    Returns
    ---------------------------
    dh : array-like (2d) or (N,2d)
    """
    if method == "fd":
        x_plus = forward(model,step,t,x)
        x_minus = forward(model,-step,t,x)
        return (x_plus - x_minus)/(2.0*step)
    elif method != "analytic":
        fatal_error(f"dh_at_zero method {method} is not valid, use analytic or fd")
    p,q,h,t,single = prepare_inputs(model,0.0,t,x)
    sigma,dsigma = activation_builder(model['activation'])
    d = model['d']
    dp = np.zeros_like(p)
    dq = np.zeros_like(q)
    for op in compile_ops(model):
        # the clock does not move at h = 0
        if op['op'] == "clock":
            continue
        params = lookup(model['modules'],op['path'])
        if op['op'] == "bias":
            dp = dp + params['bias'][:d]
            dq = dq + params['bias'][d:]
            continue
        up = op['direction'] == "up"
        src,d_src = (q,dq) if up else (p,dp)
        f,z,S = increment(op,params,sigma,src,t,d)
        if op['scale'] == "h":
            delta_x = 0.0
            delta_tangent = f
        else:
            delta_x = op['scale']*f
            delta_tangent = op['scale']*(d_src @ S)
        if up:
            p = p + delta_x
            dp = dp + delta_tangent
        else:
            q = q + delta_x
            dq = dq + delta_tangent
    dh = np.concatenate([dp,dq],axis=-1)
    return dh[0] if single else dh

def learned_hamiltonian_gradient(model,t,x):
    """
    Gradient (dH/dp, dH/dq) of the Hamiltonian whose vector field the model reproduces at h = 0,
    read off from dh_at_zero = (-dH/dq, dH/dp)
    """
    dh = dh_at_zero(model,t,x)
    d = model['d']
    return np.concatenate([dh[...,d:],-dh[...,:d]],axis=-1)

def _shear_batch(params,x,scale,reverse):
    x = np.asarray(x,dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    d = x.shape[1]//2
    if np.shape(params['S'])[1] != triu_size(d):
        fatal_error(f"Linear module parameters do not match state dimension 2d = {2*d}")
    p,q = x[:,:d],x[:,d:]
    directions = sublayer_directions(params)
    order = list(range(len(directions)))
    if reverse:
        order = order[::-1]
        if 'bias' in params.keys():
            p = p - scale*params['bias'][:d]
            q = q - scale*params['bias'][d:]
    sign = -1.0 if reverse else 1.0
    for j in order:
        S = symmetric_from_triu(params['S'][j],d)
        if directions[j] == "up":
            p = p + sign*scale*(q @ S)
        else:
            q = q + sign*scale*(p @ S)
    if not reverse and 'bias' in params.keys():
        p = p + scale*params['bias'][:d]
        q = q + scale*params['bias'][d:]
    out = np.concatenate([p,q],axis=-1)
    return out[0] if single else out

def linear_module_apply(params,x,scale=1.0):
    """
    Applies the alternating shears of a linear module (then scale*bias when present)

    Arguments
    ---------------------------
    params : dictionary
        Linear module parameters 'S', 'start' and optional 'bias'
    x : array-like (2d) or (N,2d)
        States
    scale : float, optional
        Shear factor, h for original TLA modules and 1 for TLA conjugations

    Returns
    ---------------------------
    x : array-like
    """
    return _shear_batch(params,x,scale,False)

def linear_module_inverse(params,x,scale=1.0):
    """
    Exact inverse of linear_module_apply, negated shears in reverse order
    """
    return _shear_batch(params,x,scale,True)

def param_entries(modules):
    """
    Fixed traversal order of the trainable arrays

    Returns
    ---------------------------
    entries : list of (path, name)
    """
    entries = []
    for i,module in enumerate(modules):
        if module['type'] == "block":
            paths = [(i,"linear"),(i,"activation")]
        else:
            paths = [(i,)]
        for path in paths:
            params = lookup(modules,path)
            for name in PARAM_ORDER:
                if name in params.keys():
                    entries.append((path,name))
    return entries

def flatten_params(model):
    """
    Flat parameter vector of a model (or of a list of gradient modules shaped like one)
    """
    modules = model['modules'] if isinstance(model,dict) else model
    return np.concatenate([np.ravel(lookup(modules,path)[name]) for path,name in param_entries(modules)])

def unflatten_params(model,vector):
    """
    New model with the parameters of model replaced by vector

    Arguments
    ---------------------------
    model : dictionary
        Template model
    vector : array-like
        Flat parameters, ordered as flatten_params

    Returns
    ---------------------------
    new_model : dictionary
    """
    vector = np.asarray(vector,dtype=float)
    new_model = copy.deepcopy(model)
    start = 0
    for path,name in param_entries(new_model['modules']):
        params = lookup(new_model['modules'],path)
        size = np.size(params[name])
        params[name] = vector[start:start+size].reshape(np.shape(params[name])).copy()
        start += size
    if start != len(vector):
        fatal_error(f"Parameter vector of length {len(vector)} does not match the {start} parameters of the model")
    return new_model

def zeros_like_modules(modules):
    """
    Gradient container congruent to a model's modules
    """
    grads = copy.deepcopy(modules)
    for path,name in param_entries(grads):
        params = lookup(grads,path)
        params[name] = np.zeros_like(params[name],dtype=float)
    return grads

def param_labels(model):
    """
    Readable names of the flat parameters, e.g. "module 2 K[1,0]"
    """
    labels = []
    for path,name in param_entries(model['modules']):
        prefix = f"module {path[0]}" + ("" if len(path) == 1 else f" {path[1]}")
        shape = np.shape(lookup(model['modules'],path)[name])
        for index in np.ndindex(*shape):
            labels.append(f"{prefix} {name}[{','.join(str(i) for i in index)}]")
    return labels

def param_count(model):
    return int(sum(np.size(lookup(model['modules'],path)[name]) for path,name in param_entries(model['modules'])))

def param_count_formula(kind,d,arch):
    """
    Analytic number of trainable scalars

    Arguments
    ---------------------------
    kind : str
        One of KINDS
    d : int
        Half-dimension
    arch : dictionary
        Architecture variables

    Returns
    ---------------------------
    count : int
    """
    arch = check_arch(kind,arch)
    layers = arch['layers']
    if kind == "TG":
        return layers*(arch['width']*d + 2*arch['width'])
    elif kind == "NATG":
        return layers*(arch['width']*d + 3*arch['width'])
    linear = arch['sublayers']*triu_size(d)
    if kind == "OTLA":
        return layers*(linear + 2*d) + (layers - 1)*d
    elif kind == "TLA":
        return layers*(linear + 2*d)
    return layers*(linear + 3*d)

def experiment_architectures():
    """
    Architectures used by the experiments, keyed by experiment id

    Returns
    ---------------------------
    table : dictionary
        Lists of {kind, layers, width or sublayers, params}
    """
    return read_package_config("architectures")['table']

def _encode(obj):
    if isinstance(obj,np.ndarray):
        return {'shape':list(obj.shape),'data':[float(v).hex() for v in obj.ravel()]}
    elif isinstance(obj,dict):
        return {key:_encode(value) for key,value in obj.items()}
    elif isinstance(obj,list):
        return [_encode(value) for value in obj]
    elif isinstance(obj,np.generic):
        return obj.item()
    return obj

def _decode(obj):
    if isinstance(obj,dict):
        if set(obj.keys()) == {'shape','data'}:
            return np.array([float.fromhex(v) for v in obj['data']],dtype=float).reshape(obj['shape'])
        return {key:_decode(value) for key,value in obj.items()}
    elif isinstance(obj,list):
        return [_decode(value) for value in obj]
    return obj

def model_to_document(model):
    """
    Checkpoint document with every parameter stored as hex floats
    """
    doc = {'format_version':CHECKPOINT_VERSION}
    for key in ['kind','d','activation','arch','seed','module_count']:
        doc[key] = _encode(model[key])
    doc['modules'] = _encode(model['modules'])
    return doc

def model_from_document(doc):
    """
    Rebuilds a model from a checkpoint document
    """
    if doc.get('format_version') != CHECKPOINT_VERSION:
        fatal_error(f"Checkpoint format_version {doc.get('format_version')} is not supported, expected {CHECKPOINT_VERSION}")
    for key in ['kind','d','activation','arch','seed','module_count','modules']:
        if not key in doc.keys():
            fatal_error(f"Checkpoint has no entry {key}")
    if not doc['kind'] in KINDS:
        fatal_error(f"Checkpoint kind {doc['kind']} is not valid, use one of {KINDS}")
    model = {key:_decode(doc[key]) for key in ['kind','d','activation','arch','seed','module_count']}
    model['modules'] = _decode(doc['modules'])
    return model

def save_checkpoint(model,f_name):
    write_json(model_to_document(model),f_name)

def load_checkpoint(f_name):
    return model_from_document(read_json(f_name))
