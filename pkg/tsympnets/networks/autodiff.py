"""
tsympnets.networks module for reverse-mode gradients of the mean squared error of a SympNet

The forward pass records one tape entry per primitive map (see sympnet.compile_ops); the
backward pass walks the tape in reverse, every primitive supplying its own vector-Jacobian
product for the state, the clock, the step size and its parameters.
"""
import numpy as np
from joblib import Parallel,delayed

from ..output import fatal_error
from .sympnet import activation_builder,evaluate,flatten_params,lookup,triu_gradient,unflatten_params,zeros_like_modules


def check_batch(model,batch):
    """
    Validates a batch (dataset columns) against a model

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    batch : dictionary
        'x' (N,2d), 'h' (N), 'y' (N,2d) and 't' (N) or None

    Returns
    ---------------------------
    x, h, t, y : arrays
    """
    x = np.atleast_2d(np.asarray(batch['x'],dtype=float))
    y = np.atleast_2d(np.asarray(batch['y'],dtype=float))
    n = x.shape[0]
    if n == 0:
        fatal_error("Gradient computation requires a nonempty batch")
    if x.shape != y.shape or x.shape[1] != 2*model['d']:
        fatal_error(f"Batch states {x.shape} and labels {y.shape} do not match model dimension 2d = {2*model['d']}")
    h = np.array(np.broadcast_to(np.asarray(batch['h'],dtype=float),(n,)))
    t = batch.get('t')
    if not t is None:
        t = np.array(np.broadcast_to(np.asarray(t,dtype=float),(n,)))
    return x,h,t,y

def _increment_backward(op,record,g_params,g_f,sigma,dsigma):
    """
    Vector-Jacobian product of one unscaled increment

    Returns
    ---------------------------
    g_src : array-like (N,d)
        Gradient with respect to the source half of the state
    g_t : array-like (N) or None
        Gradient with respect to the clock
    """
    params = record['params']
    src = record['src']
    t = record['t']
    g_t = None
    if op['op'] == "gradient":
        z = record['z']
        s = sigma(z)
        g_params['K'] += (params['a']*s).T @ g_f
        g_u = g_f @ params['K'].T
        g_params['a'] += np.sum(g_u*s,axis=0)
        g_z = g_u*params['a']*dsigma(z)
        g_params['b'] += np.sum(g_z,axis=0)
        if 'c' in params.keys():
            g_params['c'] += np.sum(g_z*t[:,None],axis=0)
            g_t = g_z @ params['c']
        g_params['K'] += g_z.T @ src
        return g_z @ params['K'],g_t
    elif op['op'] == "activation":
        z = record['z']
        g_params['a'] += np.sum(g_f*sigma(z),axis=0)
        g_z = g_f*params['a']*dsigma(z)
        if 'b' in params.keys():
            g_params['b'] += np.sum(g_z,axis=0)
        if 'c' in params.keys():
            g_params['c'] += np.sum(g_z*t[:,None],axis=0)
            g_t = g_z @ params['c']
        return g_z,g_t
    g_params['S'][op['sub']] += triu_gradient(src.T @ g_f)
    return g_f @ record['S'],g_t

def backward(model,tape,h,g_p,g_q,g_t=None):
    """
    Reverse pass over a recorded forward evaluation

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    tape : list
        Records filled by sympnet.evaluate
    h : array-like (N)
        Step sizes of the forward pass
    g_p, g_q : array-like (N,d)
        Gradient of the scalar objective with respect to the output state
    g_t : array-like (N), optional
        Gradient with respect to the output clock

    Returns
    ---------------------------
    grads : list
        Parameter gradients shaped like model['modules']
    inputs : dictionary
        Gradients with respect to the input 'x' (N,2d), 'h' (N) and 't' (N)
    """
    sigma,dsigma = activation_builder(model['activation'])
    d = model['d']
    m = model['module_count']
    grads = zeros_like_modules(model['modules'])
    g_t = np.zeros(len(h)) if g_t is None else np.array(g_t,dtype=float)
    g_h = np.zeros(len(h))
    for record in reversed(tape):
        op = record['op']
        if op['op'] == "clock":
            g_h = g_h + g_t/m
            continue
        factor = h[:,None] if op['scale'] == "h" else op['scale']
        g_params = lookup(grads,op['path'])
        if op['op'] == "bias":
            bias = record['params']['bias']
            g_params['bias'] += np.concatenate([np.sum(factor*g_p,axis=0),np.sum(factor*g_q,axis=0)])
            g_h = g_h + g_p @ bias[:d] + g_q @ bias[d:]
            continue
        up = op['direction'] == "up"
        g_out = g_p if up else g_q
        if op['scale'] == "h":
            g_h = g_h + np.sum(g_out*record['f'],axis=1)
        g_src,g_t_local = _increment_backward(op,record,g_params,factor*g_out,sigma,dsigma)
        if not g_t_local is None:
            g_t = g_t + g_t_local
        if up:
            g_q = g_q + g_src
        else:
            g_p = g_p + g_src
    return grads,{'x':np.concatenate([g_p,g_q],axis=-1),'h':g_h,'t':g_t}

def _chunk_terms(model,x,h,t,y):
    """
    Sum of squared errors of a chunk and its unnormalised gradients
    """
    tape = []
    result = evaluate(model,h,t,x,tape=tape)
    residual = np.concatenate([result['p'],result['q']],axis=-1) - y
    d = model['d']
    grads,inputs = backward(model,tape,result['h'],2.0*residual[:,:d],2.0*residual[:,d:])
    return np.sum(residual**2),flatten_params(grads),inputs

def loss_and_gradients(model,batch,loss="mse",n_jobs=1,chunk_size=None,with_inputs=False):
    """
    Mean squared error L = (1/N) sum_i |psi(h_i, t_i, x_i) - y_i|^2 and its exact gradients

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    batch : dictionary
        Dataset columns, see check_batch
    loss : str, optional
        Only "mse"
    n_jobs : int, optional
        joblib workers for the chunks
    chunk_size : int, optional
        Samples per chunk, one chunk when None
    with_inputs : bool, optional
        Also return gradients with respect to x, h and t

    Returns
    ---------------------------
    loss : float
    grads : list
        Parameter gradients shaped like model['modules']
    inputs : dictionary, optional
        'x', 'h', 't' gradients

    Notes
    ---------------------------
    Chunks are reduced in their fixed order so the result does not depend on n_jobs
    """
    if loss != "mse":
        fatal_error(f"Loss {loss} is not valid, only mse is implemented")
    x,h,t,y = check_batch(model,batch)
    n = x.shape[0]
    if chunk_size is None or chunk_size >= n:
        chunks = [slice(0,n)]
    else:
        chunks = [slice(i,min(i+chunk_size,n)) for i in range(0,n,chunk_size)]
    def chunk_args(s):
        return model,x[s],h[s],None if t is None else t[s],y[s]
    if len(chunks) == 1 or n_jobs == 1:
        results = [_chunk_terms(*chunk_args(s)) for s in chunks]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(_chunk_terms)(*chunk_args(s)) for s in chunks)
    sse = 0.0
    flat = np.zeros_like(results[0][1])
    for chunk_sse,chunk_flat,chunk_inputs in results:
        sse = sse + chunk_sse
        flat = flat + chunk_flat
    grads = unflatten_params(model,flat/n)['modules']
    if with_inputs:
        inputs = {key:np.concatenate([r[2][key] for r in results])/n for key in ['x','h','t']}
        return sse/n,grads,inputs
    return sse/n,grads

def mse(model,batch):
    """
    Mean squared error only
    """
    x,h,t,y = check_batch(model,batch)
    result = evaluate(model,h,t,x)
    residual = np.concatenate([result['p'],result['q']],axis=-1) - y
    return np.sum(residual**2)/x.shape[0]

def gradient_agreement(g,fd,rel_tol=1e-4,abs_tol=1e-7,small=1e-6):
    """
    Judges every component once: on the relative error where |fd| > small, on the absolute error elsewhere

    Returns
    ---------------------------
    check : dictionary
        'max_rel_error', 'max_abs_error', 'pass'
    """
    g = np.asarray(g,dtype=float)
    fd = np.asarray(fd,dtype=float)
    abs_err = np.abs(g - fd)
    large = np.abs(fd) > small
    rel_err = np.where(large,abs_err/np.where(large,np.abs(fd),1.0),0.0)
    passed = bool(np.all(np.where(large,rel_err <= rel_tol,abs_err <= abs_tol)))
    return {'max_rel_error':float(np.max(rel_err)),'max_abs_error':float(np.max(abs_err)),'pass':passed}

def gradient_check(model,batch,step=1e-5,rel_tol=1e-4,abs_tol=1e-7,small=1e-6):
    """
    Compares reverse-mode parameter gradients with central finite differences

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    batch : dictionary
        Dataset columns
    step : float, optional
        Finite difference step
    rel_tol : float, optional
        Relative error bound for components with |g| > small
    abs_tol : float, optional
        Absolute error bound for components with |g| <= small
    small : float, optional
        Magnitude separating the two regimes, judged on the finite difference

    Returns
    ---------------------------
    check : dictionary
        'max_rel_error' (over components with |g| > small), 'max_abs_error', 'pass'
    """
    _,grads = loss_and_gradients(model,batch)
    g = flatten_params(grads)
    theta = flatten_params(model)
    fd = np.zeros_like(theta)
    for i in range(len(theta)):
        shift = np.zeros_like(theta)
        shift[i] = step
        fd[i] = (mse(unflatten_params(model,theta + shift),batch) - mse(unflatten_params(model,theta - shift),batch))/(2.0*step)
    return gradient_agreement(g,fd,rel_tol,abs_tol,small)
