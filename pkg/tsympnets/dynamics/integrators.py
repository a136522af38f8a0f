"""
tsympnets.dynamics module with symplectic one-step methods, composition drivers and the RK4 oracle

Every step function has the signature step(sys, h, t, x) with x of shape (2d) or (N,2d),
h and t scalars or arrays of length N
"""
import numpy as np

from ..output import fatal_error

# Symmetric 6th-order compositions of the Stormer-Verlet scheme, listed stage by stage
# kahan_li_s9odr6a: 9 stages, W. Kahan and R.-C. Li, Math. Comp. 66 (1997), 1089-1099
# yoshida6a: 7 stages, solution A of H. Yoshida, Phys. Lett. A 150 (1990), 262-268
_kl_half = [0.39216144400731413928,0.33259913678935943860,-0.70624617255763935981,0.082213596293550800230]
_yo_w1,_yo_w2,_yo_w3 = -1.17767998417887,0.235573213359357,0.784513610477560
_yo_w0 = 1.0 - 2.0*(_yo_w1 + _yo_w2 + _yo_w3)
COMPOSITION_COEFFICIENTS = {
    'kahan_li_s9odr6a':_kl_half + [0.79854399093482996340] + _kl_half[::-1],
    'yoshida6a':[_yo_w3,_yo_w2,_yo_w1,_yo_w0,_yo_w1,_yo_w2,_yo_w3],
}


def _prepare(sys,h,t,x):
    """
    Splits states into (p,q) batches and broadcasts h and t to one value per state
    """
    x = np.asarray(x,dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    d = sys['dim']
    if x.shape[-1] != 2*d:
        fatal_error(f"State of length {x.shape[-1]} does not match system {sys['name']} with d = {d}")
    n = x.shape[0]
    h = np.broadcast_to(np.asarray(h,dtype=float),(n,))[:,None]
    t = np.broadcast_to(np.asarray(t,dtype=float),(n,))
    return x[:,:d].copy(),x[:,d:].copy(),h,t,single

def _finish(p,q,single):
    x = np.concatenate([p,q],axis=-1)
    return x[0] if single else x

def _require_split(sys,scheme):
    if not sys['separable']:
        fatal_error(f"{scheme} needs the split gradients of a separable system, {sys['name']} is not separable")

def _kick(sys,p,q,alpha,t,D=None):
    """
    p <- p - alpha grad V(q, t), with the Jacobian D (N,2d,2d) updated in place when given
    """
    if not D is None:
        d = p.shape[1]
        D[:,:d,:] -= (alpha[:,:,None]*sys['hess_V_t'](q,t)) @ D[:,d:,:]
    return p - alpha*sys['grad_V_t'](q,t)

def _drift(sys,p,q,alpha,t,D=None):
    """
    q <- q + alpha grad K(p, t)
    """
    if not D is None:
        d = p.shape[1]
        D[:,d:,:] += (alpha[:,:,None]*sys['hess_K_t'](p,t)) @ D[:,:d,:]
    return q + alpha*sys['grad_K_t'](p,t)

def _verlet(sys,p,q,h,t,D=None):
    """
    Kick-drift-kick on prepared batches, kicks at t and t+h and the drift at t+h/2
    """
    half = 0.5*h
    p = _kick(sys,p,q,half,t,D)
    q = _drift(sys,p,q,h,t + half[:,0],D)
    p = _kick(sys,p,q,half,t + h[:,0],D)
    return p,q

def _euler(sys,p,q,h,t,D=None):
    p = _kick(sys,p,q,h,t,D)
    q = _drift(sys,p,q,h,t,D)
    return p,q

def _composition(sys,p,q,h,t,D=None,coefficients="kahan_li_s9odr6a"):
    if not coefficients in COMPOSITION_COEFFICIENTS.keys():
        fatal_error(f"Composition coefficients {coefficients} unknown, use one of {list(COMPOSITION_COEFFICIENTS.keys())}")
    clock = t.copy()
    for gamma in COMPOSITION_COEFFICIENTS[coefficients]:
        sub_h = gamma*h
        p,q = _verlet(sys,p,q,sub_h,clock,D)
        clock = clock + sub_h[:,0]
    return p,q

def symplectic_euler_step(sys,h,t,x):
    """
    Potential kick followed by a kinetic drift, (p - h grad V(q), q + h grad K(p - h grad V(q)))

    Arguments
    ---------------------------
    sys : dictionary
        Separable Hamiltonian system
    h : float or array-like (N)
        Step size
    t : float or array-like (N)
        Clock time at which the gradients are evaluated
    x : array-like (2d) or (N,2d)
        States (p,q)

    Returns
    ---------------------------
    x : array-like
        States after one step
    """
    _require_split(sys,"symplectic_euler_step")
    p,q,h,t,single = _prepare(sys,h,t,x)
    p,q = _euler(sys,p,q,h,t)
    return _finish(p,q,single)

def stormer_verlet_step(sys,h,t,x):
    """
    Symmetric second order half-kick, drift, half-kick step
    """
    _require_split(sys,"stormer_verlet_step")
    p,q,h,t,single = _prepare(sys,h,t,x)
    p,q = _verlet(sys,p,q,h,t)
    return _finish(p,q,single)

def composition6_step(sys,h,t,x,coefficients="kahan_li_s9odr6a"):
    """
    Sixth order symmetric composition of Stormer-Verlet substeps

    Arguments
    ---------------------------
    sys : dictionary
        Separable Hamiltonian system
    h : float or array-like (N)
        Step size
    t : float or array-like (N)
        Clock time at the start of the step
    x : array-like (2d) or (N,2d)
        States (p,q)
    coefficients : str, optional
        Key of COMPOSITION_COEFFICIENTS

    Returns
    ---------------------------
    x : array-like
        States after one step
    """
    _require_split(sys,"composition6_step")
    p,q,h,t,single = _prepare(sys,h,t,x)
    p,q = _composition(sys,p,q,h,t,coefficients=coefficients)
    return _finish(p,q,single)

def rk4_step(sys,h,t,x):
    """
    Classical Runge-Kutta step on the system vector field, used only as an accuracy oracle
    """
    x = np.asarray(x,dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    n = x.shape[0]
    h = np.broadcast_to(np.asarray(h,dtype=float),(n,))
    t = np.broadcast_to(np.asarray(t,dtype=float),(n,))
    f = sys['vector_field']
    hc = h[:,None]
    k1 = f(t,x)
    k2 = f(t + 0.5*h,x + 0.5*hc*k1)
    k3 = f(t + 0.5*h,x + 0.5*hc*k2)
    k4 = f(t + h,x + hc*k3)
    x = x + hc*(k1 + 2.0*k2 + 2.0*k3 + k4)/6.0
    return x[0] if single else x

STEP_SCHEMES = {
    'symplectic_euler':{'order':1,'symplectic':True,'step':symplectic_euler_step,'split':_euler},
    'stormer_verlet':{'order':2,'symplectic':True,'step':stormer_verlet_step,'split':_verlet},
    'composition6':{'order':6,'symplectic':True,'step':composition6_step,'split':_composition},
    'rk4':{'order':4,'symplectic':False,'step':rk4_step,'split':None},
}

def step_jacobian(scheme,sys,h,t,x,**kwargs):
    """
    Exact state Jacobian of one step of a split scheme, built as a product of kick and drift Jacobians

    Arguments
    ---------------------------
    scheme : str
        symplectic_euler, stormer_verlet or composition6
    sys : dictionary
        Separable system providing hess_K_t and hess_V_t
    h, t : float or array-like (N)
        Step sizes and clock times
    x : array-like (2d) or (N,2d)
        States

    Returns
    ---------------------------
    D : array-like (2d,2d) or (N,2d,2d)
    """
    if not scheme in STEP_SCHEMES.keys() or STEP_SCHEMES[scheme]['split'] is None:
        fatal_error(f"step_jacobian() needs a split scheme, not {scheme}")
    _require_split(sys,"step_jacobian")
    if sys.get('hess_K_t') is None or sys.get('hess_V_t') is None:
        fatal_error(f"System {sys['name']} provides no Hessians for step_jacobian()")
    p,q,h,t,single = _prepare(sys,h,t,x)
    d = sys['dim']
    D = np.tile(np.eye(2*d),(p.shape[0],1,1))
    STEP_SCHEMES[scheme]['split'](sys,p,q,h,t,D,**kwargs)
    return D[0] if single else D

def get_step(scheme):
    if not scheme in STEP_SCHEMES.keys():
        fatal_error(f"Integration scheme {scheme} unknown, use one of {list(STEP_SCHEMES.keys())}")
    return STEP_SCHEMES[scheme]['step']

def integrate(scheme,sys,t0,h,n_steps,x,**kwargs):
    """
    Repeats a one-step method, step i starts at clock time t0 + i*h

    Arguments
    ---------------------------
    scheme : str
        Key of STEP_SCHEMES
    sys : dictionary
        Hamiltonian system
    t0 : float or array-like (N)
        Initial clock time
    h : float or array-like (N)
        Step size
    n_steps : int
        Number of steps, >= 0
    x : array-like (2d) or (N,2d)
        Initial states
    kwargs :
        Passed to the step function

    Returns
    ---------------------------
    trajectory : array-like (n_steps+1,...)
        States including x
    """
    if n_steps < 0:
        fatal_error(f"integrate() requires n_steps >= 0, not {n_steps}")
    step = get_step(scheme)
    t0 = np.asarray(t0,dtype=float)
    h = np.asarray(h,dtype=float)
    x = np.asarray(x,dtype=float)
    trajectory = [x]
    for i in range(n_steps):
        x = step(sys,h,t0 + i*h,x,**kwargs)
        trajectory.append(x)
    return np.stack(trajectory)

def composition_flow(sys,t0,h,x,substeps=10,coefficients="kahan_li_s9odr6a"):
    """
    Approximate flow over h made of substeps composition6 steps of size h/substeps

    Arguments
    ---------------------------
    sys : dictionary
        Separable Hamiltonian system
    t0 : float or array-like (N)
        Initial clock time
    h : float or array-like (N)
        Flow time
    x : array-like (2d) or (N,2d)
        Initial states
    substeps : int, optional
        Number of composition6 steps
    coefficients : str, optional
        Key of COMPOSITION_COEFFICIENTS

    Returns
    ---------------------------
    x : array-like
        Final states
    """
    if substeps < 1:
        fatal_error(f"composition_flow() requires substeps >= 1, not {substeps}")
    return integrate("composition6",sys,t0,np.asarray(h,dtype=float)/substeps,substeps,x,coefficients=coefficients)[-1]

def trotter_composition(sys,h,m,x,t0=0.0):
    """
    m symplectic Euler substeps of size h/m, substep i evaluated at t0 + i*h/m

    Arguments
    ---------------------------
    sys : dictionary
        Separable Hamiltonian system
    h : float or array-like (N)
        Total step
    m : int
        Number of substeps, >= 1
    x : array-like (2d) or (N,2d)
        Initial states
    t0 : float or array-like (N), optional
        Initial clock time

    Returns
    ---------------------------
    x : array-like
        Final states
    """
    if m < 1:
        fatal_error(f"trotter_composition() requires m >= 1, not {m}")
    sub_h = np.asarray(h,dtype=float)/m
    for i in range(m):
        x = symplectic_euler_step(sys,sub_h,t0 + i*sub_h,x)
    return np.asarray(x,dtype=float)

def reference_flow(sys,t0,h,x,step=1e-6):
    """
    RK4 oracle flow with substeps no longer than step

    Arguments
    ---------------------------
    sys : dictionary
        Hamiltonian system with a vector_field
    t0 : float or array-like (N)
        Initial clock time
    h : float or array-like (N)
        Flow time
    x : array-like (2d) or (N,2d)
        Initial states
    step : float, optional
        Maximal RK4 substep

    Returns
    ---------------------------
    x : array-like
        Final states
    """
    h = np.asarray(h,dtype=float)
    n_sub = max(1,int(np.ceil(np.max(np.abs(h))/step)))
    sub_h = h/n_sub
    t = np.asarray(t0,dtype=float)
    for i in range(n_sub):
        x = rk4_step(sys,sub_h,t + i*sub_h,x)
    return np.asarray(x,dtype=float)
