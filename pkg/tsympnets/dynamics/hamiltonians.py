"""
tsympnets.dynamics module defining benchmark Hamiltonian systems, their gradients and reference flows

Phase space states are arrays x = (p,q) of shape (2d) or batches of shape (N,2d)
"""
import numpy as np
import sympy
from sympy.utilities.lambdify import lambdify
from scipy.linalg import expm

from ..output import fatal_error
from . import integrators

p_sym,q_sym,t_sym = sympy.symbols("p q t")


def _row_times(t,x):
    """
    Shapes clock times so they broadcast against the rows of x
    """
    t = np.asarray(t,dtype=float)
    if t.ndim == 1 and x.ndim == 2:
        t = t[:,None]
    return t

def _gradient_func(expr,var):
    """
    Turns a symbolic derivative into a vectorised gradient function (arg, t) -> array with arg's shape
    """
    func = lambdify((var,t_sym),expr,"numpy")
    def gradient(arg,t=0.0):
        arg = np.asarray(arg,dtype=float)
        return np.array(np.broadcast_to(func(arg,_row_times(t,arg)),arg.shape),dtype=float)
    return gradient

def _hessian_func(expr,var):
    """
    Second derivative of a d=1 potential as a function (arg, t) -> array (N,1,1)
    """
    func = lambdify((var,t_sym),expr,"numpy")
    def hessian(arg,t=0.0):
        arg = np.asarray(arg,dtype=float)
        return np.array(np.broadcast_to(func(arg,_row_times(t,arg)),arg.shape),dtype=float)[...,None]
    return hessian

def _energy_func(expr):
    """
    Turns a symbolic d=1 Hamiltonian into a function (p, q, t) -> energy per state
    """
    func = lambdify((p_sym,q_sym,t_sym),expr,"numpy")
    def hamiltonian(p,q,t=0.0):
        p = np.asarray(p,dtype=float)
        q = np.asarray(q,dtype=float)
        shape = np.broadcast_shapes(p.shape,q.shape)
        value = np.broadcast_to(func(p,q,_row_times(t,p)),shape)
        if len(shape) > 0 and shape[-1] == 1:
            value = value[...,0]
        return np.array(value,dtype=float)
    return hamiltonian

def separable_system(dim,grad_K,grad_V,hamiltonian,name="synthetic",time_dependent=False,exact_flow=None,flow_class=None,params=None,hess_K=None,hess_V=None):
    """
    Builds a separable system H(p,q,t) = K(p,t) + V(q,t) from its gradient functions

    Arguments
    ---------------------------
    dim : int
        Half-dimension d of phase space
    grad_K : function (p, t) -> array
        Gradient of the kinetic part
    grad_V : function (q, t) -> array
        Gradient of the potential part
    hamiltonian : function (p, q, t) -> energy
        Total energy
    name : str, optional
        System label
    time_dependent : bool, optional
        Flag for explicit time dependence
    exact_flow : function (t0, h, x) -> x', optional
        Flow map of the system
    flow_class : str, optional
        "analytic" or "reference-numeric"
    params : dictionary, optional
        Physical constants, kept for logging
    hess_K, hess_V : functions (arg, t) -> array (N,d,d), optional
        Hessians, needed for exact integrator Jacobians

    Returns
    ---------------------------
    sys : dictionary
        Hamiltonian system
    """
    if dim < 1:
        fatal_error(f"hamiltonians.separable_system() requires dim >= 1, not {dim}")
    def vector_field(t,x):
        x = np.asarray(x,dtype=float)
        p,q = x[...,:dim],x[...,dim:]
        return np.concatenate([-grad_V(q,t),grad_K(p,t)],axis=-1)
    sys = {'name':name,'dim':dim,'separable':True,'time_dependent':time_dependent,'params':{} if params is None else dict(params)}
    sys['grad_K_t'] = grad_K
    sys['grad_V_t'] = grad_V
    sys['hess_K_t'] = hess_K
    sys['hess_V_t'] = hess_V
    sys['grad_K'] = lambda p: grad_K(p,0.0)
    sys['grad_V'] = lambda q: grad_V(q,0.0)
    sys['hamiltonian'] = hamiltonian
    sys['vector_field'] = vector_field
    sys['exact_flow'] = exact_flow
    sys['flow_class'] = flow_class
    return sys

def symbolic_separable_system(K_expr,V_expr,name,params=None):
    """
    Builds a d=1 separable system from sympy expressions of K(p,t) and V(q,t)

    Arguments
    ---------------------------
    K_expr : sympy expression
        Kinetic part in symbols p, t
    V_expr : sympy expression
        Potential part in symbols q, t
    name : str
        System label
    params : dictionary, optional
        Physical constants, kept for logging

    Returns
    ---------------------------
    sys : dictionary
        Hamiltonian system without an exact flow
    """
    time_dependent = (t_sym in K_expr.free_symbols) or (t_sym in V_expr.free_symbols)
    return separable_system(1,_gradient_func(sympy.diff(K_expr,p_sym),p_sym),_gradient_func(sympy.diff(V_expr,q_sym),q_sym),_energy_func(K_expr+V_expr),name=name,time_dependent=time_dependent,params=params,
                            hess_K=_hessian_func(sympy.diff(K_expr,p_sym,2),p_sym),hess_V=_hessian_func(sympy.diff(V_expr,q_sym,2),q_sym))

def pendulum():
    """
    Mathematical pendulum H(p,q) = p^2/2 - cos(q)

    Returns
    ---------------------------
    sys : dictionary
        Hamiltonian system, exact_flow is the composition6 integrator with 10 substeps per step
    """
    sys = symbolic_separable_system(p_sym**2/2,-sympy.cos(q_sym),"pendulum")
    sys['exact_flow'] = lambda t0,h,x: integrators.composition_flow(sys,t0,h,x,substeps=10)
    sys['flow_class'] = "reference-numeric"
    return sys

def linear_nonseparable(coupling=0.4):
    """
    Linear non-separable system H(p,q) = p^2/2 + c p q + q^2/2

    Arguments
    ---------------------------
    coupling : float, optional
        Coupling constant c, |c| < 1 keeps the flow bounded

    Returns
    ---------------------------
    sys : dictionary
        Hamiltonian system with an analytic matrix exponential flow, no split gradients
    """
    H = p_sym**2/2 + coupling*p_sym*q_sym + q_sym**2/2
    # x' = A x with x = (p,q)
    A = np.array([[-coupling,-1.0],[1.0,coupling]])
    def vector_field(t,x):
        return np.asarray(x,dtype=float) @ A.T
    def exact_flow(t0,h,x):
        x = np.asarray(x,dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        h = np.broadcast_to(np.asarray(h,dtype=float),(x.shape[0],))
        h_unique,h_index = np.unique(h,return_inverse=True)
        props = np.stack([expm(hi*A) for hi in h_unique])
        y = np.einsum("nij,nj->ni",props[h_index.ravel()],x)
        y = np.where((h == 0.0)[:,None],x,y)
        return y[0] if single else y
    sys = {'name':"linear_nonseparable",'dim':1,'separable':False,'time_dependent':False,'params':{'coupling':coupling}}
    sys['grad_K'] = sys['grad_V'] = sys['grad_K_t'] = sys['grad_V_t'] = None
    sys['hess_K_t'] = sys['hess_V_t'] = None
    sys['hamiltonian'] = _energy_func(H)
    sys['vector_field'] = vector_field
    sys['exact_flow'] = exact_flow
    sys['flow_class'] = "analytic"
    sys['matrix'] = A
    return sys

def forced_harmonic_oscillator(omega0=1.0,omega=2.0,f0=1.0):
    """
    Harmonic oscillator with a sinusoidal external force, H = p^2/2 + omega0^2 q^2/2 - f0 sin(omega t) q

    Arguments
    ---------------------------
    omega0 : float, optional
        Natural frequency, must be positive
    omega : float, optional
        Driving frequency, must differ from omega0
    f0 : float, optional
        Driving amplitude

    Returns
    ---------------------------
    sys : dictionary
        Time-dependent Hamiltonian system with an analytic flow from any initial time

    Notes
    ---------------------------
    The general solution q(t) = A cos(omega0 t) + B sin(omega0 t) + f0 sin(omega t)/(omega0^2 - omega^2)
    has its constants fitted to the state at t0 through a 2x2 linear solve
    """
    if not omega0 > 0:
        fatal_error(f"forced_harmonic_oscillator requires omega0 > 0, not {omega0}")
    if omega0 == omega:
        fatal_error(f"forced_harmonic_oscillator is resonant for omega0 = omega = {omega}, ω0² - ω² = 0")
    amp = f0/(omega0**2 - omega**2)
    K = p_sym**2/2
    V = omega0**2*q_sym**2/2 - f0*sympy.sin(omega*t_sym)*q_sym
    sys = symbolic_separable_system(K,V,"forced_harmonic_oscillator",params={'omega0':omega0,'omega':omega,'f0':f0})
    def exact_flow(t0,h,x):
        x = np.asarray(x,dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        n = x.shape[0]
        t0 = np.broadcast_to(np.asarray(t0,dtype=float),(n,))
        h = np.broadcast_to(np.asarray(h,dtype=float),(n,))
        c0,s0 = np.cos(omega0*t0),np.sin(omega0*t0)
        # rows: q(t0) and p(t0) = dq/dt(t0) in terms of (A,B)
        lhs = np.stack([np.stack([c0,s0],axis=-1),np.stack([-omega0*s0,omega0*c0],axis=-1)],axis=1)
        rhs = np.stack([x[:,1] - amp*np.sin(omega*t0),x[:,0] - amp*omega*np.cos(omega*t0)],axis=-1)
        coeffs = np.linalg.solve(lhs,rhs[...,None])[...,0]
        t1 = t0 + h
        c1,s1 = np.cos(omega0*t1),np.sin(omega0*t1)
        q1 = coeffs[:,0]*c1 + coeffs[:,1]*s1 + amp*np.sin(omega*t1)
        p1 = omega0*(-coeffs[:,0]*s1 + coeffs[:,1]*c1) + amp*omega*np.cos(omega*t1)
        y = np.stack([p1,q1],axis=-1)
        y = np.where((h == 0.0)[:,None],x,y)
        return y[0] if single else y
    sys['exact_flow'] = exact_flow
    sys['flow_class'] = "analytic"
    return sys

def system_builder(system_dict):
    """
    Builds a Hamiltonian system from a checked system dictionary

    Arguments
    ---------------------------
    system_dict : dictionary
        System properties, 'name' and 'params'

    Returns
    ---------------------------
    sys : dictionary
        Hamiltonian system
    """
    name = system_dict['name']
    params = system_dict.get('params',{})
    if name == "pendulum":
        return pendulum()
    elif name == "linear_nonseparable":
        return linear_nonseparable(**params)
    elif name == "forced_harmonic_oscillator":
        return forced_harmonic_oscillator(**params)
    else:
        fatal_error(f"No Hamiltonian system recipe for {name} found in hamiltonians.system_builder()")

def energy(sys,x,t=0.0):
    """
    Energy of states x = (p,q), shape (2d) or (N,2d)
    """
    x = np.asarray(x,dtype=float)
    d = sys['dim']
    return sys['hamiltonian'](x[...,:d],x[...,d:],t)
