"""
tsympnets.networks module for dataset synthesis, Adam training and rollout evaluation
"""
import os
import numpy as np
from tqdm import tqdm

from ..output import fatal_error,section
from ..dynamics import hamiltonians,integrators
from .autodiff import loss_and_gradients
from .sympnet import NON_AUTONOMOUS,flatten_params,forward,param_labels,save_checkpoint,unflatten_params

LABEL_ORACLES = ["analytic","composition6_substeps"]


def sample_dataset(dataset_dict,sys=None):
    """
    Draws training tuples ([x, t, h], y) with y the flow of x over h from clock time t

    Arguments
    ---------------------------
    dataset_dict : dictionary
        Checked dataset properties: 'system' (name), 'n_samples', 'x_box' (2d pairs), 'h_range',
        't_range' (or None), 'label_oracle', 'substeps', 'seed'
    sys : dictionary, optional
        Pre-built Hamiltonian system, built from dataset_dict['system'] when None

    Returns
    ---------------------------
    dataset : dictionary
        'x' (N,2d), 't' (N) or None, 'h' (N), 'y' (N,2d)

    Notes
    ---------------------------
    Draw order from one numpy generator: states, then clock times, then step sizes
    """
    if sys is None:
        sys = hamiltonians.system_builder({'name':dataset_dict['system'],'params':dataset_dict.get('system_params',{})})
    n = dataset_dict['n_samples']
    box = np.asarray(dataset_dict['x_box'],dtype=float)
    if box.shape != (2*sys['dim'],2):
        fatal_error(f"x_box needs {2*sys['dim']} ranges for system {sys['name']}, got shape {box.shape}")
    rng = np.random.default_rng(dataset_dict['seed'])
    x = rng.uniform(box[:,0],box[:,1],size=(n,2*sys['dim']))
    t = None
    if not dataset_dict.get('t_range') is None:
        t = rng.uniform(dataset_dict['t_range'][0],dataset_dict['t_range'][1],size=n)
    h = rng.uniform(dataset_dict['h_range'][0],dataset_dict['h_range'][1],size=n)
    t0 = np.zeros(n) if t is None else t
    oracle = dataset_dict['label_oracle']
    if oracle == "analytic":
        if sys['flow_class'] != "analytic":
            fatal_error(f"System {sys['name']} has no analytic flow, use label_oracle composition6_substeps")
        y = sys['exact_flow'](t0,h,x)
    elif oracle == "composition6_substeps":
        y = integrators.composition_flow(sys,t0,h,x,substeps=dataset_dict['substeps'])
    else:
        fatal_error(f"label_oracle {oracle} is not valid, use one of {LABEL_ORACLES}")
    return {'x':x,'t':t,'h':h,'y':y}

def init_adam_state(n_params):
    return {'step':0,'m':np.zeros(n_params),'v':np.zeros(n_params)}

def adam_step(params,grads,state,config):
    """
    One bias-corrected Adam update

    Arguments
    ---------------------------
    params : array-like
        Flat parameters
    grads : array-like
        Flat gradients
    state : dictionary
        'step', first moments 'm' and second moments 'v'
    config : dictionary
        'learning_rate', 'beta1', 'beta2', 'epsilon'

    Returns
    ---------------------------
    params : array-like
        Updated parameters (new array)
    state : dictionary
        Updated state (new arrays)
    """
    if state['step'] < 0:
        fatal_error(f"Adam step counter must be >= 0, not {state['step']}")
    beta1,beta2 = config['beta1'],config['beta2']
    step = state['step'] + 1
    m = beta1*state['m'] + (1.0 - beta1)*grads
    v = beta2*state['v'] + (1.0 - beta2)*grads**2
    m_hat = m/(1.0 - beta1**step)
    v_hat = v/(1.0 - beta2**step)
    params = params - config['learning_rate']*m_hat/(np.sqrt(v_hat) + config['epsilon'])
    return params,{'step':step,'m':m,'v':v}

def train(model,dataset,train_dict,out_dir=None,run_id="model",progress=True):
    """
    Full-batch Adam minimisation of the mean squared error

    Arguments
    ---------------------------
    model : dictionary
        Initial SympNet model
    dataset : dictionary
        Dataset columns
    train_dict : dictionary
        Checked training properties: 'epochs', 'learning_rate', 'beta1', 'beta2', 'epsilon',
        'checkpoint_every', 'n_jobs', 'chunk_size'
    out_dir : str, optional
        Folder for periodic checkpoints
    run_id : str, optional
        Checkpoint file stem
    progress : bool, optional
        Show a tqdm progress bar

    Returns
    ---------------------------
    model : dictionary
        Trained model
    history : array-like (epochs)
        Loss before each update
    """
    if len(dataset['h']) == 0:
        fatal_error("train() requires a nonempty dataset")
    if (model['kind'] in NON_AUTONOMOUS) and dataset.get('t') is None:
        fatal_error(f"Model kind {model['kind']} needs clock times in the dataset")
    epochs = train_dict['epochs']
    params = flatten_params(model)
    state = init_adam_state(len(params))
    history = np.zeros(epochs)
    if progress:
        section(f"Training {model['kind']} for {epochs} epochs")
    for epoch in tqdm(range(epochs),disable=not progress,desc=model['kind']):
        current = unflatten_params(model,params)
        loss,grads = loss_and_gradients(current,dataset,n_jobs=train_dict['n_jobs'],chunk_size=train_dict['chunk_size'])
        if not np.isfinite(loss):
            labels = param_labels(model)
            worst = int(np.argmax(np.abs(np.nan_to_num(params,nan=np.inf))))
            fatal_error(f"Loss is {loss} at epoch {epoch}, largest parameter {labels[worst]} = {params[worst]}")
        history[epoch] = loss
        params,state = adam_step(params,flatten_params(grads),state,train_dict)
        every = train_dict['checkpoint_every']
        if (not out_dir is None) and every > 0 and (epoch + 1)%every == 0:
            save_checkpoint(unflatten_params(model,params),os.path.join(out_dir,f"{run_id}_epoch{epoch+1}.json"))
    return unflatten_params(model,params),history

def rollout(model,x0,h,k,t0=0.0):
    """
    k forward evaluations with fixed step h, non-autonomous kinds see the clock t0 + i*h at step i

    Returns
    ---------------------------
    trajectory : array-like (k+1,2d)
    """
    if k < 0:
        fatal_error(f"rollout() requires k >= 0, not {k}")
    x = np.asarray(x0,dtype=float)
    trajectory = [x]
    for i in range(k):
        x = forward(model,h,t0 + i*h,x)
        trajectory.append(x)
    return np.stack(trajectory)

def reference_trajectory(sys,x0,h,k,t0=0.0):
    """
    k exact_flow steps of the system from x0
    """
    if sys['exact_flow'] is None:
        fatal_error(f"System {sys['name']} has no exact flow")
    x = np.asarray(x0,dtype=float)
    trajectory = [x]
    for i in range(k):
        x = sys['exact_flow'](t0 + i*h,h,x)
        trajectory.append(x)
    return np.stack(trajectory)

def evaluate_rollout(model,sys,x0,h,k,t0=0.0,dataset=None):
    """
    Test metrics of a model against the reference flow

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    sys : dictionary
        Hamiltonian system with an exact flow
    x0 : array-like (2d)
        Initial state
    h : float
        Step size
    k : int
        Number of steps
    t0 : float, optional
        Initial clock time
    dataset : dictionary, optional
        Training data, adds the final training MSE

    Returns
    ---------------------------
    metrics : dictionary
        'times', 'prediction', 'reference', 'max_error' (max infinity norm), 'energy_drift'
        and 'train_mse' when dataset is given

    Notes
    ---------------------------
    Energy drift is max_i |H(x_i) - H(x_0)| for autonomous systems and max_i |H(x_i, t_i) - H(y_i, t_i)|
    against the reference y for time-dependent ones
    """
    prediction = rollout(model,x0,h,k,t0)
    reference = reference_trajectory(sys,x0,h,k,t0)
    times = t0 + h*np.arange(k + 1)
    metrics = {'times':times,'prediction':prediction,'reference':reference}
    metrics['max_error'] = float(np.max(np.abs(prediction - reference)))
    energy_pred = hamiltonians.energy(sys,prediction,times)
    if sys['time_dependent']:
        metrics['energy_drift'] = float(np.max(np.abs(energy_pred - hamiltonians.energy(sys,reference,times))))
    else:
        metrics['energy_drift'] = float(np.max(np.abs(energy_pred - energy_pred[0])))
    if not dataset is None:
        t = dataset.get('t') if model['kind'] in NON_AUTONOMOUS else None
        metrics['train_mse'] = float(np.mean(np.sum((forward(model,dataset['h'],t,dataset['x']) - dataset['y'])**2,axis=-1)))
    return metrics
