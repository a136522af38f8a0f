"""
tsympnets module for handling output
"""
import os
import csv
import json
import numpy as np
import matplotlib
matplotlib.use("Agg")
from matplotlib import pyplot as plt

spacer_length = 55


def fatal_error(err_string):
    """
    Display error string and exit program

    Arguments
    ---------------------------
    err_string: string
        Error string to be displayed

    Returns
    ---------------------------
    None
    """
    print("#"*spacer_length)
    print("                   Fatal Error")
    print("#"*spacer_length)
    raise SystemExit(err_string)

def warning(err_string):
    """
    Display error string

    Arguments
    ---------------------------
    err_string: string
        Error string to be displayed

    Returns
    ---------------------------
    None
    """
    print("*"*spacer_length)
    print("                   Warning")
    print("*"*spacer_length)
    print(err_string)
    print("*"*spacer_length)

def section(title):
    """
    Print a section banner in the run log

    Arguments
    ---------------------------
    title : string
        Banner text
    """
    print("="*spacer_length)
    print(title)
    print("="*spacer_length)

def ensure_dir(path):
    if path:
        os.makedirs(path,exist_ok=True)

def _native(x,exclude=None):
    if isinstance(x,dict):
        return process_dict(x,exclude)
    elif isinstance(x,np.ndarray):
        return x.tolist()
    elif isinstance(x,np.generic):
        return x.item()
    elif isinstance(x,(list,tuple)):
        return [_native(v,exclude) for v in x]
    return x

def process_dict(d,exclude=None):
    """
    Converts a dictionary holding numpy objects into native python types (for json)

    Arguments
    ---------------------------
    d : dictionary
        Dictionary to convert
    exclude : list, optional
        Keys to drop (callables, built objects)

    Returns
    ---------------------------
    new_d : dictionary
        Copy of d with lists, floats and ints only
    """
    new_d = {}
    for key,value in d.items():
        if not exclude is None and key in exclude:
            continue
        if isinstance(value,dict):
            new_d[key] = process_dict(value,exclude)
        elif callable(value):
            continue
        elif isinstance(value,np.ndarray):
            new_d[key] = value.tolist()
        elif isinstance(value,np.generic):
            new_d[key] = value.item()
        elif isinstance(value,(list,tuple)):
            new_d[key] = [_native(x,exclude) for x in value]
        else:
            new_d[key] = value
    return new_d

def get_run_id(system_name,model_dict,tag=None):
    """
    Builds an output file id code

    Arguments
    ---------------------------
    system_name : string
        Name of the Hamiltonian system
    model_dict : dictionary
        Model properties (kind, arch, seed)
    tag : string (optional)
        String added to file ID

    Returns
    ---------------------------
    run_id : string
        File stem for the run
    """
    arch = model_dict['arch']
    arch_str = f"L{arch['layers']}"
    if 'width' in arch.keys():
        arch_str += f"-W{arch['width']}"
    if 'sublayers' in arch.keys():
        arch_str += f"-S{arch['sublayers']}"
    run_id = f"{system_name}_{model_dict['kind']}_{arch_str}_seed{model_dict['seed']}"
    if not tag is None:
        run_id += "_"+tag
    return run_id

def write_json(data,f_name):
    """
    Write a dictionary to a json file (numpy objects converted)

    Arguments
    ---------------------------
    data : dictionary
        Data to write
    f_name : string
        Output file path
    """
    ensure_dir(os.path.dirname(f_name))
    with open(f_name,"w") as out_file:
        json.dump(process_dict(data),out_file,indent=1)

def write_dataset(dataset,f_name):
    """
    Write a dataset as JSON lines, one sample {x, t?, h, y} per line

    Arguments
    ---------------------------
    dataset : dictionary
        Columns 'x' (N,2d), 'h' (N), 'y' (N,2d) and optional 't' (N)
    f_name : string
        Output file path

    Notes
    ---------------------------
    Python float repr is round-trip exact, so re-reading reproduces the arrays bitwise
    """
    ensure_dir(os.path.dirname(f_name))
    with open(f_name,"w") as out_file:
        for i in range(len(dataset['h'])):
            sample = {'x':[float(v) for v in dataset['x'][i]]}
            if dataset.get('t') is not None:
                sample['t'] = float(dataset['t'][i])
            sample['h'] = float(dataset['h'][i])
            sample['y'] = [float(v) for v in dataset['y'][i]]
            out_file.write(json.dumps(sample)+"\n")

def write_loss_history(history,f_name):
    """
    Write loss history as CSV with header epoch,loss
    """
    ensure_dir(os.path.dirname(f_name))
    with open(f_name,"w",newline="") as out_file:
        writer = csv.writer(out_file)
        writer.writerow(["epoch","loss"])
        for epoch,loss in enumerate(history):
            writer.writerow([epoch,repr(float(loss))])

def trajectory_header(d):
    """
    Fixed CSV header for predicted vs reference trajectories

    Arguments
    ---------------------------
    d : int
        Phase space half-dimension

    Returns
    ---------------------------
    header : list of str
    """
    header = ["step","time"]
    for label in ["pred","ref"]:
        header += [f"p_{label}_{i+1}" for i in range(d)]
        header += [f"q_{label}_{i+1}" for i in range(d)]
    return header

def write_trajectory_csv(times,prediction,reference,f_name):
    """
    Write predicted and reference trajectories side by side

    Arguments
    ---------------------------
    times : array-like float (k+1)
        Clock time of each state
    prediction : array-like float (k+1,2d)
        Model rollout
    reference : array-like float (k+1,2d)
        Reference flow trajectory
    f_name : string
        Output file path
    """
    d = prediction.shape[1]//2
    ensure_dir(os.path.dirname(f_name))
    with open(f_name,"w",newline="") as out_file:
        writer = csv.writer(out_file)
        writer.writerow(trajectory_header(d))
        for i in range(len(times)):
            writer.writerow([i,repr(float(times[i]))]+[repr(float(v)) for v in prediction[i]]+[repr(float(v)) for v in reference[i]])

def phase_portrait(dataset,prediction,reference,title,f_name):
    """
    SVG phase portrait in the style of the experiment figures

    Arguments
    ---------------------------
    dataset : dictionary
        Training data, inputs drawn as blue circles and labels as yellow points joined by dashed lines
    prediction : array-like float (k+1,2)
        Model rollout, drawn as a solid line with markers
    reference : array-like float (k+1,2)
        Reference test trajectory, drawn as a solid line
    title : string
        Figure title
    f_name : string
        Output file path
    """
    d = prediction.shape[1]//2
    ensure_dir(os.path.dirname(f_name))
    fig,ax = plt.subplots(figsize=(5,5))
    x_in = dataset['x']
    y_out = dataset['y']
    for i in range(len(x_in)):
        ax.plot([x_in[i,d],y_out[i,d]],[x_in[i,0],y_out[i,0]],linestyle="--",color="0.6",linewidth=0.6)
    ax.scatter(x_in[:,d],x_in[:,0],facecolors="none",edgecolors="tab:blue",s=14,label="training input")
    ax.scatter(y_out[:,d],y_out[:,0],color="gold",s=10,label="training label")
    ax.plot(reference[:,d],reference[:,0],color="black",linewidth=1.2,label="reference")
    ax.plot(prediction[:,d],prediction[:,0],color="orange",linewidth=1.2,marker=".",markersize=3,label="prediction")
    ax.set_xlabel("q")
    ax.set_ylabel("p")
    ax.set_title(title)
    ax.legend(loc="best",fontsize=7)
    fig.savefig(f_name,format="svg")
    plt.close(fig)

def rate_plot(m_values,errors,slope,f_name):
    """
    SVG log-log plot of composition errors against the substep count m
    """
    ensure_dir(os.path.dirname(f_name))
    fig,ax = plt.subplots(figsize=(5,4))
    ax.loglog(m_values,errors,marker="o",color="tab:blue",label=f"measured (slope {slope:.3f})")
    ax.loglog(m_values,errors[0]*m_values[0]/np.asarray(m_values,dtype=float),linestyle="--",color="0.5",label="1/m")
    ax.set_xlabel("m")
    ax.set_ylabel("max error on grid")
    ax.legend(loc="best",fontsize=8)
    fig.savefig(f_name,format="svg")
    plt.close(fig)

def run_write(system_dict,model_dict,train_dict):
    """
    Write run parameters to stdout

    Arguments
    ---------------------------
    system_dict : dictionary
        System properties
    model_dict : dictionary
        Model properties
    train_dict : dictionary
        Training properties
    """
    section("Run Parameters")
    print(f"System: {system_dict['name']}")
    for key,value in system_dict.get('params',{}).items():
        print(f"{key}: {value}")
    section("Model Parameters")
    print(f"Architecture kind: {model_dict['kind']}")
    for key,value in model_dict['arch'].items():
        print(f"{key}: {value}")
    print(f"Activation: {model_dict['activation']}")
    print(f"Seed: {model_dict['seed']}")
    section("Training Parameters")
    print(f"Epochs: {train_dict['epochs']}")
    print(f"Learning rate: {train_dict['learning_rate']:.2e}")
    print(f"Adam betas: ({train_dict['beta1']}, {train_dict['beta2']}), epsilon: {train_dict['epsilon']:.1e}")
