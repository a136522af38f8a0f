"""
tsympnets module for checking input dictionaries are usable
"""
import numpy as np
import sympy

from .input import read_package_config
from .output import fatal_error,warning
from .dynamics import hamiltonians
from .networks import sympnet


def to_float(value,name):
    """
    Evaluates a number or a sympy-readable string such as "sqrt(2)" or "-pi/2"

    Arguments
    ---------------------------
    value : float, int or str
        Value to convert
    name : str
        Variable name for error messages

    Returns
    ---------------------------
    value : float
    """
    if isinstance(value,bool):
        fatal_error(f"{name} must be a number, not {value}")
    if isinstance(value,(int,float,np.integer,np.floating)):
        return float(value)
    try:
        result = float(sympy.sympify(str(value)).evalf())
    except (sympy.SympifyError,TypeError,ValueError):
        fatal_error(f"{name} = {value} cannot be evaluated to a number")
    if not np.isfinite(result):
        fatal_error(f"{name} = {value} is not finite")
    return result

def to_range(value,name,lower=None):
    """
    Checks a pair [low, high] with low <= high (and low >= lower when given)
    """
    if not isinstance(value,(list,tuple)) or len(value) != 2:
        fatal_error(f"{name} must be a pair [low, high], not {value}")
    low,high = to_float(value[0],f"{name}[0]"),to_float(value[1],f"{name}[1]")
    if low > high:
        fatal_error(f"{name} = {value} is empty, low > high")
    if not lower is None and low < lower:
        fatal_error(f"{name} must not go below {lower}, got {value}")
    return [low,high]

def to_int(value,name,minimum):
    if isinstance(value,bool) or not isinstance(value,(int,np.integer)) or value < minimum:
        fatal_error(f"{name} must be an integer >= {minimum}, not {value}")
    return int(value)

def check_system(system_dict):
    """
    Checks the properties of a system dictionary

    Arguments
    ---------------------------
    system_dict : dictionary
        System information, 'name' and optional 'params'

    Returns
    ---------------------------
    system_dict : dictionary
        System information with defaults, the built system stored under 'system'
    """
    if not type(system_dict) is dict:
        fatal_error("dictionary_checks.check_system() must be passed a dictionary as its argument")
    systems = read_package_config("systems")
    if not 'name' in system_dict.keys():
        fatal_error(f"system_data variable name is required, use one of {list(systems.keys())}")
    if not system_dict['name'] in systems.keys():
        fatal_error(f"system_data['name'] = {system_dict['name']} is not valid, use one of {list(systems.keys())}")
    params = dict(systems[system_dict['name']]['params'])
    given = system_dict.get('params',{}) or {}
    for key,value in given.items():
        if not key in params.keys():
            fatal_error(f"system_data parameter {key} is not valid for {system_dict['name']}, options are {list(params.keys())}")
        params[key] = to_float(value,f"system_data['params']['{key}']")
    system_dict['params'] = params
    system_dict['system'] = hamiltonians.system_builder(system_dict)
    return system_dict

def check_dataset(dataset_dict,system_dict):
    """
    Checks the properties of a dataset dictionary

    Arguments
    ---------------------------
    dataset_dict : dictionary
        Dataset information
    system_dict : dictionary
        System information, must have been checked via check_system

    Returns
    ---------------------------
    dataset_dict : dictionary
        Dataset information with defaults from config/datasets.yaml, keyed by system
    """
    if not type(dataset_dict) is dict:
        fatal_error("dictionary_checks.check_dataset() must be passed a dictionary as its argument")
    sys = system_dict['system']
    dataset_config = read_package_config("datasets")
    defaults = {**dataset_config['common'],**dataset_config.get(system_dict['name'],{})}
    for key,value in defaults.items():
        if not key in dataset_dict.keys():
            dataset_dict[key] = value
    dataset_dict['system'] = system_dict['name']
    dataset_dict['system_params'] = system_dict['params']
    if not 'label_oracle' in dataset_dict.keys():
        dataset_dict['label_oracle'] = read_package_config("systems")[system_dict['name']]['label_oracle']
    if not 'x_box' in dataset_dict.keys():
        fatal_error(f"dataset_data variable x_box is required, config/datasets.yaml has no box for {system_dict['name']}")
    box = dataset_dict['x_box']
    if not isinstance(box,(list,tuple)) or len(box) != 2*sys['dim']:
        fatal_error(f"dataset_data['x_box'] needs {2*sys['dim']} ranges for system {system_dict['name']}")
    dataset_dict['x_box'] = [to_range(pair,f"dataset_data['x_box'][{i}]") for i,pair in enumerate(box)]
    dataset_dict['h_range'] = to_range(dataset_dict['h_range'],"dataset_data['h_range']",lower=0.0)
    if sys['time_dependent'] and dataset_dict['t_range'] is None:
        fatal_error(f"dataset_data variable t_range is required for the time-dependent system {system_dict['name']}")
    if not dataset_dict['t_range'] is None:
        dataset_dict['t_range'] = to_range(dataset_dict['t_range'],"dataset_data['t_range']")
    dataset_dict['n_samples'] = to_int(dataset_dict['n_samples'],"dataset_data['n_samples']",1)
    dataset_dict['substeps'] = to_int(dataset_dict['substeps'],"dataset_data['substeps']",1)
    dataset_dict['seed'] = to_int(dataset_dict['seed'],"dataset_data['seed']",0)
    if not dataset_dict['label_oracle'] in ["analytic","composition6_substeps"]:
        fatal_error(f"dataset_data['label_oracle'] = {dataset_dict['label_oracle']} is not valid, use analytic or composition6_substeps")
    if dataset_dict['label_oracle'] == "analytic" and sys['flow_class'] != "analytic":
        fatal_error(f"System {system_dict['name']} has no analytic flow, use label_oracle composition6_substeps")
    if dataset_dict['label_oracle'] == "composition6_substeps" and not sys['separable']:
        fatal_error(f"System {system_dict['name']} is not separable, use label_oracle analytic")
    return dataset_dict

def check_model(model_dict,system_dict):
    """
    Checks the properties of a model dictionary

    Arguments
    ---------------------------
    model_dict : dictionary
        Model information, 'kind', architecture variables, optional 'seed'
    system_dict : dictionary
        System information, must have been checked via check_system

    Returns
    ---------------------------
    model_dict : dictionary
        Model information, the completed architecture under 'arch'
    """
    if not type(model_dict) is dict:
        fatal_error("dictionary_checks.check_model() must be passed a dictionary as its argument")
    if not 'kind' in model_dict.keys():
        fatal_error(f"model_data variable kind is required, use one of {sympnet.KINDS}")
    kind = model_dict['kind']
    if kind in sympnet.NON_AUTONOMOUS and not system_dict['system']['time_dependent']:
        fatal_error(f"Non-autonomous kind {kind} requires a time-dependent system, {system_dict['name']} is autonomous")
    if not 'arch' in model_dict.keys():
        model_dict['arch'] = {key:value for key,value in model_dict.items() if not key in ['kind','seed','arch','params']}
    model_dict['arch'] = sympnet.check_arch(kind,model_dict['arch'])
    model_dict['activation'] = model_dict['arch']['activation']
    sympnet.activation_builder(model_dict['activation'])
    if not 'seed' in model_dict.keys():
        model_dict['seed'] = 0
    model_dict['seed'] = to_int(model_dict['seed'],"model_data['seed']",0)
    model_dict['d'] = system_dict['system']['dim']
    return model_dict

def check_training(train_dict,ci=False):
    """
    Checks the properties of a training dictionary

    Arguments
    ---------------------------
    train_dict : dictionary
        Training information
    ci : bool, optional
        Divide the epochs by ci_divisor and use ci_learning_rate when given

    Returns
    ---------------------------
    train_dict : dictionary
        Training information with defaults from config/training.yaml
    """
    if not type(train_dict) is dict:
        fatal_error("dictionary_checks.check_training() must be passed a dictionary as its argument")
    defaults = read_package_config("training")
    for key,value in defaults.items():
        if not key in train_dict.keys():
            train_dict[key] = value
    train_dict['epochs'] = to_int(train_dict['epochs'],"train_data['epochs']",1)
    for key in ['learning_rate','beta1','beta2','epsilon']:
        train_dict[key] = to_float(train_dict[key],f"train_data['{key}']")
    if not train_dict['learning_rate'] > 0:
        fatal_error(f"train_data['learning_rate'] must be positive, not {train_dict['learning_rate']}")
    for key in ['beta1','beta2']:
        if not 0 <= train_dict[key] < 1:
            fatal_error(f"train_data['{key}'] must lie in [0,1), not {train_dict[key]}")
    if not train_dict['epsilon'] > 0:
        fatal_error(f"train_data['epsilon'] must be positive, not {train_dict['epsilon']}")
    train_dict['checkpoint_every'] = to_int(train_dict['checkpoint_every'],"train_data['checkpoint_every']",0)
    train_dict['n_jobs'] = int(train_dict['n_jobs'])
    if not train_dict['chunk_size'] is None:
        train_dict['chunk_size'] = to_int(train_dict['chunk_size'],"train_data['chunk_size']",1)
    if not train_dict['full_batch']:
        fatal_error("Only full-batch training is implemented, set train_data['full_batch'] = true")
    if ci and not train_dict.get('ci_applied',False):
        divisor = to_int(train_dict['ci_divisor'],"train_data['ci_divisor']",1)
        epochs = max(1,train_dict['epochs']//divisor)
        warning(f"CI mode: epochs reduced from {train_dict['epochs']} to {epochs}")
        train_dict['epochs'] = epochs
        if not train_dict['ci_learning_rate'] is None:
            learning_rate = to_float(train_dict['ci_learning_rate'],"train_data['ci_learning_rate']")
            if not learning_rate > 0:
                fatal_error(f"train_data['ci_learning_rate'] must be positive, not {learning_rate}")
            warning(f"CI mode: learning rate changed from {train_dict['learning_rate']:.1e} to {learning_rate:.1e}")
            train_dict['learning_rate'] = learning_rate
        train_dict['ci_applied'] = True
    return train_dict

def check_test(test_dict,system_dict):
    """
    Checks the properties of a test rollout dictionary

    Arguments
    ---------------------------
    test_dict : dictionary
        Rollout information, 'x0', 'h', 'k' and optional 't0'
    system_dict : dictionary
        System information, must have been checked via check_system

    Returns
    ---------------------------
    test_dict : dictionary
    """
    if not type(test_dict) is dict:
        fatal_error("dictionary_checks.check_test() must be passed a dictionary as its argument")
    for var in ['x0','h','k']:
        if not var in test_dict.keys():
            fatal_error(f"test_data variable {var} is required")
    d = system_dict['system']['dim']
    if not isinstance(test_dict['x0'],(list,tuple)) or len(test_dict['x0']) != 2*d:
        fatal_error(f"test_data['x0'] must have {2*d} entries")
    test_dict['x0'] = [to_float(v,"test_data['x0']") for v in test_dict['x0']]
    test_dict['h'] = to_float(test_dict['h'],"test_data['h']")
    test_dict['k'] = to_int(test_dict['k'],"test_data['k']",0)
    test_dict['t0'] = to_float(test_dict.get('t0',0.0),"test_data['t0']")
    return test_dict

def check_run(run_dict):
    """
    Checks the properties of a run dictionary (output folder, workers, ci flag)
    """
    if not type(run_dict) is dict:
        fatal_error("dictionary_checks.check_run() must be passed a dictionary as its argument")
    if not 'out_dir' in run_dict.keys():
        run_dict['out_dir'] = "output"
    if not 'n_jobs' in run_dict.keys():
        run_dict['n_jobs'] = 1
    if not 'ci' in run_dict.keys():
        run_dict['ci'] = False
    if not 'tag' in run_dict.keys():
        run_dict['tag'] = None
    return run_dict
