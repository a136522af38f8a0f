"""
tsympnets module with the pipelines behind the command line: data generation, training,
evaluation, experiments, the composition rate study and verification
"""
import os
import copy
import numpy as np
from joblib import Parallel,delayed
from tqdm import tqdm

from .output import fatal_error,warning,section,run_write,get_run_id,write_dataset,write_json,write_loss_history,write_trajectory_csv,phase_portrait,rate_plot
from .input import read_package_config,read_dataset
from .dictionary_checks import check_system,check_dataset,check_model,check_training,check_test,check_run
from .networks import sympnet,training
from . import verify

EXPERIMENTS = ["pendulum","linear","forced_ho","rate_study"]


def run_checks(system_data,dataset_data=None,model_data=None,train_data=None,test_data=None,run_data=None):
    """
    Processes dictionaries to prepare for calculations, will exit if this is not possible

    Arguments
    ---------------------------
    system_data : dictionary
        System properties
    dataset_data : dictionary, optional
        Dataset properties
    model_data : dictionary, optional
        Model properties
    train_data : dictionary, optional
        Training properties
    test_data : dictionary, optional
        Test rollout properties
    run_data : dictionary, optional
        Output folder, workers and ci flag

    Returns
    ---------------------------
    All given dictionaries checked, in the same order (None where not given)
    """
    run_data = check_run({} if run_data is None else run_data)
    system_data = check_system(system_data)
    if not dataset_data is None and not 'dataset_file' in dataset_data.keys():
        dataset_data = check_dataset(dataset_data,system_data)
    if not model_data is None:
        model_data = check_model(model_data,system_data)
    if not train_data is None:
        train_data = check_training(train_data,ci=run_data['ci'])
    if not test_data is None and len(test_data) > 0:
        test_data = check_test(test_data,system_data)
    else:
        test_data = None
    return system_data,dataset_data,model_data,train_data,test_data,run_data

def load_or_sample(dataset_data,system_data):
    """
    Reads dataset_data['dataset_file'] when given, samples a new dataset otherwise
    """
    if 'dataset_file' in dataset_data.keys():
        dataset = read_dataset(dataset_data['dataset_file'])
        if dataset['x'].shape[1] != 2*system_data['system']['dim']:
            fatal_error(f"Dataset {dataset_data['dataset_file']} does not match system {system_data['name']}")
        return dataset
    return training.sample_dataset(dataset_data,system_data['system'])

def run_gen_data(system_data,dataset_data,out_file):
    """
    Samples a dataset and writes it as JSON lines

    Returns
    ---------------------------
    dataset : dictionary
        Dataset columns
    """
    system_data,dataset_data,_,_,_,_ = run_checks(system_data,dataset_data)
    section(f"Generating {dataset_data['n_samples']} samples for {system_data['name']}")
    print(f"Label oracle: {dataset_data['label_oracle']}")
    print(f"Seed: {dataset_data['seed']}")
    dataset = training.sample_dataset(dataset_data,system_data['system'])
    write_dataset(dataset,out_file)
    print(f"Dataset written to {out_file}")
    return dataset

def structure_reports(model,metrics,test_data,dataset=None):
    """
    Symplectic residual and separability diagnostic of a trained model

    Arguments
    ---------------------------
    model : dictionary
        SympNet model
    metrics : dictionary
        Output of training.evaluate_rollout
    test_data : dictionary
        Checked test rollout properties
    dataset : dictionary, optional
        Training data, its states are added to the Jacobian points and used as separability probes

    Returns
    ---------------------------
    reports : dictionary
        'symplectic_residual' (max over rollout and training states) and 'separability'
    """
    tolerances = read_package_config("verify")['structural']
    D = sympnet.forward_jacobian(model,test_data['h'],metrics['times'],metrics['prediction'])
    residual = float(np.max(sympnet.symplectic_residual(D)))
    probes = metrics['prediction']
    if not dataset is None:
        t = dataset.get('t') if model['kind'] in sympnet.NON_AUTONOMOUS else None
        D = sympnet.forward_jacobian(model,dataset['h'],t,dataset['x'])
        residual = max(residual,float(np.max(sympnet.symplectic_residual(D))))
        probes = dataset['x']
    separability = None
    if len(probes) >= 2:
        diag = verify.separability_diagnostic(model,probes,t=test_data['t0'],tol=tolerances['separability_tol'])
        separability = dict(diag['measured'])
        separability['pass'] = diag['pass']
    return {'symplectic_residual':residual,'separability':separability}

def _write_evaluation(model,system_data,test_data,dataset,out_dir,run_id):
    """
    Rolls out the test trajectory and writes metrics, trajectory CSV and phase portrait
    """
    metrics = training.evaluate_rollout(model,system_data['system'],test_data['x0'],test_data['h'],test_data['k'],test_data['t0'],dataset=dataset)
    write_trajectory_csv(metrics['times'],metrics['prediction'],metrics['reference'],os.path.join(out_dir,f"{run_id}_trajectory.csv"))
    if not dataset is None:
        phase_portrait(dataset,metrics['prediction'],metrics['reference'],f"{system_data['name']}: {model['kind']}",os.path.join(out_dir,f"{run_id}_phase.svg"))
    summary = {'kind':model['kind'],'arch':model['arch'],'seed':model['seed'],'params':sympnet.param_count(model),'max_error':metrics['max_error'],'energy_drift':metrics['energy_drift']}
    if 'train_mse' in metrics.keys():
        summary['train_mse'] = metrics['train_mse']
    summary.update(structure_reports(model,metrics,test_data,dataset))
    write_json(summary,os.path.join(out_dir,f"{run_id}_metrics.json"))
    return summary

def run_training(system_data,dataset_data,model_data,train_data,test_data=None,run_data=None,progress=True):
    """
    Trains one model and writes checkpoint, loss history and (with test_data) test metrics

    Returns
    ---------------------------
    result : dictionary
        'model', 'history', 'metrics' (or None), 'run_id'
    """
    system_data,dataset_data,model_data,train_data,test_data,run_data = run_checks(system_data,dataset_data,model_data,train_data,test_data,run_data)
    if progress:
        run_write(system_data,model_data,train_data)
    dataset = load_or_sample(dataset_data,system_data)
    model = sympnet.init_model(model_data['kind'],model_data['d'],model_data['arch'],model_data['seed'])
    run_id = get_run_id(system_data['name'],model,run_data['tag'])
    out_dir = run_data['out_dir']
    model,history = training.train(model,dataset,train_data,out_dir=out_dir,run_id=run_id,progress=progress)
    sympnet.save_checkpoint(model,os.path.join(out_dir,f"{run_id}_checkpoint.json"))
    write_loss_history(history,os.path.join(out_dir,f"{run_id}_loss.csv"))
    metrics = None
    if not test_data is None:
        metrics = _write_evaluation(model,system_data,test_data,dataset,out_dir,run_id)
        metrics['final_loss'] = float(history[-1])
    if progress:
        section(f"Finished {run_id}, final loss {history[-1]:.6e}")
    return {'model':model,'history':history,'metrics':metrics,'run_id':run_id}

def run_evaluation(checkpoint_file,system_data,test_data,run_data=None,dataset_file=None):
    """
    Evaluates a saved model on a test rollout

    Returns
    ---------------------------
    metrics : dictionary
    """
    if not os.path.isfile(checkpoint_file):
        fatal_error(f"Checkpoint {checkpoint_file} does not exist")
    system_data,_,_,_,test_data,run_data = run_checks(system_data,test_data=test_data,run_data=run_data)
    if test_data is None:
        fatal_error("run_evaluation() requires test_data")
    model = sympnet.load_checkpoint(checkpoint_file)
    if model['d'] != system_data['system']['dim']:
        fatal_error(f"Checkpoint dimension d = {model['d']} does not match system {system_data['name']}")
    dataset = None if dataset_file is None else read_dataset(dataset_file)
    section(f"Evaluating {checkpoint_file}")
    run_id = os.path.splitext(os.path.basename(checkpoint_file))[0].replace("_checkpoint","")
    metrics = _write_evaluation(model,system_data,test_data,dataset,run_data['out_dir'],run_id)
    print(f"Test max error: {metrics['max_error']:.4e}")
    print(f"Energy drift: {metrics['energy_drift']:.4e}")
    return metrics

def acceptance(experiment_id,rows,exp,ci=False):
    """
    Checks the qualitative experiment claims on the per-row metrics

    Arguments
    ---------------------------
    experiment_id : str
        pendulum, linear or forced_ho
    rows : dictionary
        Metrics keyed by kind, with the structure reports of structure_reports()
    exp : dictionary
        Experiment entry of config/experiments.yaml
    ci : bool, optional
        Use the ci_ counterpart of every limit that has one

    Returns
    ---------------------------
    checks : dictionary
        Named pass flags and the overall 'pass'
    """
    limits = dict(exp['acceptance'])
    if ci:
        for key in [k for k in limits.keys() if k.startswith("ci_")]:
            limits[key[3:]] = limits[key]
    symplectic_tol = read_package_config("verify")['structural']['symplectic_tol']
    checks = {}
    if experiment_id == "pendulum":
        for kind,metrics in rows.items():
            checks[f"{kind}_max_error"] = metrics['max_error'] <= limits['max_error']
            checks[f"{kind}_energy_drift"] = metrics['energy_drift'] <= limits['energy_drift']
    elif experiment_id == "linear":
        checks['TLA_max_error'] = rows['TLA']['max_error'] <= limits['max_error']
        for kind in ["TG","OTLA"]:
            checks[f"TLA_beats_{kind}"] = limits['ratio']*rows['TLA']['max_error'] <= rows[kind]['max_error']
        tla = rows['TLA']['separability']
        checks['TLA_nonseparable'] = max(tla['p_variation'],tla['q_variation']) > limits['nonseparable_variation']
    elif experiment_id == "forced_ho":
        for kind in ["NATG","NATLA"]:
            checks[f"{kind}_max_error"] = rows[kind]['max_error'] <= limits['max_error']
        for kind in ["TG","TLA"]:
            checks[f"{kind}_fails"] = rows[kind]['max_error'] > limits['ratio']*rows['NATG']['max_error']
    for kind,metrics in rows.items():
        checks[f"{kind}_symplectic"] = metrics['symplectic_residual'] <= symplectic_tol
        # rows without enough probe states carry no separability report
        if not metrics['separability'] is None:
            checks[f"{kind}_separability"] = metrics['separability']['pass']
    checks['pass'] = all(checks.values())
    return checks

def run_experiment(experiment_id,out_dir,seed=0,ci=False,n_jobs=1):
    """
    Runs one experiment: data, training of every architecture row, rollouts and figures

    Arguments
    ---------------------------
    experiment_id : str
        pendulum, linear, forced_ho or rate_study
    out_dir : str
        Output folder, one sub-folder per architecture row
    seed : int, optional
        Seed for the data and every model
    ci : bool, optional
        Reduced CI protocol and the ci_ acceptance limits
    n_jobs : int, optional
        Architecture rows trained concurrently

    Returns
    ---------------------------
    summary : dictionary
        Metrics per kind and acceptance flags
    """
    if not experiment_id in EXPERIMENTS:
        fatal_error(f"Experiment {experiment_id} is not valid, use one of {EXPERIMENTS}")
    if experiment_id == "rate_study":
        return run_rate_study(out_dir)
    exp = copy.deepcopy(read_package_config("experiments")[experiment_id])
    section(f"Experiment {experiment_id}{' (ci)' if ci else ''}")
    system_data = copy.deepcopy(exp['system_data'])
    dataset_data = copy.deepcopy(exp['dataset_data'])
    dataset_data['seed'] = seed
    dataset_file = os.path.join(out_dir,f"{experiment_id}_data.jsonl")
    run_gen_data(system_data,dataset_data,dataset_file)
    rows = sympnet.experiment_architectures()[exp['models']]
    def row_job(row):
        model_data = {key:value for key,value in row.items() if key != 'params'}
        model_data['seed'] = seed
        result = run_training(copy.deepcopy(exp['system_data']),{'dataset_file':dataset_file},model_data,copy.deepcopy(exp['train_data']),copy.deepcopy(exp['test_data']),{'out_dir':os.path.join(out_dir,row['kind']),'ci':ci},progress=n_jobs == 1)
        return result['metrics']
    if n_jobs == 1:
        results = [row_job(row) for row in tqdm(rows,desc=experiment_id)]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(row_job)(row) for row in rows)
    metrics = {row['kind']:result for row,result in zip(rows,results)}
    for row in rows:
        if metrics[row['kind']]['params'] != row['params']:
            warning(f"{row['kind']} has {metrics[row['kind']]['params']} parameters, the architecture table lists {row['params']}")
    summary = {'experiment':experiment_id,'seed':seed,'ci':ci,'models':metrics,'acceptance':acceptance(experiment_id,metrics,exp,ci)}
    write_json(summary,os.path.join(out_dir,f"{experiment_id}_summary.json"))
    section(f"Experiment {experiment_id} acceptance: {'pass' if summary['acceptance']['pass'] else 'fail'}")
    for kind,values in metrics.items():
        print(f"{kind}: max error {values['max_error']:.4e}, energy drift {values['energy_drift']:.4e}, train mse {values['train_mse']:.4e}, symplectic residual {values['symplectic_residual']:.1e}")
    return summary

def run_rate_study(out_dir):
    """
    Composition rate study of the m-fold symplectic Euler split, with JSON report and log-log SVG

    Returns
    ---------------------------
    report : dictionary
    """
    rate_config = read_package_config("experiments")['rate_study']
    verify_config = read_package_config("verify")['rate']
    system_data = check_system(copy.deepcopy(rate_config['system_data']))
    system = system_data['system']
    section(f"Composition rate study for {system_data['name']}, h = {rate_config['h']}")
    grid = verify.square_grid(rate_config['grid_bounds'],rate_config['grid_n'],system['dim'])
    study = verify.composition_rate_study(system,grid,rate_config['h'],rate_config['m_list'])
    report = verify.rate_report(study,verify_config['slope_range'],verify_config['final_error_max'])
    for m,error in zip(study['m'],study['errors']):
        print(f"m = {m:4d}: max error {error:.4e}")
    print(f"Fitted slope: {study['slope']:.4f}")
    write_json(report,os.path.join(out_dir,"rate_study.json"))
    rate_plot(study['m'],study['errors'],study['slope'],os.path.join(out_dir,"rate_study.svg"))
    return report

def run_verification(suite,out_dir=None,seed=0):
    """
    Runs a verification suite and writes its reports

    Returns
    ---------------------------
    passed : bool
    reports : list of dictionaries
    """
    section(f"Verification suite {suite}")
    reports = verify.run_suite(suite,seed=seed)
    for report in reports:
        print(f"{'PASS' if report['pass'] else 'FAIL'}  {report['check']}")
    passed = all(report['pass'] for report in reports)
    if not out_dir is None:
        write_json({'suite':suite,'seed':seed,'pass':passed,'reports':reports},os.path.join(out_dir,f"verify_{suite}.json"))
    return passed,reports
