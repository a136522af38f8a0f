"""
tsympnets command line: gen-data, train, eval, verify, experiment and rate-study
"""
import os
import argparse

from .input import read_input_file
from .output import fatal_error
from . import calculations
from .verify import SUITES


def _read_config(config_file):
    if config_file is None:
        fatal_error("This command requires --config")
    return read_input_file(config_file)

def _dataset_path(out,system_name):
    """
    --out may name the .jsonl file itself or a folder to write it into
    """
    if out.endswith(".jsonl"):
        return out
    return os.path.join(out,f"{system_name}_data.jsonl")

def cmd_gen_data(args):
    config = _read_config(args.config)
    if not args.seed is None:
        config['dataset_data']['seed'] = args.seed
    out_file = _dataset_path(args.out,config['system_data'].get('name',"system"))
    calculations.run_gen_data(config['system_data'],config['dataset_data'],out_file)
    return 0

def cmd_train(args):
    config = _read_config(args.config)
    if not args.seed is None:
        config['dataset_data']['seed'] = args.seed
        config['model_data']['seed'] = args.seed
    if not args.data is None:
        config['dataset_data'] = {'dataset_file':args.data}
    run_data = config['run_data']
    run_data['out_dir'] = args.out
    run_data['ci'] = args.ci or run_data.get('ci',False)
    calculations.run_training(config['system_data'],config['dataset_data'],config['model_data'],config['train_data'],config['test_data'],run_data)
    return 0

def cmd_eval(args):
    config = _read_config(args.config)
    run_data = config['run_data']
    run_data['out_dir'] = args.out
    calculations.run_evaluation(args.checkpoint,config['system_data'],config['test_data'],run_data,dataset_file=args.data)
    return 0

def cmd_verify(args):
    passed,_ = calculations.run_verification(args.suite,out_dir=args.out,seed=args.seed)
    return 0 if passed else 1

def cmd_experiment(args):
    summary = calculations.run_experiment(args.id,args.out,seed=args.seed,ci=args.ci,n_jobs=args.n_jobs)
    passed = summary['pass'] if args.id == "rate_study" else summary['acceptance']['pass']
    return 0 if passed else 1

def cmd_rate_study(args):
    report = calculations.run_rate_study(args.out)
    return 0 if report['pass'] else 1

def build_parser():
    """
    Argument parser with one sub-command per pipeline
    """
    parser = argparse.ArgumentParser(prog="tsympnets",description="Time-adaptive SympNets: data, training, evaluation, verification and experiments")
    commands = parser.add_subparsers(dest="command",required=True)

    gen = commands.add_parser("gen-data",help="sample a dataset and write it as JSON lines")
    gen.add_argument("--config",required=True,help="yaml or json file with system_data and dataset_data")
    gen.add_argument("--out",default="output",help="output .jsonl file or folder (default: output)")
    gen.add_argument("--seed",type=int,default=None,help="overrides dataset_data seed")
    gen.set_defaults(func=cmd_gen_data)

    train = commands.add_parser("train",help="train one model")
    train.add_argument("--config",required=True,help="yaml or json file with system, dataset, model, train and optional test data")
    train.add_argument("--out",default="output",help="output folder (default: output)")
    train.add_argument("--seed",type=int,default=None,help="overrides the dataset and model seeds")
    train.add_argument("--data",default=None,help="existing .jsonl dataset used instead of sampling")
    train.add_argument("--ci",action="store_true",help="divide epochs by the CI divisor")
    train.set_defaults(func=cmd_train)

    evaluate = commands.add_parser("eval",help="evaluate a checkpoint on a test rollout")
    evaluate.add_argument("--checkpoint",required=True,help="checkpoint .json written by train")
    evaluate.add_argument("--config",required=True,help="yaml or json file with system_data and test_data")
    evaluate.add_argument("--out",default="output",help="output folder (default: output)")
    evaluate.add_argument("--data",default=None,help="training dataset drawn in the phase portrait")
    evaluate.set_defaults(func=cmd_eval)

    check = commands.add_parser("verify",help="run a verification suite, exit code 1 on any failure")
    check.add_argument("suite",nargs="?",default="all",choices=SUITES)
    check.add_argument("--out",default=None,help="folder for the JSON report")
    check.add_argument("--seed",type=int,default=0)
    check.set_defaults(func=cmd_verify)

    experiment = commands.add_parser("experiment",help="reproduce one experiment end to end")
    experiment.add_argument("id",choices=calculations.EXPERIMENTS)
    experiment.add_argument("--out",default="output",help="output folder (default: output)")
    experiment.add_argument("--seed",type=int,default=0)
    experiment.add_argument("--ci",action="store_true",help="reduced epochs and relaxed thresholds")
    experiment.add_argument("--n-jobs",dest="n_jobs",type=int,default=1,help="architecture rows trained concurrently")
    experiment.set_defaults(func=cmd_experiment)

    rate = commands.add_parser("rate-study",help="composition rate study of the split pendulum flow")
    rate.add_argument("--out",default="output",help="output folder (default: output)")
    rate.set_defaults(func=cmd_rate_study)
    return parser

def main(argv=None):
    """
    Parses argv and runs the chosen command

    Returns
    ---------------------------
    code : int
        Process exit code, 1 when a verification or acceptance check fails
    """
    args = build_parser().parse_args(argv)
    return args.func(args)
