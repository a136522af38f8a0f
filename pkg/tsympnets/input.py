"""
tsympnets module for handling input
"""
import os
import json
import yaml
import numpy as np

from .output import fatal_error

valid_keys = ["system_data","dataset_data","model_data","train_data","test_data","run_data"]


def read_package_config(name):
    """
    Reads one of the yaml files shipped in the package config directory

    Arguments
    ---------------------------
    name : str
        File stem, e.g. "activations" for config/activations.yaml

    Returns
    ---------------------------
    config : dictionary
        Parsed yaml content
    """
    config_file = os.path.join(os.path.dirname(os.path.realpath(__file__)),f"config/{name}.yaml")
    if not os.path.isfile(config_file):
        fatal_error(f"Package config file {config_file} does not exist")
    with open(config_file,"r") as in_file:
        config = yaml.load(in_file,Loader=yaml.SafeLoader)
    return config

def read_input_file(input_file,in_mode=None):
    """
    Reads a yaml or json file and builds dictionaries

    Arguments
    ---------------------------
    input_file : str
        Path of input file
    in_mode : str, optional
        "yaml" or "json", inferred from the file extension when None

    Returns
    ---------------------------
    data_sets : dictionaries
        Dictionaries storing information on: system, dataset, model, training, test rollout and run settings

    Notes
    ---------------------------
    All dictionaries are returned, empty dictionaries indicate no properties were set in the file
    """
    if not os.path.isfile(input_file):
        fatal_error(f"Input file {input_file} does not exist")
    if in_mode is None:
        in_mode = "json" if input_file.endswith(".json") else "yaml"
    with open(input_file,"r") as stream:
        if in_mode == "yaml":
            input_data = yaml.load(stream,Loader=yaml.SafeLoader)
        elif in_mode == "json":
            try:
                input_data = json.load(stream)
            except json.JSONDecodeError as err:
                fatal_error(f"The file {input_file} is not valid json: {err}")
        else:
            fatal_error(f"The argument in_mode = {in_mode} given to input.read_input_file() does not match any valid input modes")
    if input_data is None:
        input_data = {}
    if not isinstance(input_data,dict):
        fatal_error(f"The file {input_file} must contain a mapping with keys from {valid_keys}")
    data_sets = {}
    for key in valid_keys:
        data_sets[key] = {}
    for h in input_data.keys():
        if not h in valid_keys:
            fatal_error(f"The key {h} in the file {input_file} is not valid, options are {valid_keys}")
        if not isinstance(input_data[h],dict):
            fatal_error(f"The entry {h} in the file {input_file} must be a dictionary")
        data_sets[h] = dict(input_data[h])
    return data_sets

def read_dataset(f_name):
    """
    Reads a JSON lines dataset written by output.write_dataset

    Arguments
    ---------------------------
    f_name : str
        Path of the dataset file

    Returns
    ---------------------------
    dataset : dictionary
        Columns 'x' (N,2d), 'h' (N), 'y' (N,2d) and 't' (N) or None
    """
    if not os.path.isfile(f_name):
        fatal_error(f"Dataset file {f_name} does not exist")
    x,t,h,y = [],[],[],[]
    with open(f_name,"r") as in_file:
        for n,line in enumerate(in_file):
            if line.strip() == "":
                continue
            sample = json.loads(line)
            for key in ['x','h','y']:
                if not key in sample.keys():
                    fatal_error(f"Sample on line {n+1} of {f_name} has no entry '{key}'")
            x.append(sample['x'])
            h.append(sample['h'])
            y.append(sample['y'])
            if 't' in sample.keys():
                t.append(sample['t'])
    if len(h) == 0:
        fatal_error(f"Dataset file {f_name} holds no samples")
    if len(t) not in [0,len(h)]:
        fatal_error(f"Dataset file {f_name} gives clock times for only some samples")
    return {'x':np.array(x,dtype=float),'h':np.array(h,dtype=float),'y':np.array(y,dtype=float),'t':np.array(t,dtype=float) if len(t) > 0 else None}

def read_json(f_name):
    """
    Reads a json document (checkpoints, metrics, reports)
    """
    if not os.path.isfile(f_name):
        fatal_error(f"File {f_name} does not exist")
    with open(f_name,"r") as in_file:
        return json.load(in_file)
