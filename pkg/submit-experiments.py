#!/usr/bin/env python3
# This script submits the full simulation grid (four designs, both modes, three targets) to a running levsample
# server and stores every report as JSON. The server caches reports, so rerunning it only computes missing cells.
from itertools import product
from pathlib import Path
import argparse
import json

import requests
from tqdm import tqdm

UNCONDITIONAL_SCHEMES = ["ic", "rl", "pl", "slev", "blev"]
CONDITIONAL_SCHEMES = ["icnlev", "rlnlev", "plnlev", "slev", "blev"]

parser = argparse.ArgumentParser(
    description="Submit the simulation grid to a levsample server")
parser.add_argument("-s", "--server", type=str, nargs=1,
                    help="The URL via which the server is available")
parser.add_argument("-o", "--output", type=Path, nargs=1,
                    help="The directory to store the reports in")
parser.add_argument("-n", "--rows", type=int, nargs=1, default=[5000],
                    help="Number of rows of the generated designs")
parser.add_argument("-p", "--predictors", type=int, nargs=1, default=[10],
                    help="Number of predictors of the generated designs")
parser.add_argument("-b", "--replicates", type=int, nargs=1, default=[100],
                    help="Replicates per cell")
parser.add_argument("--seed", type=int, nargs=1, default=[0],
                    help="Master seed of all experiments")
args = parser.parse_args()

SERVER = args.server[0]
OUTPUT_FOLDER = args.output[0]
OUTPUT_FOLDER.mkdir(parents=True, exist_ok=True)

grid = list(product(["mn", "t3", "ln", "t1"], ["unconditional", "conditional"], ["coef", "fit", "gram"]))

for dist, mode, target in tqdm(grid):
    config = {
        "mode": mode,
        "data": {"dist": dist, "n": args.rows[0], "p": args.predictors[0], "seed": args.seed[0]},
        "schemes": UNCONDITIONAL_SCHEMES if mode == "unconditional" else CONDITIONAL_SCHEMES,
        "target": target,
        "sample_sizes": [100, 200, 500, 700, 1000],
        "replicates": args.replicates[0],
        "master_seed": args.seed[0],
    }
    r = requests.post(f"{SERVER}/v1/experiments", json=config)
    if r.status_code != 200:
        print(r.json())
    assert r.status_code == 200, f"Status was {r.status_code}"

    with open(OUTPUT_FOLDER / Path(f"{dist}-{mode}-{target}.json"), mode="w") as report_file:
        json.dump(r.json(), report_file, indent="    ")
