#!/usr/bin/env python3
"""Runs small CLI jobs and validates every emitted JSON document against the
schemas shipped in docs/schemas; also pins the CSV headers."""

import argparse
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema
from jsonschema import validators


def load_schemas(schema_dir: pathlib.Path):
    store = {}
    for path in schema_dir.glob("*.schema.json"):
        doc = json.loads(path.read_text())
        store[path.name] = doc
    return store


def validate(doc, schema_name, store, schema_dir):
    schema = store[schema_name]
    resolver = jsonschema.RefResolver(base_uri=schema_dir.as_uri() + "/", referrer=schema,
                                      store={schema_dir.as_uri() + "/" + k: v
                                             for k, v in store.items()})
    validator = validators.validator_for(schema)(schema, resolver=resolver)
    errors = sorted(validator.iter_errors(doc), key=lambda e: e.path)
    if errors:
        for e in errors:
            print(f"  schema violation in {schema_name}: {e.message}", file=sys.stderr)
        raise SystemExit(f"validation failed for {schema_name}")


def check_header(path: pathlib.Path, expected: str):
    header = path.read_text().splitlines()[0]
    if header != expected:
        raise SystemExit(f"{path}: header {header!r} != {expected!r}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--cli", required=True)
    parser.add_argument("--schemas", required=True)
    parser.add_argument("--workdir", required=True)
    args = parser.parse_args()

    schema_dir = pathlib.Path(args.schemas).resolve()
    work = pathlib.Path(args.workdir)
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    store = load_schemas(schema_dir)

    def run(cmd_args):
        res = subprocess.run([args.cli] + cmd_args, capture_output=True, text=True)
        if res.returncode != 0:
            print(res.stdout, res.stderr, file=sys.stderr)
            raise SystemExit(f"{cmd_args} exited {res.returncode}")

    run(["oracle", "--dim", "2", "--out", str(work / "oracle")])
    run(["train", "--dim", "2", "--conditional", "--iterations", "60", "--batch", "8",
         "--hidden", "16", "--seed", "4", "--checkpoint-every", "30",
         "--out", str(work / "train")])
    run(["eval", "--checkpoint", str(work / "train" / "checkpoint.json"), "--samples", "300",
         "--confusion", "--per-class", "50", "--seed", "2", "--out", str(work / "eval")])
    run(["sweep", "--dims", "1,2", "--iterations", "40", "--batch", "8", "--hidden", "16",
         "--seed", "4", "--out", str(work / "sweep")])

    def load(p):
        return json.loads(pathlib.Path(p).read_text())

    checks = [
        (work / "oracle" / "config.json", "config.schema.json"),
        (work / "oracle" / "summary.json", "oracle-summary.schema.json"),
        (work / "train" / "config.json", "config.schema.json"),
        (work / "train" / "checkpoint.json", "checkpoint.schema.json"),
        (work / "train" / "checkpoint_00000030.json", "checkpoint.schema.json"),
        (work / "eval" / "config.json", "config.schema.json"),
        (work / "eval" / "report.json", "eval-report.schema.json"),
        (work / "eval" / "confusion.json", "confusion.schema.json"),
        (work / "sweep" / "config.json", "config.schema.json"),
        (work / "sweep" / "sweep_summary.json", "sweep-summary.schema.json"),
        (work / "sweep" / "synt1d" / "config.json", "config.schema.json"),
        (work / "sweep" / "synt2d" / "checkpoint.json", "checkpoint.schema.json"),
    ]
    for path, schema_name in checks:
        validate(load(path), schema_name, store, schema_dir)
        print(f"ok: {path.name} vs {schema_name}")

    check_header(work / "train" / "trajectory.csv",
                 "iteration,samples_cum,mean_reward,loss_pg,loss_ent,loss_nll,loss_total,beta,baseline")
    check_header(work / "eval" / "samples.csv",
                 "sample_id,class_label,idx_1,idx_2,x_1,x_2,f_test,reward,octant,satisfied")
    check_header(work / "oracle" / "solutions.csv", "idx_1,idx_2,x_1,x_2,f_test,octant")
    print("ok: csv headers")
    print("schema validation passed")


if __name__ == "__main__":
    main()
