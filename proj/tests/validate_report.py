"""Runs a small audit and validates consistency_report.json against the published schema."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main() -> int:
    cli, schema_path = sys.argv[1], pathlib.Path(sys.argv[2])
    config = {
        "seed": 3,
        "data": {"sample_size": 1200, "synthetic": {"n_rows": 4000}},
        "models": {
            "random_forest": {"n_trees": 10, "max_depth": 5},
            "gradient_boosting": {"n_stages": 10},
            "mlp": {"epochs": 1, "widths": [8, 8, 4, 4]},
        },
        "explain": {"instances": 6, "background": 8, "lime_samples": 200, "shap_coalitions": 0},
        "perturbation": {"repeats": 2},
    }
    with tempfile.TemporaryDirectory() as tmp:
        cfg = pathlib.Path(tmp) / "config.json"
        cfg.write_text(json.dumps(config))
        out = pathlib.Path(tmp) / "out"
        subprocess.run([cli, "audit", "--quiet", "--config", str(cfg), "--out", str(out)], check=True)
        report = json.loads((out / "consistency_report.json").read_text())
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    jsonschema.validate(report, schema, cls=jsonschema.Draft202012Validator)
    print(f"consistency_report.json valid: {len(report['blocks'])} blocks")
    return 0


if __name__ == "__main__":
    sys.exit(main())
