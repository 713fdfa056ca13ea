"""Convert the raw UCI Adult / German Credit files into the bundled CSV + schema assets.

Usage:
    python scripts/prepare_datasets.py --adult adult.data --german german.data [--out src/ipflab/data]

The raw files are the original UCI distributions (comma separated ``adult.data``,
space separated attribute-coded ``german.data``).
"""
import argparse
import csv
from pathlib import Path

import yaml

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num", "marital_status",
    "occupation", "relationship", "race", "sex", "capital_gain", "capital_loss",
    "hours_per_week", "native_country", "income",
]
ADULT_NUMERICAL = {"age", "education_num", "capital_gain", "capital_loss", "hours_per_week"}
ADULT_IMMUTABLE = {"age", "race", "sex", "native_country"}

GERMAN_MAPS = {
    "checking": {"A11": "<0", "A12": "0-200", "A13": ">=200", "A14": "none"},
    "purpose": {
        "A40": "car_new", "A41": "car_used", "A42": "furniture", "A43": "electronics",
        "A44": "appliances", "A45": "repairs", "A46": "education", "A47": "vacation",
        "A48": "retraining", "A49": "business", "A410": "other",
    },
    "savings": {"A61": "<100", "A62": "100-500", "A63": "500-1000", "A64": ">=1000", "A65": "unknown"},
    "employment": {"A71": "unemployed", "A72": "<1", "A73": "1-4", "A74": "4-7", "A75": ">=7"},
    "property": {"A121": "real_estate", "A122": "savings_insurance", "A123": "car_other", "A124": "none"},
    "installment_plans": {"A141": "bank", "A142": "stores", "A143": "none"},
    "housing": {"A151": "rent", "A152": "own", "A153": "free"},
    "job": {"A171": "unskilled_nonresident", "A172": "unskilled_resident", "A173": "skilled", "A174": "management"},
}

GERMAN_COLUMNS = [
    "gender", "single", "age", "loan_duration", "purpose", "loan_amount", "installment_rate",
    "years_at_current_home", "num_other_loans", "num_dependents", "has_telephone",
    "no_current_loan", "missed_payments", "critical_account", "bank_balance", "savings",
    "employment", "has_coapplicant", "has_guarantor", "property", "other_installment_plans",
    "housing", "job", "foreign_worker", "credit_risk",
]
GERMAN_NUMERICAL = {
    "age", "loan_duration", "loan_amount", "installment_rate", "years_at_current_home",
    "num_other_loans", "num_dependents",
}
GERMAN_IMMUTABLE = {"gender", "single", "age", "foreign_worker"}


def _tf(flag):
    return "True" if flag else "False"


def convert_adult(src: Path):
    rows = []
    for line in src.read_text().splitlines():
        if not line.strip():
            continue
        rows.append([cell.strip() for cell in line.split(",")])
    assert all(len(r) == len(ADULT_COLUMNS) for r in rows)
    return ADULT_COLUMNS, rows


def convert_german(src: Path):
    rows = []
    for line in src.read_text().splitlines():
        if not line.strip():
            continue
        a = line.split()
        (checking, duration, history, purpose, amount, savings, employment, rate, status_sex,
         debtors, residence, prop, age, plans, housing, credits, job, liable, phone, foreign,
         label) = a
        rows.append([
            "female" if status_sex in ("A92", "A95") else "male",
            _tf(status_sex in ("A93", "A95")),
            age, duration, GERMAN_MAPS["purpose"][purpose], amount, rate, residence, credits, liable,
            _tf(phone == "A192"),
            _tf(history in ("A30", "A31")),
            _tf(history == "A33"),
            _tf(history == "A34"),
            GERMAN_MAPS["checking"][checking],
            GERMAN_MAPS["savings"][savings],
            GERMAN_MAPS["employment"][employment],
            _tf(debtors == "A102"),
            _tf(debtors == "A103"),
            GERMAN_MAPS["property"][prop],
            GERMAN_MAPS["installment_plans"][plans],
            GERMAN_MAPS["housing"][housing],
            GERMAN_MAPS["job"][job],
            _tf(foreign == "A201"),
            "good" if label == "1" else "bad",
        ])
    return GERMAN_COLUMNS, rows


def schema_config(name, columns, rows, numerical, immutable, label, positive, ignore, groups):
    features = []
    for j, col in enumerate(columns):
        if col == label or col in ignore:
            continue
        rec = {"name": col, "kind": "numerical" if col in numerical else "categorical",
               "actionable": col not in immutable}
        if col not in numerical:
            rec["categories"] = sorted({r[j] for r in rows})
        features.append(rec)
    return {
        "name": name,
        "label": {"column": label, "positive": positive},
        "ignore": list(ignore),
        "features": features,
        "groups": groups,
    }


def write(out: Path, stem: str, columns, rows, config):
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)
    with open(out / f"{stem}.yaml", "w") as fh:
        yaml.safe_dump(config, fh, sort_keys=False, width=120)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--adult", type=Path, required=True)
    ap.add_argument("--german", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src/ipflab/data")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cols, rows = convert_adult(args.adult)
    cfg = schema_config(
        "adult", cols, rows, ADULT_NUMERICAL, ADULT_IMMUTABLE, "income", ">50K", ["fnlwgt"],
        [
            {"name": "gender", "column": "sex", "map": {"Male": "male", "Female": "female"}, "values": ["male", "female"]},
            {"name": "race", "column": "race", "map": {"White": "white"}, "default": "non-white", "values": ["white", "non-white"]},
        ],
    )
    write(args.out, "adult", cols, rows, cfg)

    cols, rows = convert_german(args.german)
    cfg = schema_config(
        "german", cols, rows, GERMAN_NUMERICAL, GERMAN_IMMUTABLE, "credit_risk", "good", [],
        [
            {"name": "gender", "column": "gender", "map": {"male": "male", "female": "female"}, "values": ["male", "female"]},
            {"name": "marital", "column": "single", "map": {"False": "married", "True": "single"}, "values": ["married", "single"]},
        ],
    )
    write(args.out, "german", cols, rows, cfg)


if __name__ == "__main__":
    main()
