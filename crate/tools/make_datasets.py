#!/usr/bin/env python3
"""Generates the datasets bundled under data/.

- breast_cancer.csv: the Wisconsin Diagnostic Breast Cancer dataset as
  shipped with scikit-learn (569 rows, 30 numerical features, binary target).
- diabetes.csv: a synthetic clinical-style cohort (768 rows, 8 numerical
  features, binary outcome) with correlated risk factors and label noise
  tuned so that shallow trees, forests and small MLPs reach mid-to-high-70s
  test accuracy. Pregnancies and Age act as the immutable features in the
  companion schema file.

Both files are deterministic (fixed RNG seed).
"""

import csv
import json
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"

DIABETES_FEATURES = [
    "Pregnancies",
    "Glucose",
    "BloodPressure",
    "SkinThickness",
    "Insulin",
    "BMI",
    "DiabetesPedigreeFunction",
    "Age",
]


def make_breast_cancer():
    from sklearn.datasets import load_breast_cancer

    data = load_breast_cancer()
    names = [n.replace(" ", "_") for n in data.feature_names]
    path = OUT / "breast_cancer.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["target"])
        for row, label in zip(data.data, data.target):
            writer.writerow([f"{v:.6g}" for v in row] + [int(label)])
    schema = {
        "label": "target",
        "features": [
            {"name": n, "kind": "numerical", "immutable": False} for n in names
        ],
    }
    (OUT / "breast_cancer.schema.json").write_text(json.dumps(schema, indent=2) + "\n")
    print(f"breast_cancer.csv: {len(data.data)} rows, {len(names)} features")


def make_diabetes(seed=20240817, n=768):
    rng = np.random.default_rng(seed)

    # latent metabolic-risk factor ties glucose, BMI, insulin together
    u = rng.normal(0.0, 1.0, n)
    age = np.clip(21 + rng.gamma(2.0, 8.5, n), 21, 81).round()
    pregnancies = np.clip(
        rng.poisson(np.clip((age - 18) * 0.16, 0.2, 8.0)), 0, 17
    )
    glucose = np.clip(112 + 24 * u + rng.normal(0, 17, n), 44, 199).round()
    bmi = np.clip(31.5 + 3.8 * u + rng.normal(0, 5.4, n), 18, 67).round(1)
    skin = np.clip(20 + 0.62 * (bmi - 31.5) + rng.normal(9, 8, n), 7, 99).round()
    insulin = np.clip(np.exp(4.25 + 0.45 * u + rng.normal(0, 0.55, n)), 14, 846).round()
    bp = np.clip(69 + 0.35 * (age - 33) * 0.5 + rng.normal(0, 11, n), 24, 122).round()
    pedigree = np.clip(np.exp(rng.normal(-0.92, 0.55, n)), 0.078, 2.42).round(3)

    # a mix of smooth risk and threshold effects; the steps keep the task
    # tree-friendly so the network does not dominate
    z = (
        0.035 * (glucose - 112)
        + 0.07 * (bmi - 31.5)
        + 0.03 * (age - 33)
        + 0.5 * (pedigree - 0.44)
        + 0.04 * (pregnancies - 3)
        + 0.001 * (insulin - 100)
        + 0.015 * (skin - 26)
        + (glucose > 141)
        + 0.7 * (bmi > 37.5)
        + 0.5 * (age > 47)
    )
    p = 1.0 / (1.0 + np.exp(-(0.8 * z - 1.3)))
    outcome = (rng.uniform(0, 1, n) < p).astype(int)

    path = OUT / "diabetes.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIABETES_FEATURES + ["Outcome"])
        for i in range(n):
            writer.writerow(
                [
                    int(pregnancies[i]),
                    int(glucose[i]),
                    int(bp[i]),
                    int(skin[i]),
                    int(insulin[i]),
                    f"{bmi[i]:.1f}",
                    f"{pedigree[i]:.3f}",
                    int(age[i]),
                    outcome[i],
                ]
            )
    schema = {
        "label": "Outcome",
        "features": [
            {
                "name": name,
                "kind": "numerical",
                "immutable": name in ("Pregnancies", "Age"),
            }
            for name in DIABETES_FEATURES
        ],
    }
    (OUT / "diabetes.schema.json").write_text(json.dumps(schema, indent=2) + "\n")
    print(
        f"diabetes.csv: {n} rows, positives {outcome.sum()} "
        f"({outcome.mean() * 100:.1f}%)"
    )


def quick_model_check():
    """Rough accuracy sanity check with scikit-learn analogues."""
    from sklearn.ensemble import RandomForestClassifier
    from sklearn.model_selection import train_test_split
    from sklearn.neural_network import MLPClassifier
    from sklearn.preprocessing import MinMaxScaler
    from sklearn.tree import DecisionTreeClassifier

    for name in ("diabetes", "breast_cancer"):
        rows = list(csv.reader((OUT / f"{name}.csv").open()))
        data = np.array(rows[1:], dtype=float)
        x, y = data[:, :-1], data[:, -1].astype(int)
        xtr, xte, ytr, yte = train_test_split(x, y, test_size=0.2, random_state=0)
        scaler = MinMaxScaler().fit(xtr)
        xtr, xte = scaler.transform(xtr), scaler.transform(xte)
        for label, model in (
            ("tree", DecisionTreeClassifier(max_depth=10, min_samples_leaf=5, random_state=0)),
            ("forest", RandomForestClassifier(100, max_depth=10, random_state=0)),
            ("mlp", MLPClassifier((32,), max_iter=400, random_state=0)),
        ):
            acc = model.fit(xtr, ytr).score(xte, yte)
            print(f"  {name} {label}: {acc:.3f}")


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    make_breast_cancer()
    make_diabetes()
    quick_model_check()
