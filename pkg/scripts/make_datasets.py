"""Regenerate the bundled sample datasets under data/.

Three files ship with the repo:

  synth_classification.csv  200 x 5, binary label, mild interactions
  synth_regression.csv      200 x 5, smooth nonlinear target
  pima_synth.csv            768 x 8, diabetes-style schema and ranges

The pima file mirrors the column names and plausible value ranges of the
classic diabetes screening table.  Its label leans on curved decision
boundaries (products and ratios of measurements), which axis-aligned
trees on the raw columns can only staircase, while a single derived
column captures each boundary exactly.  That structural gap is what the
end-to-end tests measure; the flip noise keeps scores off the ceiling.

Run from the repo root:  python3 scripts/make_datasets.py
"""

import csv
import os

import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "data")


def _write(name, header, rows):
    path = os.path.join(OUT, name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def make_classification(rng):
    n = 200
    x = rng.normal(size=(n, 5))
    score = 1.5 * x[:, 0] * x[:, 1] + np.sin(2.0 * x[:, 2]) - 0.5 * x[:, 3]
    y = (score + 0.3 * rng.normal(size=n) > 0).astype(int)
    header = ["f0", "f1", "f2", "f3", "f4", "target"]
    rows = [[f"{v:.6f}" for v in row] + [str(t)] for row, t in zip(x, y)]
    _write("synth_classification.csv", header, rows)


def make_regression(rng):
    n = 200
    x = rng.normal(size=(n, 5))
    y = x[:, 0] * x[:, 1] + 0.8 * np.tanh(2.0 * x[:, 2]) + 0.4 * x[:, 3] ** 2
    y += 0.1 * rng.normal(size=n)
    header = ["f0", "f1", "f2", "f3", "f4", "target"]
    rows = [
        [f"{v:.6f}" for v in row] + [f"{t:.6f}"] for row, t in zip(x, y)
    ]
    _write("synth_regression.csv", header, rows)


def make_pima(rng):
    n = 768
    pregnancies = np.minimum(rng.poisson(2.8, size=n), 15).astype(float)
    glucose = np.clip(rng.normal(122.0, 30.0, size=n), 56.0, 199.0)
    pressure = np.clip(rng.normal(72.0, 12.0, size=n), 40.0, 110.0)
    skin = np.clip(rng.normal(29.0, 10.0, size=n), 7.0, 63.0)
    insulin = np.clip(rng.lognormal(4.7, 0.55, size=n), 15.0, 600.0)
    bmi = np.clip(rng.normal(32.0, 6.5, size=n), 18.0, 55.0)
    pedigree = np.clip(rng.lognormal(-0.9, 0.6, size=n), 0.08, 2.4)
    age = np.clip(21.0 + rng.gamma(2.0, 9.0, size=n), 21.0, 81.0)

    # Curved boundaries: a product, two ratios, and a periodic term.  Each
    # is a single catalog transformation away from the raw columns.
    u1 = (glucose - glucose.mean()) / glucose.std() * (bmi - bmi.mean()) / bmi.std()
    u2 = glucose / insulin
    u3 = pedigree * age
    u4 = skin / bmi
    z1 = u1 - np.median(u1)
    z2 = (u2 - np.median(u2)) / u2.std()
    z3 = (u3 - np.median(u3)) / u3.std()
    z4 = (u4 - np.median(u4)) / u4.std()
    score = (
        2.8 * sigmoid(8.0 * z1)
        + 2.4 * sigmoid(8.0 * z2)
        + 1.6 * sigmoid(6.0 * z3)
        + 1.2 * sigmoid(6.0 * z4)
    )
    cut = np.median(score)
    y = (score + 0.28 * rng.normal(size=n) > cut).astype(int)
    flip = rng.random(n) < 0.04
    y = np.where(flip, 1 - y, y)

    header = [
        "Pregnancies", "Glucose", "BloodPressure", "SkinThickness",
        "Insulin", "BMI", "DiabetesPedigreeFunction", "Age", "Outcome",
    ]
    cols = np.column_stack(
        [pregnancies, glucose, pressure, skin, insulin, bmi, pedigree, age]
    )
    rows = [[f"{v:.4f}" for v in row] + [str(t)] for row, t in zip(cols, y)]
    _write("pima_synth.csv", header, rows)


def main():
    os.makedirs(OUT, exist_ok=True)
    make_classification(np.random.default_rng(11))
    make_regression(np.random.default_rng(12))
    make_pima(np.random.default_rng(13))


if __name__ == "__main__":
    main()
