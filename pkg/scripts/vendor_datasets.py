"""Regenerate the vendored benchmark CSVs under data/.

Requires scikit-learn (not a runtime dependency of the package). The fixture
files are committed so the toolkit itself never downloads anything; this
script documents their provenance and canonical column order.

Column order: the loader's native feature order, then a final "label" column
holding the class name string.
"""

import csv
from pathlib import Path

from sklearn.datasets import load_breast_cancer, load_iris, load_wine

OUT = Path(__file__).resolve().parents[1] / "data"

LOADERS = {
    "iris.csv": load_iris,
    "wine.csv": load_wine,
    "breast_cancer.csv": load_breast_cancer,
}


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for name, loader in LOADERS.items():
        bunch = loader()
        path = OUT / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(bunch.feature_names) + ["label"])
            for row, target in zip(bunch.data, bunch.target):
                writer.writerow([repr(float(v)) for v in row] + [str(bunch.target_names[target])])
        print(f"wrote {path} ({bunch.data.shape[0]} rows, {bunch.data.shape[1]} features)")


if __name__ == "__main__":
    main()
