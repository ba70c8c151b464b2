import numpy as np
import pandas as pd
import pytest

from hypergam.engine import Workspace

DATA_DIR = "data"
PIMA_COLUMNS = ["npreg", "glu", "bp", "skin", "bmi", "ped", "age"]
PIMA_MAP = (0.0, 1.0, 0.0, 0.0, 3.0, 2.0, 4.0)


@pytest.fixture(scope="session")
def pima():
    df = pd.read_csv(f"{DATA_DIR}/pima.csv")
    x = df[PIMA_COLUMNS].to_numpy(float)
    y = df["type"].to_numpy(float)
    return x, y


@pytest.fixture(scope="session")
def pima_workspace(pima):
    x, y = pima
    return Workspace(
        x, y, family="bernoulli-logit", prior="hyper-g/n",
        n_inner_knots=4, names=PIMA_COLUMNS,
    )


@pytest.fixture(scope="session")
def toy_gaussian_workspace():
    rng = np.random.default_rng(7)
    n, p = 40, 3
    x = rng.standard_normal((n, p))
    y = 0.4 * x[:, 0] + 0.3 * np.sin(np.pi * x[:, 1]) + 0.2 * rng.standard_normal(n)
    from hypergam.dof import DofGrid

    return Workspace(
        x, y, family="gaussian", prior="hyper-g/n", n_inner_knots=2,
        grid=DofGrid(np.array([0.0, 1.0, 2.0, 3.0])),
    )
