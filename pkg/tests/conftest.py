import numpy as np
import pytest
import yaml

from shallowflow.cli import main
from shallowflow.config import parse_config
from shallowflow.data import generate_dataset
from shallowflow.models import build_nets
from shallowflow.pipeline import train

TINY = {
    "data": {"n_items": 48, "n_frames": 8, "n_classes": 3},
    "model": {"hidden": 16, "head_hidden": 8, "vf_hidden": 16, "vf_layers": 2},
    "train": {"seed": 0, "epochs": 3, "batch_size": 16},
    "sample": {"rtol": 1e-3, "atol": 1e-3},
    "bench": {"solvers": ["bosh3", "dopri5"], "alphas": [1, 2], "n_items": 3, "repeats": 2},
    "sweep": {"alphas": [1, 2, 20, 40], "n_items": 6},
}


@pytest.fixture(scope="session")
def tiny_cfg():
    return parse_config(TINY)


@pytest.fixture(scope="session")
def tiny_yaml(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


@pytest.fixture(scope="session")
def tiny_models(tiny_cfg):
    """Both systems trained for a few epochs on the tiny dataset."""
    dataset = generate_dataset(tiny_cfg.data)
    out = {}
    for system in ("sfm", "ablated"):
        nets = build_nets(tiny_cfg.model_config(system), np.random.default_rng([0, 0]))
        train(nets, dataset, tiny_cfg.train)
        out[system] = nets
    return out, dataset


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory, tiny_yaml):
    """A run directory produced by ``shallowflow train`` on the tiny config."""
    out = tmp_path_factory.mktemp("run")
    assert main(["train", "--config", str(tiny_yaml), "--out", str(out)]) == 0
    return out


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance():
    """``record(n, ok, detail)`` logs one PASS/FAIL line for criterion ``n`` and asserts ``ok``."""

    def record(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
