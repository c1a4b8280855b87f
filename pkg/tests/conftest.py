import numpy as np
import pytest

from scl_throughput.plan import Band, FiberSpec, build_channel_plan


@pytest.fixture(scope="session")
def fiber():
    return FiberSpec()


@pytest.fixture(scope="session")
def c5_plan():
    return build_channel_plan({Band.C: 5}, 50e9, 1550e-9)


@pytest.fixture(scope="session")
def c100_plan():
    return build_channel_plan({Band.C: 100}, 50e9, 1550e-9)


@pytest.fixture(scope="session")
def scl_plan():
    return build_channel_plan({Band.S: 164, Band.C: 100, Band.L: 100}, 50e9, 1540e-9)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []
_FULL_RUNS: dict = {}


@pytest.fixture(scope="session")
def full_optimum(tmp_path_factory):
    """Full optimize runs of the shipped full-size configs, shared by every test that needs one."""
    import time
    from pathlib import Path

    from scl_throughput.config import load_config, with_overrides
    from scl_throughput.pipeline import run_optimize

    configs = Path(__file__).resolve().parents[1] / "configs"

    def run(name: str, seed: int = 0):
        key = (name, seed)
        if key not in _FULL_RUNS:
            out = tmp_path_factory.mktemp(f"{name}-{seed}")
            cfg = with_overrides(load_config(configs / f"{name}.cfg"), out=str(out), seed=seed)
            t0 = time.perf_counter()
            powers, report, opt = run_optimize(cfg, base_dir=configs)
            _FULL_RUNS[key] = dict(
                cfg=cfg, out=out, powers=powers, report=report, opt=opt, seconds=time.perf_counter() - t0
            )
        return _FULL_RUNS[key]

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
