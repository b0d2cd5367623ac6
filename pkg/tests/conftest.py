import numpy as np
import pytest

from chaoskit import oracles
from chaoskit.config import PipelineConfig

# golden-ratio period: no two samples of the wave coincide
IRRATIONAL_PERIOD = 50.0 * (1.0 + np.sqrt(5.0)) / 2.0

LOGISTIC = oracles.MapSpec("logistic", 10_000, {"r": 4.0, "x0": 0.2}, seed=7)
HENON = oracles.MapSpec("henon", 10_100, {"a": 1.4, "b": 0.3}, transient=100)
SINE = oracles.MapSpec("sine", 10_000, {"period": IRRATIONAL_PERIOD})
NOISE = oracles.MapSpec("noise", 10_000, seed=3)


@pytest.fixture(scope="session")
def logistic():
    return oracles.generate(LOGISTIC)


@pytest.fixture(scope="session")
def henon():
    return oracles.generate(HENON)


@pytest.fixture(scope="session")
def sine():
    return oracles.generate(SINE)


@pytest.fixture(scope="session")
def noise():
    return oracles.generate(NOISE)


def write_values(path, values):
    path.write_text("value\n" + "".join(f"{v!r}\n" for v in np.asarray(values).tolist()))
    return path


def write_prices(path, prices, start="2000-01-03"):
    days = np.arange(np.datetime64(start), np.datetime64(start) + len(prices))
    path.write_text("date,price\n" + "".join(f"{d},{p!r}\n" for d, p in zip(days, np.asarray(prices).tolist())))
    return path


@pytest.fixture(scope="session")
def oracle_files(tmp_path_factory, logistic, sine, noise):
    d = tmp_path_factory.mktemp("oracles")
    return [write_values(d / "logistic.csv", logistic),
            write_values(d / "sine.csv", sine),
            write_values(d / "noise.csv", noise)]


@pytest.fixture(scope="session")
def oracle_config(oracle_files, tmp_path_factory):
    out = tmp_path_factory.mktemp("oracle-out")
    return PipelineConfig(inputs=[str(p) for p in oracle_files], input_kind="series", output_dir=str(out))


@pytest.fixture(scope="session")
def oracle_run(oracle_config):
    """Pipeline over the logistic, sine and noise oracles, written to disk once."""
    from chaoskit import pipeline

    result = pipeline.run(oracle_config)
    pipeline.write_outputs(result)
    return result


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
