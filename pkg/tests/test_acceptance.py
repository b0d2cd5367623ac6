"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test prints a ``CRITERION n PASS|FAIL`` line (also collected in the
terminal summary).
"""

import contextlib
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

import test_determinism
import test_embedding
import test_lyapunov
import test_series
from chaoskit import determinism as det
from chaoskit import embedding as emb
from chaoskit import oracles, pipeline
from chaoskit.config import PipelineConfig
from chaoskit.neighbors import NeighborIndex
from chaoskit.series import ReturnSeries

from conftest import ACCEPTANCE_LINES

COMMODITY_ENV = "CHAOSKIT_COMMODITY_DIR"


@contextlib.contextmanager
def criterion(number, title):
    notes = []
    try:
        yield notes
    except BaseException as exc:
        if not isinstance(exc, pytest.skip.Exception):
            _report(number, title, "FAIL", notes + [str(exc).splitlines()[0] if str(exc) else type(exc).__name__])
        raise
    _report(number, title, "PASS", notes)


def _report(number, title, status, notes):
    line = f"CRITERION {number} {status}: {title}" + (f" ({'; '.join(notes)})" if notes else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def _analyse(values, **overrides):
    return pipeline.analyse(ReturnSeries(values), PipelineConfig(**overrides))


def test_criterion_1_logistic_mle(logistic):
    with criterion(1, "logistic map lambda within 10% of ln 2 in under 10 s") as notes:
        oracle = oracles.jacobian_mle(oracles.MapSpec("logistic", 1_000_000, {"x0": 0.2}, transient=1000))
        notes.append(f"oracle={oracle:.6f}")
        assert abs(oracle - math.log(2)) <= 0.001
        start = time.perf_counter()
        rep = _analyse(logistic)
        elapsed = time.perf_counter() - start
        notes.append(f"lambda={rep.lambda_:.4f} m={rep.m} tau={rep.tau} t={elapsed:.1f}s")
        assert abs(rep.lambda_ - math.log(2)) <= 0.10 * math.log(2)
        assert elapsed < 10.0


def test_criterion_2_henon_mle(henon):
    with criterion(2, "Henon lambda within 15% of the tangent-map value in under 30 s") as notes:
        oracle = oracles.jacobian_mle(oracles.MapSpec("henon", 1_000_000, transient=1000))
        start = time.perf_counter()
        rep = _analyse(henon, m=2, tau=1)
        elapsed = time.perf_counter() - start
        notes.append(f"oracle={oracle:.4f} lambda={rep.lambda_:.4f} t={elapsed:.1f}s")
        assert abs(rep.lambda_ - oracle) <= 0.15 * oracle
        assert elapsed < 30.0


def test_criterion_3_fnn_dimension(henon, noise):
    with criterion(3, "FNN recovers m=2 for Henon and does not converge for noise") as notes:
        h = emb.min_embedding_dim(henon, tau=1, fnn_star=0.005)
        n = emb.min_embedding_dim(noise, tau=1, fnn_star=0.005)
        defined = [f for f in n.curve.fractions() if f is not None]
        notes.append(f"henon m={h.m} noise converged={n.converged} min defined fraction={min(defined):.3f}")
        assert h.converged and h.m == 2
        assert not n.converged and n.m == emb.DEFAULT_M_MAX
        assert all(f > 0.005 for f in defined)


def test_criterion_4_neighbour_oracle():
    with criterion(4, "neighbour index equals brute force on 50 random embeddings") as notes:
        rng = np.random.default_rng(2024)
        queries = 0
        for _ in range(50):
            n, m = int(rng.integers(50, 2001)), int(rng.integers(1, 13))
            x = rng.standard_normal((n, m))
            if rng.random() < 0.5:
                x = np.round(x, 1)
            w = int(rng.integers(0, 10))
            eps = float(rng.uniform(0.1, 1.5))
            idx = NeighborIndex(x)
            for i in range(n):
                assert tuple(idx.nearest(i, w)) == oracles.brute_force_nn(x, i, w)
                assert [tuple(nb) for nb in idx.within(i, eps, w)] == oracles.brute_force_within(x, i, eps, w)
            ks, ds = idx.nearest_all(w)
            for i in range(n):
                assert (ks[i], ds[i]) == oracles.brute_force_nn(x, i, w)
            queries += 3 * n
        notes.append(f"{queries} queries")


def test_criterion_5_kappa_endpoints(sine):
    with criterion(5, "kappa endpoints and random-walk baseline") as notes:
        e = emb.embed(sine, emb.EmbeddingParams(2, emb.estimate_lag(sine).tau))
        res, _ = det.determinism(e)
        notes.append(f"sine kappa={res.kappa:.4f}")
        assert res.kappa >= 0.99
        test_determinism.test_random_unit_field_scores_near_zero()
        for n, m in [(5, 2), (20, 5), (100, 10)]:
            test_determinism.test_random_walk_baseline_monte_carlo(n, m)


def test_criterion_6_three_way_discrimination(oracle_run):
    with criterion(6, "logistic / sine / noise discrimination") as notes:
        logistic, sine, noise = oracle_run.series
        for rep in oracle_run.series:
            notes.append(f"{rep.name}: lambda={rep.lambda_} kappa={rep.kappa}")
        checks = {
            "logistic": logistic.lambda_ > 0.5 and logistic.kappa > 0.9,
            "sine": abs(sine.lambda_) < 0.01 and sine.kappa > 0.99,
            "noise": noise.kappa is not None and noise.kappa < 0.3,
        }
        if noise.kappa is None:
            # diagnostic only: kappa of the same noise in the two-dimensional projection
            e = emb.embed(oracles.generate(oracles.MapSpec("noise", 10_000, seed=3)), emb.EmbeddingParams(2, 1))
            notes.append(f"noise {noise.errors.get('kappa')}; 2d kappa={det.determinism(e)[0].kappa:.3f}")
        failed = [k for k, ok in checks.items() if not ok]
        assert not failed, f"failed: {', '.join(failed)}"


def test_criterion_7_commodity_tables(tmp_path):
    with criterion(7, "conditional commodity table reproduction") as notes:
        folder = os.environ.get(COMMODITY_ENV)
        if not folder:
            _report(7, "conditional commodity table reproduction", "SKIP", [f"set {COMMODITY_ENV} to run"])
            pytest.skip(f"commodity data not supplied ({COMMODITY_ENV} unset)")
        files = sorted(Path(folder).glob("*.csv"))
        assert len(files) == 10, f"expected ten commodity CSVs, found {len(files)}"
        cfg = PipelineConfig(inputs=[str(f) for f in files], projection="2d",
                             output_dir=str(tmp_path))
        result = pipeline.run(cfg)
        pipeline.write_outputs(result)
        print(pipeline.summary_table(result))
        lams = {r.name: r.lambda_ for r in result.series}
        kappas = {r.name: r.kappa for r in result.series}
        ratio = result.ratio()
        notes.append(f"lambda corn/oats = {ratio}")
        assert all(v is not None and v > 0 for v in lams.values()), lams
        assert all(v is not None and 0.75 <= v <= 0.97 for v in kappas.values()), kappas
        assert ratio is not None


def _snapshot(folder):
    return {p.name: p.read_bytes() for p in sorted(Path(folder).iterdir())}


def test_criterion_8_reproducible_artifact(oracle_run, oracle_config, tmp_path):
    with criterion(8, "identical config gives byte-identical reports; parallel equals serial") as notes:
        first = _snapshot(oracle_config.output_dir)
        pipeline.write_outputs(pipeline.run(PipelineConfig(**oracle_config.to_dict())))
        assert _snapshot(oracle_config.output_dir) == first
        par_cfg = PipelineConfig(**{**oracle_config.to_dict(), "jobs": 3, "output_dir": str(tmp_path)})
        pipeline.write_outputs(pipeline.run(par_cfg))
        parallel = _snapshot(tmp_path)
        differing = [name for name in first if name != "effective_config.txt" and first[name] != parallel[name]]
        assert not differing, differing
        notes.append(f"{len(first)} files compared")


def test_criterion_9_scale_invariance():
    with criterion(9, "scale invariance property suite (100 cases each)"):
        test_series.test_price_scaling_leaves_returns_unchanged()
        test_series.test_round_trip_reproduces_prices()
        test_embedding.test_fnn_invariant_under_shift()
        test_embedding.test_fnn_covariant_under_scaling()
        test_lyapunov.test_shift_leaves_curve_identical()
        test_lyapunov.test_scaling_shifts_curve_by_log_c()
        test_determinism.test_rigid_motion_invariance()
