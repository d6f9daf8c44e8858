"""Acceptance suite: one test per acceptance criterion, each printing a
single [PASS]/[FAIL] line with the measured worst error.

The ordering experiment (criterion 8) trains all four benchmark variants
for 3 seeds at full scale in a session fixture shared by its assertions.
"""

import statistics
import time
from fractions import Fraction

import numpy as np
import pytest

from equisym import bench, checks
from equisym.checks import janossy_setup
from equisym.stochmap import RandomStream, enumerate_distribution
from equisym.symcore import average, symmetrise


def _report(name, passed, detail):
    print(f"[{'PASS' if passed else 'FAIL'}] {name}  {detail}")
    assert passed, f"{name}: {detail}"


def _report_results(name, results):
    worst = max(r.worst_error for r in results)
    _report(name, all(r.passed for r in results), f"worst_error={worst:.3e}")


def test_criterion_1_group_axioms():
    # associativity, unit, inverse on 10^3 random tuples, <= 1e-9
    _report_results("criterion 1: group axioms", checks.check_groups(n_samples=1000))


def test_criterion_2_coset_bundle_laws():
    # q o s = id, H-invariance, G-equivariance on 10^3 samples, <= 1e-9
    _report_results("criterion 2: coset bundle laws", checks.check_cosets(n_samples=1000))


def test_criterion_3_exact_janossy_equivariance():
    # enumerated pushforward equality for S_2, S_3, S_4, zero tolerance
    results = [checks.check_janossy_equivariance(n) for n in (2, 3, 4)]
    _report("criterion 3: exact equivariance on S_2..S_4",
            all(r.passed for r in results), "exact rational comparison")


def test_criterion_4_stability_and_idempotence():
    results = checks.check_stability(n_points=100, tol=1e-9)
    results.append(checks.check_idempotence())
    _report_results("criterion 4: stability and idempotence", results)


def test_criterion_5_coupled_equivariance_gaps():
    # untrained symmetrised models, d = 2 and 3, 100 (x, Q) pairs, <= 1e-6
    _report_results("criterion 5: coupled equivariance gaps",
                    checks.check_model_gaps(dims=(2, 3), n_pairs=100, tol=1e-6))


def test_criterion_6_end_to_end_gradients():
    result = checks.check_end_to_end_gradients()
    _report("criterion 6: end-to-end reparameterised gradients", result.passed,
            f"rel_error={result.worst_error:.3e} (tol 1e-4)")


def test_criterion_7_jensen_bound_rational():
    # scalar surrogate with loss |yhat/y - 1|: exact expectation of the MC
    # objective vs loss of the exact averaged predictor, in rationals
    spec, k = janossy_setup(2)
    sym = symmetrise(k, spec)
    x = (Fraction(3), Fraction(5))
    y = Fraction(4)  # the invariant target for this surrogate
    mc_expectation = sum(p * abs(yhat / y - 1)
                         for p, yhat in enumerate_distribution(sym, x))
    mean_map = average(sym, mode="exact_enumeration")
    avg_loss = abs(mean_map.sampler(x, RandomStream(0)) / y - 1)
    ok = (mc_expectation >= avg_loss
          and mc_expectation == Fraction(1, 4)
          and avg_loss == 0)
    _report("criterion 7a: Jensen bound in exact rationals", ok,
            f"E[loss]={mc_expectation} >= loss(E)={avg_loss}")


def test_criterion_7_jensen_bound_statistical():
    # real sym_haar model: mean draw loss >= loss of the mean prediction,
    # up to a 4 sigma margin over 10^4 draws
    n = 10**4
    model = bench.InversionModel("sym_haar", d=2, hidden=16)
    stream = RandomStream(checks.DEFAULT_SEED)
    params = model.init(stream.split(0))
    x, _ = bench.sample_batch(2, 1, stream.split(1))
    X = np.tile(x, (n, 1, 1))
    draws = model.draw(params, X, stream.split(2))
    losses = bench._batch_losses(X, draws)
    mean_loss = float(losses.mean())
    loss_of_mean = bench._batch_losses(x, draws.mean(axis=0)[None])[0]
    margin = 4.0 * float(losses.std()) / np.sqrt(n)
    gap = mean_loss - float(loss_of_mean)
    _report("criterion 7b: Jensen bound, 4 sigma over 1e4 draws",
            gap >= -margin, f"E[loss]-loss(E)={gap:.4f} margin={margin:.4f}")


# ---------------------------------------------------------------------------
# Criterion 8: desk-scale ordering experiment


ORDERING_SEEDS = (0, 1, 2)
SYM_VARIANTS = ("sym_haar", "sym_recursive", "canonical_deterministic")


@pytest.fixture(scope="session")
def ordering_results():
    t0 = time.time()
    medians = {}
    for variant in bench.VARIANTS:
        losses, gaps = [], []
        for seed in ORDERING_SEEDS:
            config = bench.TrainConfig(
                d=2, variant=variant, hidden=64, steps=20000, batch_size=128,
                lr=1e-4, n_mc_eval=100, n_test=512, seed=seed,
            )
            summary = bench.run_experiment(config)
            assert not summary["diverged"], f"{variant} seed {seed} diverged"
            losses.append(summary["final_loss"])
            gaps.append(summary["equiv_gap"])
        medians[variant] = (statistics.median(losses), statistics.median(gaps))
    return medians, time.time() - t0


def test_criterion_8_runtime(ordering_results):
    _, elapsed = ordering_results
    _report("criterion 8: experiment runtime", elapsed <= 900.0,
            f"elapsed={elapsed:.0f}s (budget 900s)")


def test_criterion_8_plain_mlp_gap(ordering_results):
    medians, _ = ordering_results
    _, gap = medians["plain_mlp"]
    _report("criterion 8: plain MLP equivariance gap", gap > 1e-2,
            f"median_gap={gap:.3e} (must exceed 1e-2)")


@pytest.mark.parametrize("variant", SYM_VARIANTS)
def test_criterion_8_sym_gap(ordering_results, variant):
    medians, _ = ordering_results
    _, gap = medians[variant]
    _report(f"criterion 8: {variant} equivariance gap", gap <= 1e-6,
            f"median_gap={gap:.3e} (tol 1e-6)")


@pytest.mark.parametrize("variant", SYM_VARIANTS)
def test_criterion_8_ordering(ordering_results, variant):
    medians, _ = ordering_results
    plain_loss, _ = medians["plain_mlp"]
    loss, _ = medians[variant]
    _report(f"criterion 8: {variant} beats plain MLP by >= 20%",
            loss < 0.8 * plain_loss,
            f"median_loss={loss:.4f} vs plain={plain_loss:.4f} "
            f"(needs < {0.8 * plain_loss:.4f})")
