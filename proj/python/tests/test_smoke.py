import math

import numpy as np
import pytest

import arbsvrg


@pytest.fixture(scope="module")
def ridge():
    data = arbsvrg.generate_synthetic(200, 10, seed=3)
    model = arbsvrg.LossModel(data, "ridge", 0.1)
    profile = arbsvrg.smoothness_profile(model)
    x_star, f_star = arbsvrg.reference_solution(model, 1e-10)
    return model, profile, x_star, f_star


def test_profile_ordering(ridge):
    model, profile, _, _ = ridge
    assert profile.n == 200
    assert profile.strong_convexity <= profile.smoothness <= profile.max_smoothness
    assert len(profile.example_smoothness) == 200


def test_step_size_endpoints(ridge):
    _, profile, _, _ = ridge
    assert arbsvrg.step_size_free(1, profile) == pytest.approx(1 / (6 * profile.max_smoothness), rel=1e-15)
    assert arbsvrg.step_size_free(profile.n, profile) == pytest.approx(1 / (2 * profile.smoothness), rel=1e-15)
    assert arbsvrg.zeta(1.0) == 3.0


def test_free_svrg_converges(ridge):
    model, profile, x_star, _ = ridge
    scheme = arbsvrg.SamplingScheme.b_nice(200, 4)
    trace = arbsvrg.run_free_svrg(
        model, scheme, arbsvrg.step_size_free(4, profile), 200, 20,
        profile.strong_convexity, 0, np.zeros(10), x_star=x_star,
    )
    assert trace["grad_evals"][-1] == 20 * (200 + 2 * 4 * 200)
    assert trace["suboptimality"][-1] < 1e-6 * trace["suboptimality"][0]
    assert trace["final_iterate"].shape == (10,)


def test_lsvrg_d_step_sizes(ridge):
    model, profile, _, _ = ridge
    p = 0.1
    alpha = arbsvrg.step_size_lsvrgd(p, 1, profile)
    trace = arbsvrg.run_lsvrg_d(
        model, arbsvrg.SamplingScheme.b_nice(200, 1), alpha, p, 50, 1, np.zeros(10),
        record_step_sizes=True,
    )
    steps = trace["step_sizes"]
    assert len(steps) == 51
    since = 0
    for a in steps[1:]:
        since = 0 if a == alpha else since + 1
        assert a == pytest.approx(alpha * (1 - p) ** (since / 2), rel=1e-15)


def test_tuning_table_marks_optimum():
    profile = arbsvrg.SmoothnessProfile(200, 84.0, 1.5, 0.05)
    rows = arbsvrg.tuning_table(profile, 1e-4, True)
    assert len(rows) == 200
    starred = [r for r in rows if "b*" in r["label"]]
    assert len(starred) == 1
    assert starred[0]["b"] == arbsvrg.optimal_batch_m_eq_n(profile)
    alphas = [r["alpha"] for r in rows]
    assert all(b >= a for a, b in zip(alphas, alphas[1:]))


def test_variance_matrix_bnice():
    v = arbsvrg.variance_matrix(arbsvrg.SamplingScheme.b_nice(6, 2))
    assert np.linalg.eigvalsh(v).max() == pytest.approx(6 * 4 / (2 * 5), abs=1e-12)


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        arbsvrg.SamplingScheme.b_nice(5, 9)
    with pytest.raises(arbsvrg.ValidationError):
        arbsvrg.load_libsvm("/no/such/file.svm")


def test_run_experiment(tmp_path):
    config = tmp_path / "exp.ini"
    config.write_text(
        "[experiment]\n"
        "dataset = synthetic:n=80,d=5,seed=2\n"
        "wall_clock = false\n"
        "[solver:free]\n"
        "algorithm = free_svrg\n"
        "sampling.b = optimal\n"
        "epochs = 3\n"
    )
    summary = arbsvrg.run_experiment(str(config))
    assert str(summary).endswith("summary.json")
    assert (tmp_path / "out" / "free_seed0.csv").read_text().startswith("grad_evals,")
    assert math.isfinite(arbsvrg.total_complexity_free(1, 80, arbsvrg.SmoothnessProfile(80, 4.0, 1.0, 0.1)))
