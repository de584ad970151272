import numpy as np
import pytest

from griffstyle.classifier import (
    ConvergenceError, KernelSpec, MulticlassModel, dual_objective, kernel_eval, kernel_matrix,
    predict, solve_dual, train_binary_svm, train_multiclass,
)

from oracles import brute_force_dual, grid_dual_two_points

LINEAR = KernelSpec("linear")


@pytest.mark.parametrize("spec, x, y, expected", [
    (LINEAR, (1, 2), (1, 2), 5.0),
    (KernelSpec("rbf", gamma=1.0), (0.3, -2), (0.3, -2), 1.0),
    (KernelSpec("polynomial", degree=2, gamma=1.0, coef0=0.0), (1, 0), (2, 0), 4.0),
    (KernelSpec("sigmoid", gamma=0.5, coef0=1.0), (1, 1), (1, 0), np.tanh(1.5)),
    (KernelSpec("rbf", gamma=0.5), (0, 0), (1, 1), np.exp(-1.0)),
])
def test_kernel_eval(spec, x, y, expected):
    assert kernel_eval(spec, x, y) == pytest.approx(expected)


def test_kernel_dimension_mismatch():
    with pytest.raises(ValueError):
        kernel_eval(LINEAR, (1, 2), (1, 2, 3))


@pytest.mark.parametrize("kwargs", [{"kind": "cubic"}, {"degree": 0}, {"gamma": -1.0}, {"gamma": "auto"}])
def test_kernel_spec_validation(kwargs):
    with pytest.raises(ValueError):
        KernelSpec(**kwargs)


def test_gamma_scale_resolution():
    X = np.array([[0.0, 2.0], [4.0, 2.0]])
    assert KernelSpec("rbf").resolve(X).gamma == pytest.approx(1 / (2 * X.var()))
    assert KernelSpec("rbf").resolve(np.zeros((3, 4))).gamma == 1.0


def test_one_dimensional_max_margin():
    m = train_binary_svm([[0.0], [1.0]], [-1, 1], LINEAR, C=10)
    w = m.dual_coef @ m.support_vectors[:, 0]
    assert w == pytest.approx(2.0, abs=1e-6)
    assert m.intercept == pytest.approx(-1.0, abs=1e-6)
    assert -m.intercept / w == pytest.approx(0.5, abs=1e-3)
    assert m.decision_function([[0.9]])[0] > 0
    assert m.decision_function([[0.1]])[0] < 0


def test_conflicting_duplicates_saturate():
    X = [[1.0, 2.0], [1.0, 2.0]]
    m = train_binary_svm(X, [1, -1], LINEAR, C=1.0)
    assert m.alpha(2).tolist() == [1.0, 1.0]
    # only the bias survives: every input gets the same decision value
    values = m.decision_function([[0, 0], [5, -3], [1, 2]])
    assert np.allclose(values, m.intercept)
    K = kernel_matrix(LINEAR, np.array(X), np.array(X))
    assert dual_objective(m.alpha(2), np.array([1.0, -1.0]), K) == pytest.approx(
        grid_dual_two_points(K, 1.0), abs=1e-4)


def test_xor_with_rbf():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    y = np.array([1, 1, -1, -1])
    m = train_binary_svm(X, y, KernelSpec("rbf", gamma=1.0), C=10)
    assert (np.sign(m.decision_function(X)) == y).all()


def test_single_class_rejected():
    with pytest.raises(ValueError):
        train_binary_svm([[0.0], [1.0]], [1, 1])


def test_non_convergence_carries_diagnostics():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    y = np.where(rng.random(30) > 0.5, 1, -1)
    with pytest.raises(ConvergenceError) as err:
        train_binary_svm(X, y, LINEAR, C=1.0, max_iter=2)
    d = err.value.diagnostics
    assert d["n_iter"] == 2 and d["gap"] > 0 and len(d["alpha"]) == 30


def _random_problem(rng, n, d=3):
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) > 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return X, y


SPECS = [LINEAR, KernelSpec("rbf", gamma=0.7), KernelSpec("polynomial", degree=2, gamma=0.5, coef0=1.0),
         KernelSpec("sigmoid", gamma=0.1, coef0=0.0)]


@pytest.mark.parametrize("seed", range(100))
def test_feasibility_and_kkt(seed):
    rng = np.random.default_rng(seed)
    X, y = _random_problem(rng, int(rng.integers(4, 25)))
    spec = SPECS[seed % len(SPECS)].resolve(X)
    C, tol = float(rng.uniform(0.1, 10)), 1e-3
    K = kernel_matrix(spec, X, X)
    sol = solve_dual(K, y, C, tol)
    a = sol.alpha
    assert (a >= -tol).all() and (a <= C + tol).all()
    assert abs(a @ y) <= tol * C * len(y)
    assert abs(a @ y) <= 1e-6 * C * len(y)
    f = K @ (a * y) + sol.intercept
    margin = y * f
    free = (a > 0) & (a < C)
    assert (np.abs(margin[free] - 1) <= 10 * tol).all()
    assert (margin[a == 0] >= 1 - 10 * tol).all()
    assert (margin[a == C] <= 1 + 10 * tol).all()


@pytest.mark.parametrize("seed", range(20))
def test_objective_never_decreases(seed):
    rng = np.random.default_rng(100 + seed)
    X, y = _random_problem(rng, 15)
    spec = SPECS[seed % 3].resolve(X)
    K = kernel_matrix(spec, X, X)
    trace = []
    solve_dual(K, y, 2.0, 1e-4, callback=lambda it, a: trace.append(dual_objective(a, y, K)))
    assert len(trace) > 0
    assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))


@pytest.mark.parametrize("seed", range(30))
def test_matches_brute_force_dual(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(2, 5))
    X, y = _random_problem(rng, n, d=4)
    spec = SPECS[seed % 3].resolve(X)
    C = float(rng.uniform(0.2, 5))
    K = kernel_matrix(spec, X, X)
    best, _ = brute_force_dual(K, y, C)
    sol = solve_dual(K, y, C, tol=1e-6)
    assert dual_objective(sol.alpha, y, K) == pytest.approx(best, abs=1e-4)


def test_brute_force_oracle_agrees_with_grid():
    K = np.array([[2.0, 0.5], [0.5, 1.0]])
    best, _ = brute_force_dual(K, np.array([1.0, -1.0]), 0.7)
    assert best == pytest.approx(grid_dual_two_points(K, 0.7), abs=1e-6)


@pytest.mark.parametrize("k", [0.5, 3.0, 10.0])
def test_scaling_features_and_C(k):
    X = np.array([[0.0], [1.0]])
    y = [-1, 1]
    base = train_binary_svm(X, y, LINEAR, C=10)
    scaled = train_binary_svm(k * X, y, LINEAR, C=10 / k ** 2)
    probe = np.linspace(-1, 2, 31).reshape(-1, 1)
    assert (np.sign(base.decision_function(probe)) == np.sign(scaled.decision_function(k * probe))).all()
    w = scaled.dual_coef @ scaled.support_vectors[:, 0]
    assert -scaled.intercept / w == pytest.approx(0.5 * k, abs=1e-3 * k)


@pytest.fixture(scope="module")
def blobs():
    rng = np.random.default_rng(7)
    centers = np.array([[0, 0], [6, 0], [0, 6]], dtype=float)
    X = np.vstack([c + rng.normal(scale=0.6, size=(15, 2)) for c in centers])
    labels = [c for c in "abc" for _ in range(15)]
    return X, labels, centers


def test_three_blobs(blobs):
    X, labels, centers = blobs
    model = train_multiclass(X, labels, LINEAR)
    assert model.predict(X) == labels
    assert [predict(model, c) for c in centers] == ["a", "b", "c"]
    for pair, m in model.models.items():
        for i in range(len(m.support)):
            sv = m.support_vectors[i]
            # a support vector of a separable pair is classified as its own class
            own = pair[0] if m.dual_coef[i] > 0 else pair[1]
            assert (m.decision_function(sv)[0] >= 0) == (own == pair[0])


def test_three_blobs_one_vs_rest(blobs):
    X, labels, _ = blobs
    model = train_multiclass(X, labels, LINEAR, strategy="ovr")
    assert model.predict(X) == labels


def test_two_classes_match_binary():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 3))
    labels = np.where(X[:, 0] + 0.3 * rng.normal(size=40) > 0, "hi", "lo")
    multi = train_multiclass(X, labels, LINEAR)
    binary = train_binary_svm(X, np.where(labels == "hi", 1, -1), LINEAR)
    probe = rng.normal(size=(200, 3))
    expected = np.where(binary.decision_function(probe) >= 0, "hi", "lo")
    assert multi.predict(probe) == expected.tolist()


def test_seven_classes_give_21_models():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(35, 4))
    labels = [f"P{i % 7}" for i in range(35)]
    model = train_multiclass(X, labels, LINEAR)
    assert len(model.models) == 21
    assert model.classes == tuple(sorted(set(labels)))


def test_tie_goes_to_sorted_first():
    model = train_multiclass([[-1.0], [1.0]], ["b_right", "a_left"], LINEAR)
    # classes sorted: a_left at x=+1 and b_right at x=-1
    assert model.classes == ("a_left", "b_right")
    (m,) = model.models.values()
    assert m.decision_function([[0.0]])[0] == 0.0
    assert predict(model, [0.0]) == "a_left"


def test_dimension_mismatch_on_predict(blobs):
    X, labels, _ = blobs
    model = train_multiclass(X, labels, LINEAR)
    with pytest.raises(ValueError):
        predict(model, [1.0, 2.0, 3.0])


def test_model_json_round_trip(blobs):
    X, labels, _ = blobs
    model = train_multiclass(X, labels, KernelSpec("rbf"))
    loaded = MulticlassModel.from_json(model.to_json())
    probe = np.random.default_rng(0).normal(scale=4, size=(50, 2))
    assert loaded.predict(probe) == model.predict(probe)
    assert loaded.kernel == model.kernel and loaded.classes == model.classes
    with pytest.raises(ValueError):
        MulticlassModel.from_dict({**model.to_dict(), "format_version": 99})
