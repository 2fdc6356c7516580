"""Attack suite tests: capability gating, loss definitions, oracle
equivalence for the discrete attacks, ensemble guarantees, determinism."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_single_flip, finite_difference_gradient, minimal_evading_subset, relative_error
from purelab import nn
from purelab.attacks import (ATTACK_KINDS, AttackResult, AttackSpec, AttackSurface,
                             attack_loss, binarize, default_spec, run_attack,
                             validate_adversarial)
from purelab.attacks.ensemble import imax_ma, max_ma, member_specs, stepwise_ma
from purelab.attacks.gradfree import mimicry, pointwise, random_add, salt_pepper
from purelab.attacks.gradient import bca, grosse, pgd
from purelab.data import (SplitSpec, SyntheticSpec, default_bounds, generate_synthetic,
                          split)
from purelab.detector import DetectorConfig, DetectorModel, predict, train_detector
from purelab.errors import CapabilityError, InvariantViolation
from purelab.purifier import PurifierConfig, PurifierModel, build_purifier_net, purify
from purelab.rng import Rng


@pytest.fixture(scope="module")
def desk():
    ds = generate_synthetic(SyntheticSpec(d=60, n_malicious=120, n_benign=120,
                                          signal_features=12, noise_rate=0.02, seed=17))
    train, val, test = split(ds, SplitSpec(seed=17))
    det = train_detector(train, val, DetectorConfig(hidden=[32, 32], epochs=30, seed=3))
    return train, test, det


def linear_detector(d, seed=0, w=None, b=None, threshold=0.5):
    """Logistic-regression-shaped detector: a single sigmoid layer."""
    net = nn.mlp([d, 1], ["sigmoid"], Rng(seed))
    if w is not None:
        net.layers[0].W[:, 0] = w
    if b is not None:
        net.layers[0].b[0] = b
    return DetectorModel(net, threshold=threshold, feature_layer=1, seed=seed)


def random_rows(n, d, seed, density=0.3):
    return (Rng(seed).uniform((n, d)) < density).astype(np.float64)


# ---------------------------------------------------------------- plumbing

def test_binarize_rounds_half_up_and_clips():
    lower = np.array([0.0, 0.0, 1.0, 0.0])
    upper = np.array([1.0, 0.0, 1.0, 1.0])
    v = np.array([0.5, 0.9, 0.2, 0.49])
    out = binarize(v, lower, upper)
    assert out.tolist() == [1.0, 0.0, 1.0, 0.0]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_binarize_idempotent_binary_in_box(seed):
    r = Rng(seed)
    d = 16
    x = (r.uniform(d) < 0.4).astype(np.float64)
    lower, upper = default_bounds(x, "add-only")
    v = r.uniform(d)
    out = binarize(v, lower, upper)
    assert np.all((out == 0.0) | (out == 1.0))
    assert np.all(out >= lower) and np.all(out <= upper)
    assert np.array_equal(binarize(out, lower, upper), out)


def test_validate_adversarial_rejections():
    x = np.array([0.0, 1.0, 0.0])
    lower, upper = default_bounds(x, "add-only")
    with pytest.raises(InvariantViolation):
        validate_adversarial(x, np.array([0.5, 1.0, 0.0]), lower, upper)
    with pytest.raises(InvariantViolation):
        validate_adversarial(x, np.array([0.0, 0.0, 0.0]), lower, upper)  # deletes a bit
    with pytest.raises(InvariantViolation):
        validate_adversarial(x, np.array([0.0, 1.0]), lower[:2], upper[:2])
    validate_adversarial(x, np.array([1.0, 1.0, 0.0]), lower, upper)


def test_attack_result_build_counts_flips():
    x = np.array([0.0, 1.0, 0.0, 0.0])
    adv = np.array([1.0, 1.0, 0.0, 1.0])
    res = AttackResult.build(x, adv, True, 3, 2)
    assert res.flipped == 2
    assert res.success is True
    assert res.queries == 3 and res.iterations_used == 2


def test_default_spec_rejects_unknown():
    with pytest.raises(ValueError):
        default_spec("autoattack")
    with pytest.raises(ValueError):
        default_spec("pgd_l1", scenario="teal")


def test_default_spec_scenario_parameters():
    grey = default_spec("pgd_l2", "grey")
    assert grey.iterations == 100 and grey.step_size == 0.5
    assert default_spec("pgd_linf", "grey").step_size == 0.02
    w1 = default_spec("pgd_l1", "white")
    assert w1.iterations == 500
    w2 = default_spec("pgd_l2", "white")
    assert w2.iterations == 200 and w2.step_size == 0.05
    winf = default_spec("pgd_linf", "white")
    assert winf.iterations == 500 and winf.step_size == 0.002
    wmax = default_spec("max_ma", "white")
    kinds = [m.kind for m in wmax.members]
    assert kinds == ["pgd_l1", "pgd_l2", "pgd_linf"]
    assert all(isinstance(m, AttackSpec) and m.scenario == "white" for m in wmax.members)
    assert wmax.members[2].step_size == 0.002 and wmax.members[2].iterations == 500
    wsma = default_spec("stepwise_ma", "white")
    assert [m.kind for m in wsma.members] == ["pgd_l2", "pgd_linf"]


# ------------------------------------------------------- capability gating

def test_grey_surface_refuses_purifier(desk):
    _, _, det = desk
    pur = PurifierModel(None, seed=0, passthrough=True)
    with pytest.raises(CapabilityError):
        AttackSurface("grey", det, pur)


def test_attack_loss_grey_with_purifier_raises(desk):
    _, test, det = desk
    pur = PurifierModel(None, seed=0, passthrough=True)
    with pytest.raises(CapabilityError):
        attack_loss("grey", det, test.X[:2], purifier=pur)


def test_black_surface_denies_gradients(desk):
    _, test, det = desk
    surf = AttackSurface("black", det)
    with pytest.raises(CapabilityError):
        surf.loss_and_grad(test.X[:2])
    with pytest.raises(CapabilityError):
        surf.score_and_grad(test.X[:2])


def test_unknown_scenario_rejected(desk):
    _, _, det = desk
    with pytest.raises(ValueError):
        AttackSurface("beige", det)


def test_query_counting(desk):
    _, test, det = desk
    surf = AttackSurface("grey", det)
    surf.query_score(test.X[:5])
    surf.query_label(test.X[:3])
    surf.evades(test.X[:2])
    assert surf.queries == 10
    # knowledge-based loss access is not a query in grey mode
    surf.loss(test.X[:4])
    assert surf.queries == 10
    black = AttackSurface("black", det)
    black.loss(test.X[:4])
    assert black.queries == 4


# --------------------------------------------------------- loss definitions

def test_grey_loss_is_cross_entropy_of_scoring_malicious(desk):
    _, test, det = desk
    x = test.X[:8]
    scores = det.score(x)
    mask = (scores > 1e-6) & (scores < 1.0 - 1e-6)
    loss = AttackSurface("grey", det).loss(x)
    assert np.allclose(loss[mask], -np.log(scores[mask]), atol=1e-10)


def test_black_loss_equals_clamped_query_loss(desk):
    _, test, det = desk
    x = test.X[:8]
    loss = AttackSurface("black", det).loss(x)
    expect = -np.log(np.clip(det.score(purify(PurifierModel(None, 0, True), x)), 1e-7, 1 - 1e-7))
    assert np.allclose(loss, expect, atol=1e-10)


def test_white_loss_definitional_through_purifier(desk):
    _, test, det = desk
    cfg = PurifierConfig(encoder_hidden=[16, 16], decoder_hidden=[16], seed=11)
    pur = PurifierModel(build_purifier_net(60, cfg, Rng(11)), seed=11)
    surf = AttackSurface("white", det, pur)
    x = test.X[:6]
    cont, _ = pur.forward_continuous(x)
    scores = det.score(cont)
    loss = surf.loss(x)
    assert np.allclose(loss, -np.log(scores), atol=1e-10)
    # the deployed query path binarizes instead
    qscores = surf.query_score(x)
    assert np.allclose(qscores, det.score(purify(pur, x)), atol=1e-12)


def test_white_gradient_matches_finite_differences(desk):
    _, _, det = desk
    cfg = PurifierConfig(encoder_hidden=[12, 12], decoder_hidden=[12], seed=5)
    pur = PurifierModel(build_purifier_net(60, cfg, Rng(5)), seed=5)
    surf = AttackSurface("white", det, pur)
    r = Rng(99)
    for _ in range(5):
        x = 0.2 + 0.6 * r.uniform(60)
        _, grad = surf.loss_and_grad(x)

        def f(v):
            return float(surf.loss(v[None])[0])

        numeric = finite_difference_gradient(f, x)
        assert relative_error(grad[0], numeric) < 1e-4


def test_grey_gradient_matches_finite_differences(desk):
    _, _, det = desk
    surf = AttackSurface("grey", det)
    r = Rng(98)
    for _ in range(5):
        x = 0.2 + 0.6 * r.uniform(60)
        _, grad = surf.loss_and_grad(x)

        def f(v):
            return float(surf.loss(v[None])[0])

        numeric = finite_difference_gradient(f, x)
        assert relative_error(grad[0], numeric) < 1e-4


# --------------------------------------------------------- gradient attacks

def test_pgd_zero_iterations_identity(desk):
    _, test, det = desk
    x = test.malware().X[:5]
    lower, upper = default_bounds(x, "add-only")
    surf = AttackSurface("grey", det)
    for kind in ("pgd_l1", "pgd_l2", "pgd_linf"):
        spec = AttackSpec(kind=kind, iterations=0)
        adv, info = pgd(x, lower, upper, spec, surf)
        assert np.array_equal(adv, x)


def test_pgd_rejects_foreign_kind(desk):
    _, test, det = desk
    x = test.X[:2]
    lower, upper = default_bounds(x, "add-only")
    with pytest.raises(ValueError):
        pgd(x, lower, upper, AttackSpec(kind="bca"), AttackSurface("grey", det))


def test_pgd_l1_flip_matches_exhaustive_oracle():
    d = 24
    for trial in range(30):
        det = linear_detector(d, seed=trial)
        surf = AttackSurface("grey", det)
        x = random_rows(1, d, seed=1000 + trial)
        lower, upper = default_bounds(x, "add-only")
        spec = AttackSpec(kind="pgd_l1", iterations=1, early_stop=False)
        adv, _ = pgd(x, lower, upper, spec, surf)

        def score_fn(v):
            return float(surf.loss(v[None])[0])

        idx, flipped = best_single_flip(score_fn, x[0], lower[0], upper[0])
        assert np.array_equal(adv[0], flipped), f"trial {trial}: disagrees with oracle at {idx}"


def test_pgd_l1_oracle_free_bounds():
    d = 16
    for trial in range(15):
        det = linear_detector(d, seed=50 + trial)
        surf = AttackSurface("grey", det)
        x = random_rows(1, d, seed=2000 + trial, density=0.5)
        lower, upper = default_bounds(x, "free")
        spec = AttackSpec(kind="pgd_l1", iterations=1, early_stop=False)
        adv, _ = pgd(x, lower, upper, spec, surf)

        def score_fn(v):
            return float(surf.loss(v[None])[0])

        _, flipped = best_single_flip(score_fn, x[0], lower[0], upper[0])
        assert np.array_equal(adv[0], flipped)


def test_bit_ascent_flip_matches_exhaustive_oracle():
    d = 20
    for trial in range(20):
        det = linear_detector(d, seed=200 + trial)
        surf = AttackSurface("grey", det)
        x = random_rows(1, d, seed=3000 + trial)
        lower, upper = default_bounds(x, "add-only")
        spec = AttackSpec(kind="bca", iterations=1, early_stop=False)
        adv_b, _ = bca(x, lower, upper, spec, surf)
        adv_g, _ = grosse(x, lower, upper, spec, surf)

        def loss_fn(v):
            return float(surf.loss(v[None])[0])

        def benign_fn(v):
            return 1.0 - float(det.score(v))

        _, exp_loss = best_single_flip(loss_fn, x[0], lower[0], upper[0])
        _, exp_ben = best_single_flip(benign_fn, x[0], lower[0], upper[0])
        assert np.array_equal(adv_b[0], exp_loss)
        assert np.array_equal(adv_g[0], exp_ben)


def test_bit_ascent_only_adds(desk):
    _, test, det = desk
    x = test.malware().X[:6]
    lower, upper = default_bounds(x, "add-only")
    surf = AttackSurface("grey", det)
    for fn in (bca, grosse):
        adv, _ = fn(x, lower, upper, AttackSpec(kind="bca", iterations=40), surf)
        assert np.all(adv >= x)


def test_pgd_linf_uniform_pull_saturates_addable_bits():
    d = 12
    det = linear_detector(d, seed=0, w=np.full(d, -1.0), b=6.0)
    surf = AttackSurface("grey", det)
    x = np.zeros((1, d))
    x[0, :3] = 1.0
    lower, upper = default_bounds(x, "add-only")
    upper[0, -2:] = 0.0  # two coordinates the policy forbids touching
    spec = AttackSpec(kind="pgd_linf", iterations=100, step_size=0.02, early_stop=False)
    adv, _ = pgd(x, lower, upper, spec, surf)
    expect = x.copy()
    expect[0, :-2] = 1.0
    assert np.array_equal(adv, expect)


def test_rfgsm_start_inside_box_and_seeded(desk):
    _, test, det = desk
    x = test.malware().X[:4]
    lower, upper = default_bounds(x, "add-only")
    surf = AttackSurface("grey", det)
    a1, _ = pgd(x, lower, upper, AttackSpec(kind="rfgsm", iterations=3, seed=7), surf)
    a2, _ = pgd(x, lower, upper, AttackSpec(kind="rfgsm", iterations=3, seed=7),
                AttackSurface("grey", det))
    assert np.array_equal(a1, a2)
    validate_adversarial(x, a1, lower, upper)
    assert np.all(a1 >= x)  # add-only box survives the random start


# ------------------------------------------------------ gradient-free suite

def test_salt_pepper_failure_leaves_rows_unchanged():
    d = 20
    det = linear_detector(d, seed=4, threshold=0.0)  # nothing ever looks benign
    surf = AttackSurface("black", det)
    x = random_rows(3, d, seed=5)
    lower, upper = default_bounds(x, "free")
    spec = AttackSpec(kind="salt_pepper", repeats=3, intensity_step=0.01)
    adv, info = salt_pepper(x, lower, upper, spec, surf)
    assert not info["success"].any()
    assert np.array_equal(adv, x)
    assert int(info["queries"][0]) == 3 * 100  # full sweep, every repeat


def test_salt_pepper_trivial_success_keeps_least_noise():
    d = 40
    det = linear_detector(d, seed=4, threshold=2.0)  # everything looks benign
    surf = AttackSurface("black", det)
    x = random_rows(4, d, seed=6)
    lower, upper = default_bounds(x, "free")
    spec = AttackSpec(kind="salt_pepper", repeats=10, intensity_step=0.001, seed=3)
    adv, info = salt_pepper(x, lower, upper, spec, surf)
    assert info["success"].all()
    flips = np.sum(adv != x, axis=1)
    assert flips.mean() < 1.0  # min over repeats at the lowest intensity


def test_salt_pepper_deterministic(desk):
    _, test, det = desk
    x = test.malware().X[:6]
    lower, upper = default_bounds(x, "add-only")
    spec = AttackSpec(kind="salt_pepper", seed=21)
    a1, i1 = salt_pepper(x, lower, upper, spec, AttackSurface("grey", det))
    a2, i2 = salt_pepper(x, lower, upper, spec, AttackSurface("grey", det))
    assert np.array_equal(a1, a2)
    assert np.array_equal(i1["success"], i2["success"])


def test_pointwise_reverts_toward_original(desk):
    _, test, det = desk
    x = test.malware().X[:8]
    lower, upper = default_bounds(x, "add-only")
    spec = AttackSpec(kind="pointwise", seed=21)
    seed_adv, seed_info = salt_pepper(
        x, lower, upper, AttackSpec(kind="salt_pepper", seed=21),
        AttackSurface("grey", det))
    adv, info = pointwise(x, lower, upper, spec, AttackSurface("grey", det))
    assert np.array_equal(info["success"], seed_info["success"])
    for s in range(x.shape[0]):
        if not info["success"][s]:
            assert np.array_equal(adv[s], x[s])
            continue
        seed_flips = set(np.flatnonzero(seed_adv[s] != x[s]).tolist())
        kept = set(np.flatnonzero(adv[s] != x[s]).tolist())
        assert kept <= seed_flips
        assert np.sum(adv[s] != x[s]) <= np.sum(seed_adv[s] != x[s])
        score, label = predict(det, adv[s])
        assert label == 0


def test_pointwise_minimal_on_linear_pipeline():
    d = 14
    hits = 0
    for trial in range(12):
        w = Rng(700 + trial).normal(d, scale=1.5) - 0.8  # mostly benign-leaning bits
        x = random_rows(1, d, seed=800 + trial, density=0.25)
        b = 1.5 - float(w @ x[0])  # original sits firmly on the malicious side
        det = linear_detector(d, seed=trial, w=w, b=b)
        surf = AttackSurface("grey", det)
        assert predict(det, x[0])[1] == 1
        lower, upper = default_bounds(x, "add-only")
        spec = AttackSpec(kind="pointwise", seed=trial, repeats=10, intensity_step=0.05)
        adv, info = pointwise(x, lower, upper, spec, surf)
        if not info["success"][0]:
            continue
        hits += 1

        def evades_fn(v):
            return int(predict(det, v)[1]) == 0

        seed_adv, _ = salt_pepper(x, lower, upper,
                                  AttackSpec(kind="salt_pepper", seed=trial, repeats=10,
                                             intensity_step=0.05),
                                  AttackSurface("grey", det))
        oracle_min = minimal_evading_subset(evades_fn, x[0], seed_adv[0])
        got = int(np.sum(adv[0] != x[0]))
        assert got == oracle_min, f"trial {trial}: greedy kept {got}, oracle {oracle_min}"
    assert hits >= 9  # the property must actually get exercised


def test_random_add_zero_budget_identity(desk):
    _, test, det = desk
    x = test.malware().X[:4]
    lower, upper = default_bounds(x, "add-only")
    adv, info = random_add(x, lower, upper,
                           AttackSpec(kind="random_add", query_budget=0),
                           AttackSurface("black", det))
    assert np.array_equal(adv, x)
    assert not info["success"].any()
    assert info["queries"].sum() == 0


def test_random_add_only_adds_and_is_seeded(desk):
    _, test, det = desk
    x = test.malware().X[:6]
    lower, upper = default_bounds(x, "add-only")
    spec = AttackSpec(kind="random_add", seed=9)
    a1, i1 = random_add(x, lower, upper, spec, AttackSurface("black", det))
    a2, _ = random_add(x, lower, upper, spec, AttackSurface("black", det))
    assert np.array_equal(a1, a2)
    assert np.all(a1 >= x)
    for s in np.flatnonzero(i1["success"]):
        assert predict(det, a1[s])[1] == 0


def test_mimicry_free_bounds_single_guide_copies_nearest():
    d = 20
    x = random_rows(3, d, seed=31)
    pool = random_rows(12, d, seed=32, density=0.25)
    lower, upper = default_bounds(x, "free")
    adv, info = mimicry(x, lower, upper, AttackSpec(kind="mimicry", n_guides=1), pool)
    for s in range(3):
        dist = np.sum(pool != x[s], axis=1)
        nearest = pool[np.argmin(dist)]
        assert np.array_equal(adv[s], nearest)
    assert not info["success"].any()  # no surface handed in, nothing claimed


def test_mimicry_add_only_is_partial_union():
    d = 20
    x = random_rows(2, d, seed=33)
    pool = random_rows(8, d, seed=34, density=0.25)
    lower, upper = default_bounds(x, "add-only")
    adv, _ = mimicry(x, lower, upper, AttackSpec(kind="mimicry", n_guides=3), pool)
    for s in range(2):
        dist = np.sum(pool != x[s], axis=1)
        guides = pool[np.argsort(dist, kind="stable")[:3]]
        union = guides.max(axis=0)
        expect = np.maximum(union, x[s])  # original bits cannot be deleted
        assert np.array_equal(adv[s], expect)


def test_mimicry_zero_guides_identity_and_pool_check():
    x = random_rows(2, 10, seed=35)
    pool = random_rows(4, 10, seed=36)
    lower, upper = default_bounds(x, "free")
    adv, _ = mimicry(x, lower, upper, AttackSpec(kind="mimicry", n_guides=0), pool)
    assert np.array_equal(adv, x)
    with pytest.raises(ValueError):
        mimicry(x, lower, upper, AttackSpec(kind="mimicry", n_guides=5), pool)


# ----------------------------------------------------------------- ensembles

def test_max_ma_single_member_equals_bare_run(desk):
    _, test, det = desk
    x = test.malware().X[:6]
    lower, upper = default_bounds(x, "add-only")
    spec = AttackSpec(kind="max_ma", members=("pgd_linf",), iterations=30, seed=4)
    adv, _ = max_ma(x, lower, upper, spec, AttackSurface("grey", det))
    mspec = member_specs(spec)[0]
    bare, _ = pgd(x, lower, upper, mspec, AttackSurface("grey", det))
    assert np.array_equal(adv, bare)


def test_max_ma_selects_member_with_largest_loss(desk):
    _, test, det = desk
    x = test.malware().X[:10]
    lower, upper = default_bounds(x, "add-only")
    spec = AttackSpec(kind="max_ma", iterations=25, seed=4)
    surf = AttackSurface("grey", det)
    adv, info = max_ma(x, lower, upper, spec, surf)
    member_advs = []
    for mspec in member_specs(spec):
        madv, _ = pgd(x, lower, upper, mspec, AttackSurface("grey", det))
        member_advs.append(madv)
    losses = np.stack([surf.loss(m) for m in member_advs])
    pick = np.argmax(losses, axis=0)
    expect = np.stack([member_advs[pick[s]][s] for s in range(x.shape[0])])
    assert np.array_equal(adv, expect)
    assert np.allclose(info["loss"], losses.max(axis=0))


def test_imax_ma_never_below_max_ma(desk):
    _, test, det = desk
    x = test.malware().X[:10]
    lower, upper = default_bounds(x, "add-only")
    surf = AttackSurface("grey", det)
    _, m = max_ma(x, lower, upper, AttackSpec(kind="max_ma", iterations=25, seed=4), surf)
    _, i = imax_ma(x, lower, upper,
                   AttackSpec(kind="imax_ma", iterations=25, seed=4, restarts=4), surf)
    assert np.all(i["loss"] >= m["loss"] - 1e-12)


def test_imax_ma_single_restart_equals_max_ma(desk):
    _, test, det = desk
    x = test.malware().X[:6]
    lower, upper = default_bounds(x, "add-only")
    a_max, _ = max_ma(x, lower, upper,
                      AttackSpec(kind="max_ma", iterations=20, seed=4),
                      AttackSurface("grey", det))
    a_i, _ = imax_ma(x, lower, upper,
                     AttackSpec(kind="imax_ma", iterations=20, seed=4, restarts=1),
                     AttackSurface("grey", det))
    assert np.array_equal(a_max, a_i)


def test_stepwise_single_member_equals_pgd(desk):
    _, test, det = desk
    x = test.malware().X[:5]
    lower, upper = default_bounds(x, "add-only")
    spec = AttackSpec(kind="stepwise_ma", members=("pgd_linf",), iterations=40,
                      seed=2, early_stop=False)
    adv, _ = stepwise_ma(x, lower, upper, spec, AttackSurface("grey", det))
    mspec = member_specs(spec)[0]
    bare, _ = pgd(x, lower, upper, mspec, AttackSurface("grey", det))
    assert np.array_equal(adv, bare)


def test_stepwise_rejects_unknown_member(desk):
    _, test, det = desk
    x = test.malware().X[:2]
    lower, upper = default_bounds(x, "add-only")
    spec = AttackSpec(kind="stepwise_ma", members=("bca",), iterations=2, early_stop=False)
    with pytest.raises(ValueError):
        stepwise_ma(x, lower, upper, spec, AttackSurface("grey", det))


def test_stepwise_defaults_interleave_l2_linf(desk):
    _, test, det = desk
    x = test.malware().X[:6]
    lower, upper = default_bounds(x, "add-only")
    spec = AttackSpec(kind="stepwise_ma", iterations=30, seed=2)
    adv, info = stepwise_ma(x, lower, upper, spec, AttackSurface("grey", det))
    validate_adversarial(x, adv, lower, upper)
    assert info["success"].mean() > 0.5  # undefended desk model should fall


# ---------------------------------------------------------------- dispatcher

def test_run_attack_returns_validated_results(desk):
    train, test, det = desk
    x = test.malware().X[:5]
    bounds = default_bounds(x, "add-only")
    surf = AttackSurface("grey", det)
    res = run_attack(default_spec("pgd_l1", "grey", seed=1), x, bounds, surf)
    assert len(res) == 5
    for r in res:
        assert isinstance(r, AttackResult)
        assert r.flipped == int(np.sum(r.original != r.adversarial))
        validate_adversarial(r.original, r.adversarial, *default_bounds(r.original[None], "add-only"))


def test_run_attack_lifts_single_vector(desk):
    _, test, det = desk
    x = test.malware().X[0]
    bounds = default_bounds(x[None], "add-only")
    res = run_attack(default_spec("bca", "grey"), x, (bounds[0][0], bounds[1][0]),
                     AttackSurface("grey", det))
    assert len(res) == 1


def test_run_attack_mimicry_requires_pool(desk):
    train, test, det = desk
    x = test.malware().X[:3]
    bounds = default_bounds(x, "add-only")
    with pytest.raises(ValueError):
        run_attack(default_spec("mimicry"), x, bounds, AttackSurface("grey", det))
    res = run_attack(default_spec("mimicry"), x, bounds, AttackSurface("grey", det),
                     benign_pool=train.benign().X)
    assert len(res) == 3


def test_run_attack_unknown_kind(desk):
    _, test, det = desk
    x = test.malware().X[:2]
    bounds = default_bounds(x, "add-only")
    with pytest.raises(ValueError):
        run_attack(AttackSpec(kind="warp"), x, bounds, AttackSurface("grey", det))


def test_all_attacks_deterministic_across_fresh_surfaces(desk):
    train, test, det = desk
    x = test.malware().X[:6]
    bounds = default_bounds(x, "add-only")
    pool = train.benign().X
    for kind in ATTACK_KINDS:
        spec = default_spec(kind, "grey", seed=13)
        if kind in ("pgd_l1", "pgd_linf", "max_ma", "imax_ma"):
            spec = AttackSpec(**{**spec.__dict__, "iterations": 20})
        r1 = run_attack(spec, x, bounds, AttackSurface("grey", det), benign_pool=pool)
        r2 = run_attack(spec, x, bounds, AttackSurface("grey", det), benign_pool=pool)
        for a, b in zip(r1, r2):
            assert np.array_equal(a.adversarial, b.adversarial), kind
            assert a.success == b.success and a.queries == b.queries
