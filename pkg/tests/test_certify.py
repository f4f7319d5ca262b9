import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from leastpriv.certify import (
    AccuracyBoundInput,
    CertBudget,
    accuracy_bound,
    binary_entropy,
    binary_entropy_inverse,
    calabro_lower_bound,
    certify_lpp,
    certify_ulpp,
    ldp_epsilon,
    rows_identical_on_support,
    theorem_report,
)
from leastpriv.dist import Alphabet, Channel, JointPmf, Pmf, push_forward
from leastpriv.errors import DomainError, LeakageError
from leastpriv.instances import deterministic_label_joint, label_copy_channel, noisy_posterior_joint
from leastpriv.measures import bayes_accuracy

X2 = Alphabet.range("X", 2)
BSC = Channel.bsc(0.25, X2)
POS = noisy_posterior_joint([0.5, 0.5], [[0.9, 0.1], [0.2, 0.8]])
PARITY = deterministic_label_joint(4, [0, 1, 0, 1])


def test_ldp_epsilon_values():
    assert ldp_epsilon(BSC).epsilon == pytest.approx(1.584963, abs=1e-6)
    assert ldp_epsilon(Channel.identity(X2)).epsilon == math.inf
    assert not ldp_epsilon(Channel.identity(X2)).finite
    assert ldp_epsilon(Channel.constant(X2)).epsilon == 0.0


def test_certify_lpp_examples():
    c = certify_lpp(PARITY, label_copy_channel(PARITY, [0, 1, 0, 1]), CertBudget(0.0))
    assert c.passed and c.achieved == 0.0
    c = certify_lpp(POS, BSC, CertBudget(0.5))
    assert not c.passed and c.achieved == pytest.approx(0.584963, abs=1e-6)
    assert c.residual == pytest.approx(0.084963, abs=1e-6)
    c = certify_lpp(POS, Channel.constant(X2), CertBudget(0.0))
    assert c.passed and c.achieved == 0.0


def test_certify_ulpp_examples():
    px = Pmf(X2, [0.5, 0.5])
    assert certify_ulpp(px, Channel.constant(X2), CertBudget(0.0)).passed
    x4 = Alphabet.range("X", 4)
    c = certify_ulpp(Pmf(x4, np.full(4, 0.25)), Channel.identity(x4), CertBudget(1.0))
    assert c.achieved == pytest.approx(2.0) and not c.passed
    assert certify_ulpp(px, BSC, CertBudget(0.6)).achieved == pytest.approx(0.584963, abs=1e-6)


def test_budget_validation():
    for bad in (-0.1, math.inf, math.nan):
        with pytest.raises(LeakageError):
            CertBudget(bad)


def test_tolerance_is_absolute():
    c = certify_lpp(POS, BSC, CertBudget(0.584963))
    assert c.passed  # achieved 0.5849625 sits just under
    c = certify_lpp(POS, BSC, CertBudget(math.log2(1.5) - 5e-10))
    assert c.passed
    c = certify_lpp(POS, BSC, CertBudget(math.log2(1.5) - 5e-9))
    assert not c.passed


def test_theorem_report_positive_bsc():
    rep = theorem_report(POS, BSC)
    assert rep.all_passed
    assert rep.gamma_lpp == pytest.approx(0.584963, abs=1e-6)
    assert rep.gamma_ulpp == pytest.approx(rep.gamma_lpp, abs=1e-12)
    assert rep.epsilon_ldp.epsilon == pytest.approx(1.584963, abs=1e-6)
    assert all(f.applicable for f in rep.theorem_flags.values())
    assert list(rep.theorem_flags) == [
        "T1_tradeoff", "T2_cond_equals_uncond", "T3_ldp_implies_lpp", "T4_perfect_lpp_markov"]


def test_theorem_report_parity_copy():
    rep = theorem_report(PARITY, label_copy_channel(PARITY, [0, 1, 0, 1]))
    assert rep.all_passed
    assert rep.gamma_lpp == 0.0
    assert rep.utility_iinf == pytest.approx(1.0)
    assert not rep.posterior.strictly_positive
    assert not rep.theorem_flags["T1_tradeoff"].applicable
    assert rep.theorem_flags["T4_perfect_lpp_markov"].passed


def test_theorem_report_constant():
    rep = theorem_report(POS, Channel.constant(X2))
    assert rep.all_passed
    assert rep.gamma_lpp == rep.gamma_ulpp == rep.utility_i1 == rep.utility_iinf == 0.0
    assert rep.epsilon_ldp.epsilon == 0.0


def test_report_json_layout():
    doc = json.loads(theorem_report(POS, BSC).to_json())
    assert list(doc) == ["gamma_lpp", "gamma_ulpp", "epsilon_ldp", "utility_i1", "utility_iinf",
                         "posterior", "theorem_flags"]
    assert doc["gamma_lpp"] == 0.584962500721
    # strict JSON has no infinity, so it is written as a string
    doc = json.loads(theorem_report(POS, Channel.identity(X2)).to_json())
    assert doc["epsilon_ldp"] == "inf"


def test_axis_order_of_joint_does_not_matter():
    a = theorem_report(POS, BSC)
    b = theorem_report(POS.transpose("Y", "X"), BSC)
    assert a.to_dict() == b.to_dict()


# binary entropy and the accuracy bound ----------------------------------------------

def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.25) == pytest.approx(0.811278, abs=1e-6)
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.3) == pytest.approx(binary_entropy(0.7), abs=1e-15)
    with pytest.raises(DomainError):
        binary_entropy(1.5)


def test_binary_entropy_inverse_values():
    assert binary_entropy_inverse(1.0) == 0.5
    assert binary_entropy_inverse(0.0) == 0.0
    assert binary_entropy_inverse(0.5) == pytest.approx(float(oracles.h2_inverse(0.5)), abs=1e-12)
    assert binary_entropy_inverse(0.5) == pytest.approx(0.110028, abs=1e-6)
    with pytest.raises(DomainError):
        binary_entropy_inverse(-0.1)


@pytest.mark.parametrize("t", [1e-6, 0.01, 0.1, 0.3, 0.5, 0.9, 0.999999])
def test_binary_entropy_inverse_matches_oracle(t):
    p = binary_entropy_inverse(t)
    assert abs(binary_entropy(p) - t) <= 1e-12
    assert p == pytest.approx(float(oracles.h2_inverse(t)), abs=1e-12)


@pytest.mark.parametrize("t", [0.01, 0.1, 0.5, 1.0])
def test_calabro_inequality(t):
    assert binary_entropy_inverse(t) >= calabro_lower_bound(t)


def test_binary_entropy_inverse_monotone():
    ts = np.linspace(0, 1, 201)
    ps = [binary_entropy_inverse(float(t)) for t in ts]
    assert all(b >= a for a, b in zip(ps, ps[1:]))


def test_accuracy_bound_values():
    assert accuracy_bound(0.5 + 1e-12) == pytest.approx(0.806574, abs=1e-4)
    assert accuracy_bound(0.5 + 1e-12) == pytest.approx(1 - 1 / (2 * math.log2(6)), abs=1e-9)
    # the formula itself, evaluated at 50 digits
    assert accuracy_bound(0.75) == pytest.approx(float(oracles.accuracy_bound(0.75)), abs=1e-12)
    assert accuracy_bound(0.75) == pytest.approx(0.946150, abs=1e-6)
    assert accuracy_bound(0.9999) == pytest.approx(1.0, abs=1e-3)
    assert accuracy_bound(AccuracyBoundInput(0.6)) == accuracy_bound(0.6)


def test_accuracy_bound_domain():
    for bad in (0.5, 1.0, 0.2, 1.3):
        with pytest.raises(DomainError):
            accuracy_bound(bad)


def test_accuracy_bound_monotone():
    betas = np.linspace(0.5 + 1e-9, 1 - 1e-9, 300)
    vals = [accuracy_bound(float(b)) for b in betas]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(0.5 < v < 1 for v in vals)


# properties -----------------------------------------------------------------------

def _instance(seed, positive=True):
    rng = np.random.default_rng(seed)
    nx, ny, nz = rng.integers(1, 6, size=3)
    if positive:
        post = rng.dirichlet(np.ones(ny), size=nx) * 0.98 + 0.02 / ny
    else:
        post = rng.dirichlet(np.ones(ny) * 0.5, size=nx)
        post[rng.random(post.shape) < 0.3] = 0.0
        post[post.sum(axis=1) == 0, 0] = 1.0
        post /= post.sum(axis=1, keepdims=True)
    j = noisy_posterior_joint(rng.dirichlet(np.ones(nx)), post)
    rows = rng.dirichlet(np.ones(nz) * rng.choice([0.3, 1.0, 5.0]), size=nx)
    if rng.random() < 0.3:
        rows[rng.random(rows.shape) < 0.3] = 0.0
        rows[rows.sum(axis=1) == 0, 0] = 1.0
        rows /= rows.sum(axis=1, keepdims=True)
    return j, Channel((j.axes[0],), Alphabet.range("Z", nz), rows)


def test_tradeoff_sweep_500_instances():
    for seed in range(500):
        j, ch = _instance(seed)
        rep = theorem_report(j, ch)
        assert rep.posterior.strictly_positive
        assert rep.all_passed, seed
        assert rep.utility_i1 <= rep.gamma_lpp + 1e-9
        assert rep.utility_iinf <= rep.gamma_lpp + 1e-9
        assert rep.utility_i1 <= rep.gamma_ulpp + 1e-9
        assert rep.utility_iinf <= rep.gamma_ulpp + 1e-9


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_ldp_dominates_leakage(seed, positive):
    j, ch = _instance(seed, positive)
    rep = theorem_report(j, ch)
    assert rep.epsilon_ldp.epsilon >= rep.gamma_lpp - 1e-9
    assert rep.epsilon_ldp.epsilon >= rep.gamma_ulpp - 1e-9
    assert rep.gamma_lpp <= rep.gamma_ulpp + 1e-9
    assert rep.epsilon_ldp.epsilon == pytest.approx(oracles.ldp_epsilon(ch.rows.tolist()), abs=1e-12)
    assert rep.all_passed
    # utilities never exceed the unconditional leakage, positive or not
    assert max(rep.utility_i1, rep.utility_iinf) <= rep.gamma_ulpp + 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_perfect_lpp_means_identical_rows(seed):
    rng = np.random.default_rng(seed)
    j, ch = _instance(seed)
    if rng.random() < 0.5:
        # force a constant-row channel with a random common row
        row = rng.dirichlet(np.ones(ch.output_axis.size))
        ch = Channel(ch.input_axes, ch.output_axis, np.tile(row, (ch.rows.shape[0], 1)))
    rep = theorem_report(j, ch)
    px = j.marginal("X").probs
    assert (rep.gamma_lpp <= 1e-9) == rows_identical_on_support(px, ch.rows)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fano_chain(seed):
    # Y uniform binary. A uniform binary attribute has majority baseline 1/2,
    # so its accuracy from Z is at most beta = 2**gamma / 2. With that beta
    # the exact task accuracy must sit below the bound.
    rng = np.random.default_rng(seed)
    nx, nz = int(rng.integers(2, 6)), int(rng.integers(2, 6))
    post = rng.dirichlet(np.ones(2), size=nx) * 0.98 + 0.01
    px = rng.dirichlet(np.ones(nx))
    # rescale the label columns so that Y is exactly uniform
    pxy = px[:, None] * post
    pxy = pxy / pxy.sum(axis=0, keepdims=True) * 0.5
    j = JointPmf((Alphabet.range("X", nx), Alphabet.range("Y", 2)), pxy)
    ch = Channel((j.axes[0],), Alphabet.range("Z", nz), rng.dirichlet(np.ones(nz) * 0.5, size=nx))
    rep = theorem_report(j, ch)
    beta = 2.0 ** (rep.gamma_lpp - 1.0)
    acc = bayes_accuracy(push_forward(j, ch).marginal("Y", "Z"), "Y")
    assert acc <= beta + 1e-9
    if 0.5 < beta < 1.0:
        assert acc <= accuracy_bound(beta) + 1e-9
