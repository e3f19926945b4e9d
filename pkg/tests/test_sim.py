import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mqds.channel import pulse_rates
from mqds.params import ChannelParams, ProtocolParams
from mqds.sim import AdversaryScript, Kind, empirical_stats, majority_vote, run_protocol


def _params(M=3, N=100_000, **kw):
    kw = {"T_a": 0.03, "T_v": 0.06, "channel": ChannelParams(10.0, e_mis=0.005), **kw}
    return ProtocolParams(M=M, N=N, **kw)


def test_vote_rules():
    assert majority_vote({"B": True, "C": True}, 3)
    assert not majority_vote({"B": True, "C": False}, 3)
    assert not majority_vote({"B": False, "C": True}, 3)
    # four parties: a single dissenting verifier aborts under the default rule
    four = {"B": True, "C": True, "D": False}
    assert not majority_vote(four, 4)
    assert majority_vote(four, 4, rule="participants")
    assert majority_vote({"B": True, "C": True, "D": False, "E": True}, 5)
    assert not majority_vote({"B": True, "C": False, "D": False, "E": True}, 5)


@given(st.sampled_from([3, 4, 5]), st.booleans())
def test_unanimous_votes(M, flag):
    names = ("B", "C", "D", "E")[: M - 1]
    for rule in ("verifiers", "participants"):
        assert majority_vote(dict.fromkeys(names, flag), M, rule) is flag


def test_vote_needs_every_recipient():
    with pytest.raises(ValueError):
        majority_vote({"B": True}, 3)


def test_honest_run_accepts():
    out = run_protocol(_params(), seed=1)
    assert out.verdict
    assert all(out.E_cu[q] < 0.03 for q in ("B", "C"))


def test_zero_pulses_abort():
    out = run_protocol(_params(N=0), seed=1)
    assert not out.verdict
    assert out.reason == "no data"


@pytest.mark.parametrize("M", [3, 4, 5])
def test_forgery_rejected(M):
    out = run_protocol(_params(M=M), AdversaryScript(Kind.FORGING_BOB, flip_rate=0.5), seed=2)
    assert out.decisions["B"]
    assert not out.verdict


def test_forgery_below_threshold_goes_through():
    out = run_protocol(_params(), AdversaryScript(Kind.FORGING_BOB, flip_rate=0.01), seed=2)
    assert out.verdict


def test_repudiation_script_splits_bob_from_verifiers():
    out = run_protocol(_params(M=4), AdversaryScript(Kind.REPUDIATING_ALICE, divergence=0.3), seed=3)
    assert out.decisions["B"]
    assert not out.decisions["C"] and not out.decisions["D"]


def test_collusion_only_with_five_parties():
    with pytest.raises(ValueError):
        run_protocol(_params(M=4), AdversaryScript(Kind.COLLUDING_EMERY_BOB), seed=0)


def test_colluding_emery_cannot_carry_a_forgery():
    out = run_protocol(_params(M=5), AdversaryScript(Kind.COLLUDING_EMERY_BOB, flip_rate=0.5), seed=4)
    assert out.decisions["E"]
    assert not out.verdict


def test_transcript_invariants():
    p = _params(M=4, N=5000)
    out = run_protocol(p, seed=5, keep_transcript=True)
    doc = json.loads(out.transcript.to_json())
    pub, parties = doc["public"], doc["parties"]
    # post-matching: Alice's declared states agree on every matched index
    sent = parties["A"]["records"]["sent"]
    matched = {q: np.array(pub["clicks"][q])[pub["permutations"][q]] for q in p.recipients}
    ref = np.array(sent["B"])[matched["B"]]
    for q in p.recipients:
        assert np.array_equal(np.array(sent[q])[matched[q]], ref)
        assert len(parties[q]["records"]["bits"]) == len(ref)
    # test and untested positions partition the mu string
    intens = np.array(parties["A"]["records"]["intensity"]["B"])[matched["B"]]
    mu_pos = set(np.nonzero(intens == 0)[0].tolist())
    test = set(pub["test_indices"])
    assert test <= mu_pos
    assert len(pub["signature"]) == len(mu_pos - test)
    # recipients never announce which results were conclusive
    assert "conclusive" not in json.dumps(pub)


def test_deterministic_replay():
    p = _params(N=4000)
    a = run_protocol(p, seed=9, keep_transcript=True)
    b = run_protocol(p, seed=9, keep_transcript=True)
    c = run_protocol(p, seed=10, keep_transcript=True)
    assert a.transcript.digest() == b.transcript.digest() != c.transcript.digest()


def test_batches_independent_of_workers():
    p = _params(N=30_000)
    a = run_protocol(p, seed=3, batch_size=10_000)
    b = run_protocol(p, seed=3, batch_size=10_000, workers=2)
    assert a.E_cu == b.E_cu
    assert np.array_equal(a.tallies["C"].conclusive, b.tallies["C"].conclusive)


def test_transcript_size_limit():
    with pytest.raises(ValueError):
        run_protocol(_params(N=20_000), seed=0, batch_size=10_000, keep_transcript=True)


def test_empirical_counts_are_consistent():
    p = _params(N=200_000)
    out = run_protocol(p, seed=6)
    stats = empirical_stats(out, p.N)
    for q, t in out.tallies.items():
        assert t.matched.sum() <= t.raw_clicks.sum()
        assert np.array_equal(t.matched, out.tallies["B"].matched)
        for label in ("mu", "nu", "vacuum"):
            c = stats[q][label]
            assert c.m_c <= c.n_c <= c.n


def test_conclusive_fraction_one_sixth_without_noise():
    p = ProtocolParams(N=300_000, channel=ChannelParams(0.0, e_mis=0.0, p_dark=0.0))
    out = run_protocol(p, seed=8)
    for t in out.tallies.values():
        n, k = t.matched.sum(), t.conclusive.sum()
        assert abs(k / n - 1 / 6) < 3 * np.sqrt(n * (1 / 6) * (5 / 6)) / n
        assert t.errors.sum() == 0


def test_error_rate_matches_analytic_prediction():
    p = _params(N=500_000)
    out = run_protocol(p, seed=12)
    r = pulse_rates(p.mu, p.channel)
    e = r.error / r.conclusive
    for t in out.tallies.values():
        n = t.conclusive[0]
        assert abs(t.errors[0] / n - e) < 3 * np.sqrt(e * (1 - e) / n)


@pytest.mark.parametrize("M", [3, 5])
def test_independent_error_pattern_model(M):
    # fraction of jointly conclusive untested positions where exactly one of
    # Bob and a verifier errs, against e_B (1 - e_V) + e_V (1 - e_B)
    p = _params(M=M, N=1_000_000, channel=ChannelParams(10.0, e_mis=0.02))
    r = pulse_rates(p.mu, p.channel)
    e = r.error / r.conclusive
    q = 2 * e * (1 - e)
    for seed in range(3):
        out = run_protocol(p, seed=seed)
        for v in p.verifiers:
            t = out.tallies[v]
            assert t.joint_c > 1000
            assert abs(t.pattern_diff - t.joint_c * q) <= 3 * np.sqrt(t.joint_c * q * (1 - q))
