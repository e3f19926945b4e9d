"""Event-level Monte Carlo of the full protocol: key generation, post-matching,
estimation, messaging and the majority vote.

Pulses are drawn in batches. Each batch is post-matched on its own, which
drops at most a handful of events per (intensity, state) group and keeps
memory flat; tallies are summed over batches. Per-pulse transcripts are
kept only when asked for and N is small.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import CLASSIFY_TABLE, INTENSITIES, ChannelStats, Counts, sample_detections
from .params import ProtocolParams
from .protocol import CATALOG, STATES, sets_containing, SET_INDEX

BATCH_SIZE = 1_000_000
TRANSCRIPT_LIMIT = 10_000_000
TRANSCRIPT_SCHEMA = "mqds-transcript/1"

# _SETS_OF_STATE[s] lists the four catalog indices containing state s;
# _TRUTH[set, s] is the bit state s encodes in that set (-1 if absent).
_SETS_OF_STATE = np.array([[SET_INDEX[e] for e in sets_containing(s)] for s in STATES])
_TRUTH = np.full((len(CATALOG), len(STATES)), -1, dtype=np.int8)
for _i, _enc in enumerate(CATALOG):
    _TRUTH[_i, STATES.index(_enc.first)] = 0
    _TRUTH[_i, STATES.index(_enc.second)] = 1
# Antipode of each state code: flip the sign bit.
_ANTIPODE = np.arange(6) ^ 1


class Kind(enum.Enum):
    NONE = "none"
    FORGING_BOB = "forging-bob"
    REPUDIATING_ALICE = "repudiating-alice"
    COLLUDING_EMERY_BOB = "colluding-emery-bob"
    COLLUDING_EMERY_ALICE = "colluding-emery-alice"


@dataclass(frozen=True)
class AdversaryScript:
    """Simple parameterized misbehaviour, used as a sanity probe.

    flip_rate: fraction of forwarded signature bits Bob flips when forging.
    divergence: fraction of pulses toward the verifiers that Alice replaces by
    the antipode of the state she later declares when repudiating.
    """

    kind: Kind = Kind.NONE
    flip_rate: float = 0.5
    divergence: float = 0.1

    def __post_init__(self):
        if not 0 <= self.flip_rate <= 1 or not 0 <= self.divergence <= 1:
            raise ValueError("adversary rates must lie in [0, 1]")

    def check(self, M: int) -> None:
        if self.kind in (Kind.COLLUDING_EMERY_BOB, Kind.COLLUDING_EMERY_ALICE) and M != 5:
            raise ValueError("Emery only exists in the five-party protocol")

    @property
    def forging(self) -> bool:
        return self.kind in (Kind.FORGING_BOB, Kind.COLLUDING_EMERY_BOB)

    @property
    def repudiating(self) -> bool:
        return self.kind in (Kind.REPUDIATING_ALICE, Kind.COLLUDING_EMERY_ALICE)


HONEST = AdversaryScript()


def majority_vote(decisions: dict[str, bool], M: int, rule: str = "verifiers") -> bool:
    """Global verdict from per-recipient accept flags.

    "verifiers": Bob must accept and strictly more than half of the verifiers
    must too. For M = 3 this is Charlie's decision, for M = 4 both Charlie and
    David have to accept, for M = 5 two of three.
    "participants": strictly more than half of all recipients, Bob included;
    with M = 4 a single dissenting verifier is then outvoted.
    """
    if len(decisions) != M - 1:
        raise ValueError(f"expected {M - 1} decisions, got {len(decisions)}")
    if rule == "verifiers":
        ver = [ok for q, ok in decisions.items() if q != "B"]
        return decisions["B"] and sum(ver) > len(ver) / 2
    if rule == "participants":
        return sum(decisions.values()) > len(decisions) / 2
    raise ValueError(f"unknown voting rule {rule!r}")


@dataclass
class PartyTranscript:
    role: str
    records: dict[str, list]  # column name -> per-pulse values
    permutation: list[int] | None = None
    test_indices: list[int] | None = None
    decision: bool | None = None


@dataclass
class Transcript:
    """Public announcements plus each party's private records.

    Schema (``to_json``): {"schema", "M", "seed", "public": {"clicks": {Q: [pulse
    index]}, "intensities": {Q: [code]}, "permutations": {Q: [index into Q's
    click list]}, "sets": [catalog index], "test_indices": [matched index],
    "test_bits": [bit], "signature": [bit], "forwarded": {Q: [bit]}},
    "parties": {role: {"role", "records", "permutation", "test_indices",
    "decision"}}}. Intensity codes are 0 = mu, 1 = nu, 2 = vacuum; state codes
    follow STATES; outcome code -1 is no click.
    """

    M: int
    seed: int
    public: dict
    parties: dict[str, PartyTranscript]

    def to_dict(self) -> dict:
        return {
            "schema": TRANSCRIPT_SCHEMA,
            "M": self.M,
            "seed": self.seed,
            "public": self.public,
            "parties": {k: asdict(v) for k, v in self.parties.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


@dataclass
class Tally:
    """Per-recipient counters; additive over batches."""

    raw_clicks: np.ndarray  # [intensity]
    matched: np.ndarray  # [intensity], identical for every recipient
    conclusive: np.ndarray  # [intensity]
    errors: np.ndarray  # [intensity]
    test_c: int = 0
    test_err: int = 0
    untested_c: int = 0
    untested_err: int = 0  # mismatches against the signature actually received
    joint_c: int = 0  # untested positions conclusive for this recipient and for Bob
    pattern_diff: int = 0  # of those, positions where exactly one of the two is in error

    @classmethod
    def zero(cls) -> "Tally":
        z = lambda: np.zeros(3, dtype=np.int64)  # noqa: E731
        return cls(z(), z(), z(), z())

    def __iadd__(self, o: "Tally") -> "Tally":
        self.raw_clicks += o.raw_clicks
        self.matched += o.matched
        self.conclusive += o.conclusive
        self.errors += o.errors
        self.test_c += o.test_c
        self.test_err += o.test_err
        self.untested_c += o.untested_c
        self.untested_err += o.untested_err
        self.joint_c += o.joint_c
        self.pattern_diff += o.pattern_diff
        return self


@dataclass
class RunOutcome:
    M: int
    seed: int
    script: AdversaryScript
    tallies: dict[str, Tally]
    decisions: dict[str, bool]
    verdict: bool
    reason: str = ""
    E_ct: dict[str, float] = field(default_factory=dict)
    E_cu: dict[str, float] = field(default_factory=dict)
    P_c: dict[str, float] = field(default_factory=dict)
    transcript: Transcript | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict


def _match(keys: dict[str, np.ndarray], reference: str) -> dict[str, np.ndarray]:
    """Post-matching of click lists by (intensity, state) key.

    Returns, per recipient, indices into its click list such that entry j
    of every recipient carries the same key; entries follow the reference
    recipient's click order. Within a key, events pair first come first served.
    """
    n_keys = 18
    counts = {q: np.bincount(k, minlength=n_keys) for q, k in keys.items()}
    m = np.min(np.stack(list(counts.values())), axis=0)
    order, rank, start = {}, {}, {}
    for q, k in keys.items():
        o = np.argsort(k, kind="stable")
        st = np.concatenate([[0], np.cumsum(counts[q])[:-1]])
        r = np.empty(len(k), dtype=np.int64)
        r[o] = np.arange(len(k)) - st[k[o]]
        order[q], rank[q], start[q] = o, r, st
    ref_k = keys[reference]
    keep = np.nonzero(rank[reference] < m[ref_k])[0]
    kk, rr = ref_k[keep], rank[reference][keep]
    out = {reference: keep}
    for q in keys:
        if q != reference:
            out[q] = order[q][start[q][kk] + rr]
    return out


def _run_batch(params: ProtocolParams, script: AdversaryScript, n: int, seq: np.random.SeedSequence, keep: bool):
    rng = np.random.default_rng(seq)
    ch = params.channel
    lam_values = np.array([params.mu, params.nu, 0.0])
    probs = [params.p_mu, params.p_nu, params.p_0]
    recips = params.recipients
    verifiers = set(params.verifiers)

    sent, lam_idx, outcomes, bases, clicks, keys = {}, {}, {}, {}, {}, {}
    for q in recips:
        s = rng.integers(0, 6, n)
        li = rng.choice(3, size=n, p=probs)
        b = rng.integers(0, 3, n)
        physical = s
        if script.repudiating and q in verifiers:
            flip = rng.random(n) < script.divergence
            physical = np.where(flip, _ANTIPODE[s], s)
        out = sample_detections(physical, lam_values[li], b, ch, rng)
        idx = np.nonzero(out >= 0)[0]
        sent[q], lam_idx[q], outcomes[q], bases[q], clicks[q] = s, li, out, b, idx
        keys[q] = li[idx] * 6 + s[idx]

    matched = _match(keys, "B")
    ref = clicks["B"][matched["B"]]
    m_state, m_lam = sent["B"][ref], lam_idx["B"][ref]
    L = len(ref)
    sets = _SETS_OF_STATE[m_state, rng.integers(0, 4, L)]
    alice_bits = _TRUTH[sets, m_state]

    mu_pos = np.nonzero(m_lam == 0)[0]
    test_mask = rng.random(len(mu_pos)) < params.t  # drawn by the designated verifier
    test_pos, untested_pos = mu_pos[test_mask], mu_pos[~test_mask]
    signature = alice_bits[untested_pos]

    forwarded = signature
    if script.forging:
        forwarded = signature ^ (rng.random(len(signature)) < script.flip_rate).astype(np.int8)

    tallies, bits_of, errs = {}, {}, {}
    for q in recips:
        pulse = clicks[q][matched[q]]
        bits = CLASSIFY_TABLE[sets, outcomes[q][pulse]]
        bits_of[q] = bits
        conc = bits >= 0
        err = conc & (bits != alice_bits)
        t = Tally.zero()
        t.raw_clicks += np.bincount(lam_idx[q][clicks[q]], minlength=3)
        t.matched += np.bincount(m_lam, minlength=3)
        t.conclusive += np.bincount(m_lam[conc], minlength=3)
        t.errors += np.bincount(m_lam[err], minlength=3)
        t.test_c = int(conc[test_pos].sum())
        t.test_err = int(err[test_pos].sum())
        received = signature if q == "B" else forwarded
        uc = conc[untested_pos]
        t.untested_c = int(uc.sum())
        t.untested_err = int((uc & (bits[untested_pos] != received)).sum())
        tallies[q] = t
        errs[q] = err[untested_pos]

    conc_B = bits_of["B"][untested_pos] >= 0
    for q in recips:
        both = conc_B & (bits_of[q][untested_pos] >= 0)
        tallies[q].joint_c = int(both.sum())
        tallies[q].pattern_diff = int((both & (errs[q] != errs["B"])).sum())

    records = None
    if keep:
        records = {
            "sent": {q: sent[q].tolist() for q in recips},
            "intensity": {q: lam_idx[q].tolist() for q in recips},
            "basis": {q: bases[q].tolist() for q in recips},
            "outcome": {q: outcomes[q].tolist() for q in recips},
            "clicks": {q: clicks[q].tolist() for q in recips},
            "permutation": {q: matched[q].tolist() for q in recips},
            "bits": {q: bits_of[q].tolist() for q in recips},
            "sets": sets.tolist(),
            "alice_bits": alice_bits.tolist(),
            "test_indices": test_pos.tolist(),
            "signature": signature.tolist(),
            "forwarded": forwarded.tolist(),
        }
    return tallies, records


def _rate(err: int, conc: int) -> float:
    return err / conc if conc else math.nan


def _transcript(params: ProtocolParams, seed: int, rec: dict, decisions: dict[str, bool]) -> Transcript:
    recips = params.recipients
    test = rec["test_indices"]
    public = {
        "clicks": rec["clicks"],
        "intensities": {q: [rec["intensity"][q][i] for i in rec["clicks"][q]] for q in recips},
        "permutations": rec["permutation"],
        "sets": rec["sets"],
        "test_indices": test,
        "test_bits": [rec["alice_bits"][i] for i in test],
        "signature": rec["signature"],
        "forwarded": {q: (rec["signature"] if q == "B" else rec["forwarded"]) for q in recips},
    }
    parties = {
        "A": PartyTranscript(
            "A",
            {"sent": rec["sent"], "intensity": rec["intensity"], "sets": rec["sets"], "bits": rec["alice_bits"]},
            test_indices=test,
        )
    }
    for q in recips:
        parties[q] = PartyTranscript(
            q,
            {"basis": rec["basis"][q], "outcome": rec["outcome"][q], "bits": rec["bits"][q]},
            permutation=rec["permutation"][q],
            test_indices=test,
            decision=decisions.get(q),
        )
    return Transcript(params.M, seed, public, parties)


def run_protocol(
    params: ProtocolParams,
    script: AdversaryScript = HONEST,
    seed: int = 0,
    *,
    rule: str = "verifiers",
    batch_size: int = BATCH_SIZE,
    keep_transcript: bool = False,
    workers: int = 1,
) -> RunOutcome:
    """Simulate one protocol run and return decisions, rates and the verdict.

    Batch randomness comes from ``SeedSequence(seed).spawn``, so the result
    does not depend on ``workers``.
    """
    script.check(params.M)
    recips = params.recipients
    N = int(params.N)
    if N <= 0:
        return RunOutcome(params.M, seed, script, {q: Tally.zero() for q in recips},
                          {q: False for q in recips}, False, "no data")
    if keep_transcript and (N > TRANSCRIPT_LIMIT or N > batch_size):
        raise ValueError(f"transcripts are kept only for a single batch of at most {TRANSCRIPT_LIMIT} pulses")
    sizes = [batch_size] * (N // batch_size) + ([N % batch_size] if N % batch_size else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(params, script, n, s, keep_transcript) for n, s in zip(sizes, seqs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_batch, *zip(*jobs)))
    else:
        results = [_run_batch(*j) for j in jobs]

    tallies = {q: Tally.zero() for q in recips}
    for part, _ in results:
        for q in recips:
            tallies[q] += part[q]

    E_ct = {q: _rate(t.test_err, t.test_c) for q, t in tallies.items()}
    E_cu = {q: _rate(t.untested_err, t.untested_c) for q, t in tallies.items()}
    P_c = {q: _rate(int(t.conclusive[0]), int(t.matched[0])) for q, t in tallies.items()}
    thresholds = {"B": params.T_a, **params.verifier_thresholds}
    # An empty untested conclusive string leaves nothing to check: reject.
    decisions = {q: bool(E_cu[q] <= thresholds[q]) for q in recips}
    if script.kind is Kind.COLLUDING_EMERY_BOB:
        decisions["E"] = True
    elif script.kind is Kind.COLLUDING_EMERY_ALICE:
        decisions["E"] = False
    verdict = majority_vote(decisions, params.M, rule)
    reason = "" if verdict else ("Bob rejected" if not decisions["B"] else "verifier majority rejected")
    transcript = _transcript(params, seed, results[0][1], decisions) if keep_transcript else None
    return RunOutcome(params.M, seed, script, tallies, decisions, verdict, reason, E_ct, E_cu, P_c, transcript)


def empirical_stats(outcome: RunOutcome, N: float | None = None) -> ChannelStats:
    """Counts per recipient and intensity on the post-matched strings, the data
    the decoy analysis works with."""
    counts = {}
    for q, t in outcome.tallies.items():
        counts[q] = {
            label: Counts(float(t.matched[i]), float(t.conclusive[i]), float(t.errors[i]))
            for i, label in enumerate(INTENSITIES)
        }
    return ChannelStats(float(N) if N is not None else math.nan, counts)
