"""Acceptance run: one PASS/FAIL line per criterion.

``python3 tests/test_acceptance.py`` prints the table; under pytest each
criterion is its own test (use ``-s`` to see the lines).
"""
import sys
import time

import numpy as np
import pytest

from cpdilation import correspondence as corrmod
from cpdilation import covrep, dilation, prodsys, stinespring
from cpdilation.cli import main as cli_main
from cpdilation.cpmap import (compose, depolarizing, identity_map, random_channel, random_unitary, semigroup,
                              unitary_conjugation)
from cpdilation.algebra import full_algebra

SIZES = (2, 3, 4)
CORPUS_PER_SIZE = 50


def _corpus():
    rng = np.random.default_rng(2024)
    out = []
    for d in SIZES:
        for k in range(CORPUS_PER_SIZE):
            rank = 1 + k % (d * d)
            out.append(random_channel(d, rank, rng))
    return out


CORPUS = _corpus()


def _choi_rank_oracle(P):
    # brute force: Choi matrix from Kraus vectors, numpy's rank
    v = np.stack([K.reshape(-1) for K in P.kraus], axis=1)
    return int(np.linalg.matrix_rank(v @ v.conj().T, tol=1e-9))


def crit_stinespring():
    worst, iso, minimal = 0.0, 0.0, True
    for P in CORPUS:
        t = stinespring.build(P)
        worst = max(worst, stinespring.stinespring_defect(t))
        iso = max(iso, stinespring.isometry_defect(t))
        cert = stinespring.minimality_certificate(t)
        minimal &= cert["closure_dim"] == t.dil_dim
    return worst <= 1e-10 and iso <= 1e-10 and minimal, f"identity {worst:.1e}, W*W-I {iso:.1e}, minimal {minimal}"


def crit_adjoint():
    rng = np.random.default_rng(1)
    worst = 0.0
    for P in CORPUS:
        t = stinespring.build(P)
        for _ in range(100):
            X = P.domain.random_element(rng)
            h = rng.standard_normal(P.d) + 1j * rng.standard_normal(P.d)
            worst = max(worst, float(np.linalg.norm(stinespring.w_adjoint(t, X, h) - P(X) @ h)))
    return worst <= 1e-10, f"max defect {worst:.1e} over {100 * len(CORPUS)} samples"


def crit_arveson():
    worst, mismatches = 0.0, 0
    for P in CORPUS:
        E = corrmod.arveson(P)
        worst = max(worst, max(corrmod.arveson_defects(E).values()))
        mismatches += E.dim != _choi_rank_oracle(P)
    return worst <= 1e-9 and mismatches == 0, f"defect {worst:.1e}, rank mismatches {mismatches}"


def crit_density():
    bad = 0
    for P in CORPUS:
        r = corrmod.density_check(corrmod.arveson(P).corr)
        bad += r["rank"] != r["target_dim"]
    return bad == 0, f"{len(CORPUS) - bad}/{len(CORPUS)} exact"


def crit_multiplication():
    rng = np.random.default_rng(5)
    worst, endo_iso, endo_rank_ok = 0.0, 0.0, True
    for k in range(25):
        d = SIZES[k % len(SIZES)]
        P = random_channel(d, 1 + k % 3, rng)
        Q = random_channel(d, 1 + (k + 1) % 3, rng)
        EP, EQ = corrmod.arveson(P), corrmod.arveson(Q)
        m = corrmod.multiplication_map(EP, EQ, corrmod.arveson(compose(P, Q)))
        worst = max(worst, m.coisometry_defect)
        A = unitary_conjugation(random_unitary(d, rng))
        EA = corrmod.arveson(A)
        EAQ = corrmod.arveson(compose(A, Q))
        me = corrmod.multiplication_map(EA, EQ, EAQ)
        endo_iso = max(endo_iso, me.isometry_defect, me.coisometry_defect)
        endo_rank_ok &= me.kernel_dim == 0 and me.range_dim == EAQ.dim
    ok = worst <= 1e-8 and endo_iso <= 1e-8 and endo_rank_ok
    return ok, f"mm*-I {worst:.1e}; endomorphism case {endo_iso:.1e}, full rank {endo_rank_ok}"


def crit_theta():
    worst = 0.0
    for P in CORPUS:
        rep = covrep.identity_representation(corrmod.arveson(P))
        worst = max(worst, covrep.restricted_distance(covrep.induced_cp_map(rep), P))
    return worst <= 1e-10, f"max distance {worst:.1e}"


def _dilation_channels():
    rng = np.random.default_rng(9)
    return [identity_map(full_algebra(2)), unitary_conjugation(random_unitary(2, rng)), depolarizing(0.3),
            random_channel(2, 2, rng), random_channel(3, 2, rng)]


def crit_power():
    worst, proj, corner_ok = 0.0, 0.0, True
    for P in _dilation_channels():
        r = dilation.power_dilation_check(P, 4)
        worst = max(worst, r["max_defect"])
        proj = max([proj] + [row["increasing_projection"] for row in r["table"]])
        corner_ok &= r["corner"]["span_dim"] == r["corner"]["algebra_dim"] and r["corner"]["equal"]
    return worst <= 1e-8 and proj <= 1e-10 and corner_ok, \
        f"power {worst:.1e}, projection {proj:.1e}, corner span equal {corner_ok}"


def crit_models():
    rng = np.random.default_rng(3)
    worst = 0.0
    for P in (depolarizing(0.3), random_channel(2, 2, rng), random_channel(3, 2, rng)):
        r = dilation.cross_validate_models(P, 3)
        worst = max(worst, r["model_difference"])
    return worst <= 1e-8, f"moment difference {worst:.1e} (words up to length 3)"


def _semigroups():
    return [semigroup(depolarizing(0.3), 4), semigroup(random_channel(2, 2, np.random.default_rng(4)), 4)]


SEMIGROUPS = None


def _sgs():
    global SEMIGROUPS
    if SEMIGROUPS is None:
        SEMIGROUPS = _semigroups()
    return SEMIGROUPS


def crit_product_system():
    worst, assoc, count = 0.0, 0.0, 0
    for sg in _sgs():
        for total in range(2, 5):
            for t in range(1, total):
                for p1 in prodsys.all_partitions(t):
                    for p2 in prodsys.all_partitions(total - t):
                        r = prodsys.concat_iso_check(sg, p1, p2)
                        worst = max(worst, r["inner_product_defect"], r["containment"])
                        count += 1
        one = prodsys.Partition.trivial(1)
        for p3 in (one, prodsys.Partition.trivial(2)):
            assoc = max(assoc, prodsys.associativity_check(sg, one, one, p3))
    return worst <= 1e-8 and assoc <= 1e-8, f"concatenation {worst:.1e} over {count} pairs, associativity {assoc:.1e}"


def crit_implementation():
    worst, count = 0.0, 0
    for sg in _sgs():
        for t in range(1, 5):
            for p in prodsys.all_partitions(t):
                worst = max(worst, prodsys.implementation_defect(sg, p))
                count += 1
    return worst <= 1e-10, f"max defect {worst:.1e} over {count} partitions"


def crit_semigroup_dilation():
    worst = {}
    for sg in _sgs():
        r = prodsys.semigroup_dilation_check(sg, 3)
        for k, v in r["clauses"].items():
            worst[k] = max(worst.get(k, 0.0), v)
    top = max(worst.values())
    return top <= 1e-8, f"max clause defect {top:.1e} ({len(worst)} clauses)"


def crit_negative_controls():
    import contextlib
    import io
    seen = []
    for preset, cmd, anchor in (("nonpsd", "stinespring", "NotPSD"), ("nonunital", "stinespring", "NotUnital"),
                                ("nonsemigroup", "prodsys-check", "SemigroupDefect")):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = cli_main([cmd, "--preset", preset])
        seen.append(code == 1 and anchor in buf.getvalue())
    return all(seen), f"exit 1 with anchor: {seen}"


CRITERIA = [
    ("1 stinespring identity", crit_stinespring),
    ("2 adjoint formula", crit_adjoint),
    ("3 arveson correspondence", crit_arveson),
    ("4 density", crit_density),
    ("5 multiplication map", crit_multiplication),
    ("6 theta equals P", crit_theta),
    ("7 power dilation", crit_power),
    ("8 model cross-validation", crit_models),
    ("9 product system", crit_product_system),
    ("10 semigroup implementation", crit_implementation),
    ("11 semigroup dilation", crit_semigroup_dilation),
    ("12 negative controls", crit_negative_controls),
]


def _line(name, fn):
    start = time.perf_counter()
    ok, summary = fn()
    line = f"{'PASS' if ok else 'FAIL'}  {name:<30} {summary}  [{time.perf_counter() - start:.1f}s]"
    print(line)
    return ok


@pytest.mark.parametrize("name,fn", CRITERIA, ids=[c[0].split(" ", 1)[1].replace(" ", "_") for c in CRITERIA])
def test_criterion(name, fn):
    assert _line(name, fn)


if __name__ == "__main__":
    start = time.perf_counter()
    results = [_line(name, fn) for name, fn in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed in {time.perf_counter() - start:.1f}s")
    sys.exit(0 if all(results) else 1)
