"""Command-line entry point: ``cpdilation <command> [--input FILE | --preset NAME] ...``.

Exit codes: 0 when every check is within tolerance, 1 when a check fails,
2 for unreadable or invalid input.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import correspondence as corrmod
from . import covrep, dilation, prodsys, stinespring
from .cpmap import CpMap, compose, semigroup, semigroup_from_maps
from .errors import CheckError
from .jsonio import channel_from_json, load_document
from .numerics import rank_tolerance
from .presets import PRESETS, load_preset

COMMANDS = ("stinespring", "arveson", "dilate", "power-check", "prodsys-check", "report")
MAX_DIM = 4096
ADJOINT_SAMPLES = 100


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    input_path: Optional[str]
    preset: Optional[str]
    tolerance: float = 1e-8
    depth: int = 4
    seed: int = 0
    as_json: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if not 0.0 < self.tolerance <= 1e-3:
            raise InputError(f"tolerance must lie in (0, 1e-3], got {self.tolerance}")
        if not 1 <= self.depth <= 8:
            raise InputError(f"depth must lie in [1, 8], got {self.depth}")
        if (self.input_path is None) == (self.preset is None):
            raise InputError("give exactly one of --input and --preset")


def _round(x: Any) -> Any:
    """Three significant digits, so reports do not depend on roundoff noise."""
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.2e}")
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    return x


class Report:
    def __init__(self, tol: float):
        self.tol = tol
        self.checks: List[Dict[str, Any]] = []

    def run(self, name: str, anchor: str, fn: Callable[[], Any]) -> None:
        """fn returns a defect or (defect, details); a raised CheckError counts as a failure."""
        try:
            out = fn()
        except CheckError as exc:
            self.checks.append({"name": name, "anchor": exc.anchor, "defect": exc.defect,
                                "pass": False, "message": str(exc)})
            return
        defect, details = out if isinstance(out, tuple) else (out, None)
        entry = {"name": name, "anchor": anchor, "defect": float(defect), "pass": bool(defect <= self.tol)}
        if details is not None:
            entry["details"] = details
        self.checks.append(entry)

    def fail(self, exc: CheckError, name: str = "input") -> None:
        self.checks.append({"name": name, "anchor": exc.anchor, "defect": exc.defect, "pass": False,
                            "message": str(exc)})

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)


# ---------------------------------------------------------------- pipelines

def _stinespring_checks(P: CpMap, cfg: RunConfig, rep: Report) -> None:
    state: Dict[str, Any] = {}

    def build():
        state["triple"] = stinespring.build(P)
        return stinespring.stinespring_defect(state["triple"]), {"dil_dim": state["triple"].dil_dim}

    rep.run("stinespring-identity", "stinespring-identity", build)
    if "triple" not in state:
        return
    triple = state["triple"]
    rep.run("stinespring-isometry", "isometry", lambda: stinespring.isometry_defect(triple))

    def minimal():
        cert = stinespring.minimality_certificate(triple)
        return float(cert["dil_dim"] - cert["closure_dim"]), {"closure_dim": cert["closure_dim"],
                                                               "rounds": cert["rounds"]}

    rep.run("stinespring-minimality", "minimality", minimal)

    def adjoint():
        rng = np.random.default_rng(cfg.seed)
        M = P.domain
        worst = 0.0
        for _ in range(ADJOINT_SAMPLES):
            X = M.random_element(rng)
            h = rng.standard_normal(P.d) + 1j * rng.standard_normal(P.d)
            out = stinespring.w_adjoint(triple, X, h)
            worst = max(worst, float(np.linalg.norm(out - P(X) @ h)))
        return worst

    rep.run("adjoint-formula", "adjoint-formula", adjoint)


def _arveson_checks(P: CpMap, cfg: RunConfig, rep: Report) -> None:
    state: Dict[str, Any] = {}

    def build():
        state["E"] = corrmod.arveson(P)
        d = corrmod.arveson_defects(state["E"])
        return max(d.values()), d

    rep.run("arveson-identification", "arveson-identification", build)
    if "E" not in state:
        return
    E = state["E"]

    def density():
        r = corrmod.density_check(E.corr)
        return float(r["defect"]), r

    rep.run("density", "density", density)
    if E.corr.over.dim == 1:
        rep.run("dimension-vs-choi-rank", "dimension-vs-choi-rank",
                lambda: (float(abs(E.dim - P.choi_rank)), {"dim": E.dim, "choi_rank": P.choi_rank}))

    def identity_rep():
        r = covrep.identity_representation(E)
        state["rep"] = r
        theta = covrep.induced_cp_map(r)
        return covrep.restricted_distance(theta, P), {"coisometry_defect": covrep.coisometric_defect(r)}

    rep.run("theta-equals-P", "theta-equals-P", identity_rep)
    if "rep" in state:
        rep.run("fully-coisometric", "fully-coisometric", lambda: covrep.coisometric_defect(state["rep"]))

    def multiplication():
        EPP = corrmod.arveson(compose(P, P))
        m = corrmod.multiplication_map(E, E, EPP)
        corrmod.check_coisometry(m)
        return m.coisometry_defect, {"domain_dim": m.domain_dim, "range_dim": m.range_dim}

    rep.run("multiplication-coisometry", "multiplication-coisometry", multiplication)


def _dilate_checks(P: CpMap, cfg: RunConfig, rep: Report) -> None:
    state: Dict[str, Any] = {}

    def build():
        E = corrmod.arveson(P)
        state["tower"] = dilation.build_tower(covrep.identity_representation(E), cfg.depth)
        d = dilation.tower_defects(state["tower"])
        return max(d.values()), {"levels": state["tower"].levels, "defects": d}

    rep.run("tower-invariants", "tower-invariants", build)
    if "tower" in state:
        def minimal():
            r = dilation.minimality_rank(state["tower"])
            return float(r["tower_dim"] - r["span_rank"]), r

        rep.run("tower-minimality", "tower-minimality", minimal)

    def cross():
        r = dilation.cross_validate_models(P, min(cfg.depth, 3))
        return r["model_difference"], {"words": r["words"], "oracle_difference": r["oracle_difference"]}

    rep.run("model-cross-validation", "model-cross-validation", cross)


def _power_checks(P: CpMap, cfg: RunConfig, rep: Report) -> None:
    state: Dict[str, Any] = {}

    def run():
        state["r"] = dilation.power_dilation_check(P, cfg.depth)
        r = state["r"]
        return r["max_defect"], {"levels": r["levels"], "table": r["table"]}

    rep.run("power-dilation", "power-dilation", run)
    if "r" in state:
        r = state["r"]
        c = r["corner"]
        rep.run("corner", "corner", lambda: (float(abs(c["span_dim"] - c["algebra_dim"]))
                                             + c["containment_residual"], c))
        rep.run("increasing-projection", "increasing-projection",
                lambda: max(row["increasing_projection"] for row in r["table"]))
        rep.run("endomorphism", "endomorphism", lambda: r["endomorphism_defect"])


def _prodsys_checks(sg, cfg: RunConfig, rep: Report) -> None:
    N = min(cfg.depth, sg.horizon)
    P = prodsys.Partition

    def refine():
        worst, rows = 0.0, []
        for t in range(2, N + 1):
            d: Dict[str, float] = {}
            prodsys.refinement_isometry(sg, P.trivial(t), P.finest(t), d)
            worst = max([worst] + list(d.values()))
            rows.append({"t": t, **d})
        return worst, rows

    rep.run("refinement", "refinement", refine)

    def factor():
        worst = 0.0
        for t in range(2, N + 1):
            f = prodsys.partition_correspondence(sg, P.finest(t)).factorization
            worst = max([worst] + [abs(v) for v in f.values()])
        return worst

    rep.run("factorization", "factorization", factor)

    def concatenation():
        worst, count = 0.0, 0
        for total in range(2, N + 1):
            for t in range(1, total):
                for p1 in prodsys.all_partitions(t):
                    for p2 in prodsys.all_partitions(total - t):
                        r = prodsys.concat_iso_check(sg, p1, p2)
                        worst = max(worst, r["inner_product_defect"], r["containment"])
                        count += 1
        assoc = prodsys.associativity_check(sg, P.trivial(1), P.trivial(1), P.trivial(1)) if N >= 3 else 0.0
        return max(worst, assoc), {"pairs": count, "associativity": assoc}

    rep.run("concatenation", "concatenation", concatenation)

    def implementation():
        worst = 0.0
        for t in range(1, N + 1):
            for p in prodsys.all_partitions(t):
                worst = max(worst, prodsys.implementation_defect(sg, p))
        return worst

    rep.run("semigroup-implementation", "semigroup-implementation", implementation)

    def dil():
        r = prodsys.semigroup_dilation_check(sg, min(N, 3))
        return max(r["clauses"].values()), r["clauses"]

    rep.run("semigroup-dilation", "semigroup-dilation", dil)

    def converse():
        r = prodsys.converse_semigroup_check(prodsys.identity_rep_family(sg, N))
        return r["semigroup_defect"], {"consistent": r["consistent"]}

    rep.run("converse-semigroup", "converse-semigroup", converse)


# ---------------------------------------------------------------- plumbing

def _estimate_tower_dim(P: CpMap, N: int) -> int:
    m, d = P.choi_rank, P.d
    level, total = d * (m - 1) if m > 1 else 0, d
    for _ in range(N):
        total += level
        level *= m
    return total


def _estimate_grid_dim(rank: int, d: int, N: int) -> int:
    return d * rank ** N


def _load(cfg: RunConfig):
    if cfg.preset is not None:
        if cfg.preset not in PRESETS:
            raise InputError(f"unknown preset {cfg.preset!r}; choose from {', '.join(sorted(PRESETS))}")
        return load_preset(cfg.preset, cfg.seed)
    try:
        with open(cfg.input_path, encoding="utf-8") as fh:
            doc = load_document(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {cfg.input_path}: {exc.strerror}") from None
    if "maps" in doc:
        maps = doc["maps"]
        if not isinstance(maps, list) or len(maps) < 2:
            raise InputError("'maps' must list P_0, ..., P_N with N >= 1")
        return None, [channel_from_json(m, tol=cfg.tolerance) for m in maps]
    obj = doc.get("channel", doc)
    return channel_from_json(obj, tol=cfg.tolerance), None


def run(cfg: RunConfig) -> tuple:
    """Execute a configuration; returns (exit code, report dict)."""
    rep = Report(cfg.tolerance)
    header = {"command": cfg.command, "tolerance": cfg.tolerance, "depth": cfg.depth, "seed": cfg.seed,
              "input": cfg.preset if cfg.preset is not None else cfg.input_path}
    with rank_tolerance(min(1e-9, cfg.tolerance)):
        try:
            P, maps = _load(cfg)
        except CheckError as exc:
            if isinstance(exc, ValueError):
                raise InputError(str(exc)) from None
            rep.fail(exc)
            return 1, _finish(header, rep)
        sg = None
        if maps is not None:
            try:
                sg = semigroup_from_maps(maps)
            except CheckError as exc:
                rep.fail(exc, "semigroup-law")
                return 1, _finish(header, rep)
            P = maps[1]
        if cfg.command in ("dilate", "power-check", "report") and _estimate_tower_dim(P, cfg.depth) > MAX_DIM:
            raise InputError(f"depth {cfg.depth} needs a dilation space above {MAX_DIM} dimensions; "
                             f"lower --depth")
        if cfg.command in ("prodsys-check", "report") and sg is None:
            if _estimate_grid_dim(P.choi_rank, P.d, cfg.depth) > MAX_DIM:
                raise InputError(f"depth {cfg.depth} needs partition spaces above {MAX_DIM} dimensions; "
                                 f"lower --depth")
            sg = semigroup(P, cfg.depth)
        if cfg.command in ("stinespring", "report"):
            _stinespring_checks(P, cfg, rep)
        if cfg.command in ("arveson", "report"):
            _arveson_checks(P, cfg, rep)
        if cfg.command in ("dilate", "report"):
            _dilate_checks(P, cfg, rep)
        if cfg.command in ("power-check", "report"):
            _power_checks(P, cfg, rep)
        if cfg.command in ("prodsys-check", "report"):
            _prodsys_checks(sg, cfg, rep)
    return (0 if rep.passed else 1), _finish(header, rep)


def _finish(header: Dict[str, Any], rep: Report) -> Dict[str, Any]:
    failing = sorted({c["anchor"] for c in rep.checks if not c["pass"]})
    return _round({**header, "checks": rep.checks, "pass": rep.passed, "failing_anchors": failing})


def _format_text(report: Dict[str, Any]) -> str:
    lines = [f"{report['command']} on {report['input']} (tol {report['tolerance']:g}, depth {report['depth']})"]
    for c in report["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        defect = "n/a" if c["defect"] is None else f"{c['defect']:.2e}"
        line = f"  {status}  {c['name']:<28} {c['anchor']:<28} defect {defect}"
        if "message" in c:
            line += f"  ({c['message']})"
        lines.append(line)
    lines.append("all checks passed" if report["pass"] else "failing: " + ", ".join(report["failing_anchors"]))
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpdilation",
                                     description="Dilation checks for unital CP maps and semigroups.")
    parser.add_argument("command", choices=COMMANDS)
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--input", help="JSON file with a channel or a list of maps")
    src.add_argument("--preset", help="built-in input: " + ", ".join(sorted(PRESETS)))
    parser.add_argument("--tol", type=float, default=1e-8, help="pass threshold for reported defects")
    parser.add_argument("--depth", type=int, default=4, help="dilation depth / semigroup horizon (1..8)")
    parser.add_argument("--seed", type=int, default=0, help="seed for random presets and samples")
    parser.add_argument("--json", action="store_true", help="emit the report as JSON")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = RunConfig(args.command, args.input, args.preset, args.tol, args.depth, args.seed, args.json)
        code, report = run(cfg)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.as_json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(_format_text(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
