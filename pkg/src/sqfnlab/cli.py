"""Batch experiment runner.

Loads a measure-pair scenario from a JSON config, runs its verification
suite (doubling, stopping forest, Haar checks, Carleson comparison, square
function profiles, Buckley / CZ / Tolsa checks), and writes a versioned
JSON report plus CSV profile tables.

Exit codes: 0 all hard assertions pass, 1 assertion failures, 2 usage or
config errors.  Reports are byte-identical for identical config + seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .measure import (
    Measure,
    dyadic_cell_masses,
    generate,
    mass,
    validate_spec,
)
from .dyadic import (
    STANDARD,
    delta,
    doubling_constant,
    shifted_systems,
)
from .alpha import AlphaTable, alpha, epsilon_for_doubling, smooth_bounds_check
from .transport import w1_oracle, w1_supported
from .tree import (
    carleson_comparison,
    coefficient_identity_gap,
    g_l2_norm,
    g_cell_values,
    haar,
    product_check,
    representation_check,
    stopping_forest,
    tailtip_check,
)
from .squarefn import (
    buckley_ratio,
    cz_decompose,
    delta_level_sums,
    domination_check,
    dyadic_square_profile,
    mu_sampled_points,
    tolsa_l2,
)

# tolerance classes (documented defaults; override via config "tolerances")
TOL_EXACT = 1e-12       # identities that hold in exact arithmetic
TOL_ACCUM = 1e-9        # identities subject to floating accumulation
TOL_STAT = 0.05         # statistical / asymptotic comparisons

DEPTH_CAP = 24


def _random_measure(rng, max_cells=32):
    """A random histogram or atomic measure, normalized to mass ~1."""
    if rng.random() < 0.5:
        n = int(2 ** rng.integers(1, int(math.log2(max_cells)) + 1))
        cells = rng.uniform(0.05, 1.0, n)
        cells /= cells.sum()
        return generate({"type": "histogram", "cells": cells.tolist()})
    n = int(rng.integers(1, max_cells + 1))
    xs = rng.uniform(0.0, 1.0, n)
    ws = rng.uniform(0.1, 1.0, n)
    ws /= ws.sum()
    return generate({"type": "atomic",
                     "atoms": [(float(x), float(w)) for x, w in zip(xs, ws)]})


def _finite_haar_density(seed=0, depth=5):
    """Lebesgue perturbed by a few dyadic multipliers: an A-infinity weight."""
    rng = np.random.default_rng(seed)
    cells = np.ones(1)
    for _ in range(depth):
        eps = rng.uniform(-0.3, 0.3, cells.size)
        cells = np.stack([cells * (1 + eps), cells * (1 - eps)],
                         axis=-1).reshape(-1)
    cells /= cells.sum()
    return generate({"type": "histogram", "cells": cells.tolist()})


SCENARIOS = {
    "identity": {
        "summary": "mu = nu = Lebesgue; every discrepancy is exactly zero",
        "mu_spec": {"type": "lebesgue"}, "nu_spec": {"type": "lebesgue"},
        "depth": 10,
    },
    "singular-cascade": {
        "summary": "binomial cascade p=0.7 vs Lebesgue; linear S^2 growth",
        "mu_spec": {"type": "cascade", "p": 0.7, "depth": 20},
        "nu_spec": {"type": "lebesgue"},
        "depth": 12,
    },
    "cantor": {
        "summary": "middle-half Cantor measure vs Lebesgue; singular",
        "mu_spec": {"type": "cantor", "depth": 14},
        "nu_spec": {"type": "lebesgue"},
        "depth": 10,
    },
    "example22": {
        "summary": "density bump at 1/2 with exact Delta and alpha values",
        "mu_spec": {"type": "example22", "n": 8},
        "nu_spec": {"type": "lebesgue"},
        "depth": 10,
    },
    "example52": {
        "summary": "plain alpha unstable under enlargement, smooth variant not",
        "mu_spec": {"type": "example52", "n": 6},
        "nu_spec": {"type": "lebesgue"},
        "depth": 8,
    },
    "example53": {
        "summary": "atom pair showing the smooth alpha scale sensitivity",
        "mu_spec": {"type": "example53", "eps": 0.01, "role": "mu"},
        "nu_spec": {"type": "example53", "eps": 0.01, "role": "nu"},
        "depth": 6,
    },
    "finite-haar-ainfty": {
        "summary": "finitely many Haar perturbations of Lebesgue; A-infinity",
        "mu_spec": {"type": "finite-haar", "seed": 0, "levels": 5},
        "nu_spec": {"type": "lebesgue"},
        "depth": 14,
    },
    "random-histogram-fleet": {
        "summary": "seeded fleet of random pairs; structural identities",
        "mu_spec": None, "nu_spec": None,
        "depth": 10, "pairs": 10,
    },
    "oracle-crossval": {
        "summary": "closed-form transport distance vs midpoint-grid oracle",
        "mu_spec": None, "nu_spec": None,
        "depth": 0, "pairs": 200,
    },
    "ac-density": {
        "summary": "bounded density in [1/2, 2] vs Lebesgue; converging S^2",
        "mu_spec": {"type": "ac-density", "seed": 5, "cells": 64},
        "nu_spec": {"type": "lebesgue"},
        "depth": 14,
    },
}


def _build(spec):
    if spec is None:
        return None
    t = spec.get("type")
    if t == "finite-haar":
        return _finite_haar_density(spec.get("seed", 0), spec.get("levels", 5))
    if t == "ac-density":
        rng = np.random.default_rng(spec.get("seed", 5))
        n = int(spec.get("cells", 64))
        dens = rng.uniform(0.5, 2.0, n)
        cells = dens / dens.sum()
        return generate({"type": "histogram", "cells": cells.tolist()})
    return generate(spec)


def load_config(path):
    with open(path) as fh:
        cfg = json.load(fh)
    if "scenario" not in cfg:
        raise ValueError("config needs a 'scenario' key")
    name = cfg["scenario"]
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}")
    merged = dict(SCENARIOS[name])
    merged.pop("summary", None)
    merged.update(cfg)
    merged.setdefault("seed", 0)
    merged.setdefault("epsilon", "auto")
    merged.setdefault("systems", "standard")
    merged.setdefault("outputs", {})
    merged.setdefault("tolerances", {})
    if merged["depth"] > DEPTH_CAP:
        raise ValueError(f"depth {merged['depth']} exceeds cap {DEPTH_CAP}")
    for key in ("mu_spec", "nu_spec"):
        if merged.get(key) is not None and merged[key]["type"] not in (
                "finite-haar", "ac-density"):
            validate_spec(merged[key])
    return merged


def _check(name, lhs, rhs, tol=0.0, note=""):
    """A recorded inequality lhs <= rhs + tol."""
    slack = rhs + tol - lhs
    return {"name": name, "lhs": float(lhs), "rhs": float(rhs),
            "tol": float(tol), "slack": float(slack),
            "passed": bool(lhs <= rhs + tol), "note": note}


def _auto_epsilon(nu, depth):
    rep = doubling_constant(nu, depth=min(depth, 10))
    if not math.isfinite(rep.constant):
        return 1.0 / 128.0, rep.constant
    eps, _ = epsilon_for_doubling(max(rep.constant, 1.0))
    return eps, rep.constant


def _suite_checks(cfg, mu, nu, tols):
    """The common scenario suite; returns (checks, profiles, extras)."""
    name = cfg["scenario"]
    depth = int(cfg["depth"])
    seed = int(cfg["seed"])
    checks = []
    extras = {}
    profiles = {}
    tol_exact = tols.get("exact", TOL_EXACT)
    tol_accum = tols.get("accumulation", TOL_ACCUM)
    tol_stat = tols.get("statistical", TOL_STAT)

    table = AlphaTable(mu, nu)
    drep = doubling_constant(nu, depth=min(depth, 10))
    extras["doubling_constant"] = drep.constant

    if cfg["epsilon"] == "auto":
        eps, _ = _auto_epsilon(nu, depth)
    else:
        eps = float(cfg["epsilon"])
    extras["epsilon"] = eps

    forest = stopping_forest(mu, nu, eps, max_depth=min(depth, 12),
                             table=table)
    extras["trees"] = len(forest.trees)
    ratios = []
    for tree in forest.trees:
        tree.check_structure()
        cc = carleson_comparison(mu, nu, tree, table=table)
        if cc.sum_alpha + cc.top_mass > 0:
            ratios.append(cc.ratio)
    if ratios:
        fleet = max(ratios)
        extras["carleson_ratio_max"] = fleet
        checks.append(_check("carleson_ratio_finite", fleet, 1e6,
                             note="recorded fleet constant"))

    # Haar identities on the largest tree with internal members
    big = None
    for tree in forest.trees:
        if tree.members and len(tree.members) > 1 and \
                mass(mu, tree.top.a, tree.top.b) > 0 and \
                mass(nu, tree.top.a, tree.top.b) > 0:
            if big is None or len(tree.members) > len(big.members):
                big = tree
    if big is not None:
        hs = haar(mu, nu, big)
        rng = np.random.default_rng(seed)
        members = sorted(big.members)
        idx = rng.choice(len(members), size=min(20, len(members)),
                         replace=False)
        internal = {(I.j, I.k) for I in big.internal_members()}
        worst_prod = 0.0
        worst_coef = 0.0
        for i in idx:
            I = big.top.system.interval(*members[i])
            if mass(mu, I.a, I.b) == 0:
                continue
            lhs, rhs = product_check(hs, I)
            worst_prod = max(worst_prod, abs(lhs - rhs))
            if (I.j, I.k) in internal:
                worst_coef = max(worst_coef,
                                 coefficient_identity_gap(hs, I))
        checks.append(_check("haar_product_identity", worst_prod, 0.0,
                             1e-10))
        checks.append(_check("haar_coefficient_forms", worst_coef, 0.0,
                             tol_exact))
        N = big.top.j + min(big.max_depth, 8)
        _, vals, wts = g_cell_values(hs, N)
        quad = math.sqrt(float(np.sum(np.asarray(vals) ** 2
                                      * np.asarray(wts))))
        checks.append(_check("haar_parseval", abs(g_l2_norm(hs, N) - quad),
                             0.0, tol_accum))

    # square function profile and classification
    if mass(mu, 0.0, 1.0) > 0 and mu.piece_l.size:
        pts = mu_sampled_points(mu, 16, depth + 4, seed=seed)
        prof = dyadic_square_profile(mu, nu, STANDARD, pts, depth=depth,
                                     table=table)
        profiles["square_dyadic"] = prof
        slopes = prof.slopes()
        tail = prof.final_increments(max(depth - 2, 0))
        extras["mean_slope"] = float(np.mean(slopes))
        extras["max_tail_increment"] = float(np.max(tail))
        if np.max(tail) < 1e-6:
            extras["classification"] = "absolutely continuous"
        elif np.mean(slopes) > 1e-4:
            extras["classification"] = "singular"
        else:
            extras["classification"] = "mixed"

    # Buckley ratio stability (Delta flavor is cheap everywhere)
    br1 = buckley_ratio(mu, nu, depth, which="delta")
    extras["buckley_delta"] = br1
    return checks, profiles, extras


def _scenario_specific(cfg, mu, nu, tols, checks, extras):
    name = cfg["scenario"]
    seed = int(cfg["seed"])
    depth = int(cfg["depth"])
    tol_exact = tols.get("exact", TOL_EXACT)
    tol_stat = tols.get("statistical", TOL_STAT)

    if name == "identity":
        checks.append(_check("identity_zero_sums",
                             extras.get("buckley_delta", 0.0), 0.0))
        checks.append(_check("identity_root_alpha",
                             alpha(mu, nu, STANDARD.root()), 0.0))

    elif name == "singular-cascade":
        a0 = alpha(mu, nu, STANDARD.root())
        slope = extras.get("mean_slope", 0.0)
        checks.append(_check("slope_matches_alpha_cell",
                             abs(slope - a0 * a0), tol_stat * a0 * a0,
                             note="mean S^2 slope vs alpha_cell^2"))
        _, subtree, _ = delta_level_sums(mu, nu, depth)
        checks.append(_check("delta_carleson_growth", 0.03 * depth,
                             float(subtree[0][0]),
                             note="Delta-Carleson sum >= 0.03 * depth"))
        checks.append(_check("classified_singular",
                             0.0 if extras.get("classification") ==
                             "singular" else 1.0, 0.0))

    elif name == "example22":
        n = cfg["mu_spec"]["n"]
        root = STANDARD.root()
        checks.append(_check("delta_exact",
                             abs(delta(mu, nu, root) - 2.0 ** (-n - 1)),
                             0.0, tol_exact))
        checks.append(_check("alpha_exact",
                             abs(alpha(mu, nu, root) - 2.0 ** (-2 * n - 1)),
                             0.0, tol_exact))
        for side in ("minus", "plus"):
            rep = representation_check(mu, nu, side=side, N=8)
            checks.append(_check(f"representation_{side}_slack", 0.0,
                                 rep.slack, note="nonnegative slack"))
        tt = tailtip_check(mu, nu, STANDARD.root(), N1=2, N2=1)
        checks.append(_check("tailtip_slack", tt.lhs, tt.rhs))

    elif name == "example52":
        rep = smooth_bounds_check(mu, nu, (0.0, 1.0))
        checks.append(_check("smooth_alpha_bounds", rep.alpha_smooth,
                             min(2.0, rep.bound_alpha), 1e-9))

    elif name == "example53":
        from .alpha import alpha_smooth
        a_half = alpha_smooth(mu, nu, (0.0, 0.5, True))
        checks.append(_check("smooth_alpha_left_half_exact",
                             abs(a_half - 1.0), 0.0, tol_exact))

    elif name == "finite-haar-ainfty":
        b1 = buckley_ratio(mu, nu, 10, which="delta")
        b2 = buckley_ratio(mu, nu, depth, which="delta")
        checks.append(_check("buckley_delta_stable", abs(b2 - b1),
                             tol_stat * max(b1, 1e-12),
                             note="stable after depth 10"))
        a1 = buckley_ratio(mu, nu, 10, which="alpha")
        a2 = buckley_ratio(mu, nu, min(depth, 12), which="alpha")
        checks.append(_check("buckley_alpha_stable", abs(a2 - a1),
                             tol_stat * max(a1, 1e-12)))

    elif name == "random-histogram-fleet":
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(int(cfg.get("pairs", 10))):
            m1 = _random_measure(rng)
            # reference measure must charge every cell for the forest
            cells = rng.uniform(0.05, 1.0, 16)
            cells /= cells.sum()
            m2 = generate({"type": "histogram", "cells": cells.tolist()})
            forest = stopping_forest(m1, m2, 1.0 / 64.0, max_depth=6)
            for tree in forest.trees:
                tree.check_structure()
            I = STANDARD.interval(2, int(rng.integers(0, 4)))
            if mass(m1, I.a, I.b) > 0 and mass(m2, I.a, I.b) > 0:
                hs_tree = forest.trees[0]
                if hs_tree.members and len(hs_tree.members) > 1:
                    hs = haar(m1, m2, hs_tree)
                    gap = coefficient_identity_gap(hs, hs_tree.top)
                    worst = max(worst, gap)
        checks.append(_check("fleet_coefficient_forms", worst, 0.0,
                             tols.get("exact", TOL_EXACT)))

    elif name == "oracle-crossval":
        rng = np.random.default_rng(seed)
        # pair generation stays sequential for determinism; the distance
        # evaluations are independent and fan out across worker threads
        pairs = [(_random_measure(rng), _random_measure(rng))
                 for _ in range(int(cfg.get("pairs", 200)))]
        threads = max(1, int(os.environ.get("SQFNLAB_THREADS", "1")))

        def gap(pair):
            m1, m2 = pair
            return abs(w1_supported(m1, m2).value - w1_oracle(m1, m2))

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                gaps = list(pool.map(gap, pairs))
        else:
            gaps = [gap(p) for p in pairs]
        worst = max(gaps) if gaps else 0.0
        checks.append(_check("oracle_gap", worst, 2.0 ** -12,
                             note="closed form vs midpoint grid"))
        extras["worst_oracle_gap"] = worst

    elif name == "ac-density":
        checks.append(_check("classified_ac",
                             0.0 if extras.get("classification") ==
                             "absolutely continuous" else 1.0, 0.0))
        rng = np.random.default_rng(seed)
        cz = cz_decompose(mu, nu, 2.0, depth=min(depth, 10))
        checks.append(_check("cz_bad_union", cz.bad_union_nu(nu), 0.5,
                             note="nu(union of bad) < 1/lambda"))
        lhs, l2, ratio = tolsa_l2(mu, nu, depth=min(depth, 10))
        extras["tolsa_ratio"] = ratio
        checks.append(_check("tolsa_finite", ratio, 1e6))

    return checks


def run_experiment(cfg):
    mu = _build(cfg.get("mu_spec"))
    nu = _build(cfg.get("nu_spec"))
    tols = cfg.get("tolerances", {})
    if mu is not None and nu is not None:
        checks, profiles, extras = _suite_checks(cfg, mu, nu, tols)
    else:
        checks, profiles, extras = [], {}, {}
    checks = _scenario_specific(cfg, mu, nu, tols, checks, extras)

    outputs = cfg.get("outputs", {})
    written = []
    csv_base = outputs.get("csv")
    if csv_base:
        for key, prof in sorted(profiles.items()):
            path = csv_base if len(profiles) == 1 else \
                csv_base.replace(".csv", f"_{key}.csv")
            prof.to_csv(path)
            written.append(path)

    cfg_for_hash = {k: v for k, v in cfg.items() if k != "outputs"}
    blob = json.dumps(cfg_for_hash, sort_keys=True).encode()
    report = {
        "schema": "report-v1",
        "version": __version__,
        "scenario": cfg["scenario"],
        "config_hash": hashlib.sha256(blob).hexdigest(),
        "seed": cfg["seed"],
        "checks": checks,
        "stats": {k: (v if isinstance(v, (int, str)) else float(v))
                  for k, v in sorted(extras.items())},
        "profiles_written": written,
        "passed": all(c["passed"] for c in checks),
    }
    json_path = outputs.get("json")
    if json_path:
        with open(json_path, "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=1)
            fh.write("\n")
    return report


def cmd_run(args):
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    print(json.dumps(report, sort_keys=True, indent=1))
    if report["passed"]:
        return 0
    failing = [c["name"] for c in report["checks"] if not c["passed"]]
    print("FAILED checks: " + ", ".join(failing), file=sys.stderr)
    return 1


def cmd_list(args):
    for name in sorted(SCENARIOS):
        print(f"{name}: {SCENARIOS[name]['summary']}")
    return 0


def cmd_validate(args):
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    notes = []
    for key in ("mu_spec", "nu_spec"):
        spec = cfg.get(key)
        if spec is not None and spec["type"] not in ("finite-haar",
                                                     "ac-density"):
            notes.extend(f"{key}: {n}" for n in validate_spec(spec))
    print(f"scenario: {cfg['scenario']}")
    print(f"depth: {cfg['depth']} (cap {DEPTH_CAP})")
    for n in notes:
        print(f"warning: {n}")
    if not notes:
        print("ok")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="sqfnlab",
        description="square-function experiments on measure pairs")
    sub = parser.add_subparsers(dest="cmd")
    p_run = sub.add_parser("run", help="run a scenario suite")
    p_run.add_argument("--config", required=True)
    sub.add_parser("list", help="list available scenarios")
    p_val = sub.add_parser("validate", help="validate a config")
    p_val.add_argument("--config", required=True)
    args = parser.parse_args(argv)
    if args.cmd == "run":
        return cmd_run(args)
    if args.cmd == "list":
        return cmd_list(args)
    if args.cmd == "validate":
        return cmd_validate(args)
    parser.print_usage(file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
