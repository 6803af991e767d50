"""Batch front end: ``sectorfhc {check,density,construct,orbit}``.

Every command reads one JSON config document (``--config``); command-line
flags override the matching config fields, and built-in defaults fill the
rest.  Reports are written to ``--out`` (default: current directory) as
sorted-key UTF-8 JSON or RFC-4180 CSV, and never contain timings or paths,
so an identical config and seed reproduces them byte for byte.

Exit codes
    0  success (check: sufficient condition passes)
    1  configuration, catalog or input error
    2  check: necessary condition fails
    3  check: inconclusive
    4  construct: a tail partial-sum bound was exceeded
    5  orbit: an asserted bound was exceeded
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .density import ExactSet, HalfPlanePrimitive, sector_lower_density
from .fhc import (ConstructionFailedError, CriterionInapplicableError, FhcVector,
                  VerificationFailedError, construct_vector, orbit_density, plan_criterion,
                  transition_density, verify_return)
from .lp_space import GridFunction, LpContext, indicator, parse_dyadic
from .sector_geometry import Sector
from .weights import (CatalogError, WeightVerdict, catalog_weight, check_necessary,
                      check_sufficient, erosion_set, sublevel_set)

log = logging.getLogger("sectorfhc")

EXIT_OK, EXIT_ERROR, EXIT_NECESSARY_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3
EXIT_CONSTRUCT_FAILED, EXIT_VERIFY_FAILED = 4, 5

DEFAULTS = {
    "alpha": math.pi / 4,
    "p": 1.0,
    "h": "1/8",
    "tol": 1e-9,
    "horizons": [1e2, 1e3, 1e4],
    "samples": 100_000,
    "workers": 1,
    # check
    "epsilons": [0.5, 0.1],
    "erosion_radii": [1.0, 2.0],
    "fail_threshold": 0.02,
    "pass_threshold": 0.05,
    "angular_ks": [-0.9, -0.5, 0.0, 0.5],
    # construct / orbit
    "horizon": 200.0,
    "integer_horizon": 1024,
    "slack": 1.1,
    "tail_subsets": 8,
    "mode": "return",
    "level": 1,
    "sample_count": 64,
    "orbit_horizons": None,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_config(args) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(doc)
    for key in ("seed", "alpha", "p", "h", "horizon", "weight", "workers", "mode", "vector"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if args.command == "check" and getattr(args, "weight_name", None):
        cfg["weight"] = args.weight_name
    return cfg


def _need_seed(cfg) -> int:
    if cfg.get("seed") is None:
        raise ConfigError("a seed is required for Monte-Carlo estimates (--seed)")
    seed = int(cfg["seed"])
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def _horizons(cfg, key="horizons") -> list[float]:
    hs = [float(t) for t in cfg[key]]
    cap = cfg.get("horizon_cap")
    if cap is not None:
        cap = float(cap)
        hs = [t for t in hs if t < cap] + [cap]
    if not hs or any(not (t > 0) for t in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
        raise ConfigError("horizons must be positive and strictly increasing")
    return hs


def _positive_int(cfg, key) -> int:
    val = int(cfg[key])
    if val < 1:
        raise ConfigError(f"{key} must be a positive integer")
    return val


def _weight(cfg, alpha=None):
    name = cfg.get("weight")
    if not name:
        raise ConfigError("no weight given")
    return catalog_weight(name, float(cfg["alpha"] if alpha is None else alpha))


def _context(cfg) -> LpContext:
    p = float(cfg["p"])
    if not p >= 1:
        raise ConfigError("p must be >= 1")
    return LpContext(p, _weight(cfg))


def _grid_function(desc, sector: Sector, h) -> GridFunction:
    """A target: {"radius": r, "scale": c} for c 1_{Delta_r}, or a grid-function document."""
    if isinstance(desc, dict) and "cells" in desc:
        f = GridFunction.from_json(desc)
        if f.h != parse_dyadic(h) or f.sector.alpha != sector.alpha:
            raise ConfigError("target grid does not match the run's sector and h")
        return f
    if isinstance(desc, dict) and "radius" in desc:
        return indicator(sector, h, float(desc["radius"]), float(desc.get("scale", 1.0)))
    raise ConfigError(f"unrecognized target {desc!r}")


def _targets(cfg, ctx) -> list[GridFunction]:
    specs = cfg.get("targets")
    if not specs:
        raise ConfigError("targets must be a nonempty list")
    return [_grid_function(s, ctx.sector, cfg["h"]) for s in specs]


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def angular_evidence(ks) -> list[dict]:
    """Exact density of {y < k x} inside Delta(pi/4) against two closed forms."""
    sec = Sector(math.pi / 4)
    rows = []
    for k in ks:
        k = float(k)
        cut = ExactSet(sec, [HalfPlanePrimitive(-k, 1.0, 0.0)])
        ratio = cut.area(1.0) / sec.truncated_area(1.0)
        angular = (math.pi / 4 + math.atan(k)) / (math.pi / 2)
        linear = (k + 1) / 2
        rows.append({"k": k, "exact_ratio": ratio, "angular_formula": angular,
                     "linear_formula": linear, "angular_error": abs(ratio - angular),
                     "linear_discrepancy": linear - angular})
    return rows


def cmd_check(cfg) -> int:
    w = _weight(cfg)
    seed = _need_seed(cfg)
    suff, integral = check_sufficient(w, float(cfg["tol"]))
    nec = check_necessary(w, [float(e) for e in cfg["epsilons"]], _horizons(cfg),
                          [float(r) for r in cfg["erosion_radii"]], seed=seed,
                          samples=_positive_int(cfg, "samples"),
                          fail_threshold=float(cfg["fail_threshold"]),
                          pass_threshold=float(cfg["pass_threshold"]),
                          workers=_positive_int(cfg, "workers"))
    evidence = [{"kind": "claimed_constants", "M": w.M, "omega": w.omega}]
    if w.name == "chaouchi":
        evidence.append({"kind": "angular_density", "rows": angular_evidence(cfg["angular_ks"])})
    verdict = WeightVerdict(w.name, suff, integral, nec, evidence)
    _write(Path(cfg["out"]), "verdict.json", _dump(verdict.to_json()))
    log.info("%s: sufficient=%s necessary=%s", w.name, suff, nec.status)
    if suff == "pass":
        return EXIT_OK
    if nec.status == "fail":
        return EXIT_NECESSARY_FAIL
    return EXIT_INCONCLUSIVE


def _sector_set(cfg):
    desc = cfg.get("set")
    if desc is None:
        raise ConfigError("density needs a 'set' document")
    if "primitives" in desc:
        doc = dict(desc)
        doc.setdefault("alpha", cfg["alpha"])
        return ExactSet.from_json(doc)
    if "weight" in desc:
        w = _weight({**cfg, "weight": desc["weight"]}, desc.get("alpha"))
        eps = float(desc["eps"])
        if desc.get("erosion"):
            return erosion_set(w, eps, float(desc["erosion"]))
        return sublevel_set(w, eps)
    raise ConfigError("set must hold 'primitives' or a 'weight' sublevel description")


def cmd_density(cfg) -> int:
    try:
        A = _sector_set(cfg)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad set document: {exc}") from exc
    if isinstance(A, ExactSet):
        est = sector_lower_density(A, _horizons(cfg))
    else:
        est = sector_lower_density(A, _horizons(cfg), seed=_need_seed(cfg),
                                   samples=_positive_int(cfg, "samples"),
                                   workers=_positive_int(cfg, "workers"))
    _write(Path(cfg["out"]), "density.csv", est.to_csv())
    return EXIT_OK


def _plan(cfg):
    ctx = _context(cfg)
    targets = _targets(cfg, ctx)
    return plan_criterion(targets, ctx, integer_horizon=_positive_int(cfg, "integer_horizon"))


def cmd_construct(cfg) -> int:
    plan = _plan(cfg)
    seed = int(cfg.get("seed") or 0)
    out = Path(cfg["out"])
    try:
        v = construct_vector(plan, float(cfg["horizon"]), tail_subsets=int(cfg["tail_subsets"]),
                             seed=seed, slack=float(cfg["slack"]))
    except ConstructionFailedError as exc:
        _write(out, "ledger.json", _dump({"failed": {"level": exc.level, "subset": exc.subset,
                                                      "norm": exc.value, "bound": exc.bound}}))
        log.error("%s", exc)
        return EXIT_CONSTRUCT_FAILED
    _write(out, "vector.json", _dump(v.to_json()))
    _write(out, "ledger.json", _dump({"plan_digest": plan.digest, "radii": list(plan.radii),
                                      "density_bounds": list(plan.family.density_bounds),
                                      "cover_multiplicity": list(plan.cover_multiplicity),
                                      "terms": len(v.terms), **v.bound_ledger}))
    return EXIT_OK


def _orbit_target(desc, plan, cfg) -> GridFunction:
    if isinstance(desc, int) and not isinstance(desc, bool):
        if not 1 <= desc <= plan.levels:
            raise ConfigError(f"target index {desc} not in plan")
        return plan.targets[desc - 1]
    return _grid_function(desc, plan.ctx.sector, cfg["h"])


def cmd_orbit(cfg) -> int:
    plan = _plan(cfg)
    path = Path(cfg.get("vector") or Path(cfg["out"]) / "vector.json")
    try:
        v = FhcVector.from_json(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read vector {path}: {exc}") from exc
    if v.plan_digest != plan.digest:
        raise ConfigError("vector was built from a different plan")
    out = Path(cfg["out"])
    mode = cfg["mode"]
    if mode == "return":
        rep = verify_return(v, plan, int(cfg["level"]), _positive_int(cfg, "sample_count"),
                            slack=float(cfg["slack"]), raise_on_failure=False)
        _write(out, "return.json", _dump(rep.to_json()))
        return EXIT_OK if rep.passed else EXIT_VERIFY_FAILED
    seed = _need_seed(cfg)
    samples = _positive_int(cfg, "samples")
    workers = _positive_int(cfg, "workers")
    if mode == "transition" and cfg.get("orbit_horizons") is None:
        # defaults depend on the hitting time, which the library finds first
        cap = cfg.get("horizon_cap")
        horizons = None if cap is None else [float(cap)]
    elif cfg.get("orbit_horizons") is None:
        reach = math.floor(v.truncation_horizon - max(y.support_radius for y in plan.targets))
        cfg["orbit_horizons"] = [reach / 4, reach / 2, reach]
        horizons = _horizons(cfg, "orbit_horizons")
    else:
        horizons = _horizons(cfg, "orbit_horizons")
    if mode == "orbit":
        target = _orbit_target(cfg.get("target", cfg["level"]), plan, cfg)
        radius = float(cfg.get("radius", 1.2 * 3.0 / 2 ** int(cfg["level"])))
        rep = orbit_density(v, plan, target, radius, horizons, seed, samples, workers)
        doc = rep.to_json()
        doc["csv"] = rep.estimate.to_csv()
        ok = True
        if rep.bound is not None:
            final = rep.estimate.ratios[-1]
            ok = final >= 0.5 * rep.bound
            doc["asserted"] = {"final_ratio": final, "required": 0.5 * rep.bound, "holds": ok}
        _write(out, "orbit.json", _dump(doc))
        _write(out, "orbit.csv", rep.estimate.to_csv())
        return EXIT_OK if ok else EXIT_VERIFY_FAILED
    if mode == "transition":
        U = _orbit_target(cfg.get("U_center", 1), plan, cfg)
        V = _orbit_target(cfg.get("V_center", 1), plan, cfg)
        missing = [k for k in ("U_radius", "V_radius") if k not in cfg]
        if missing:
            raise ConfigError(f"transition mode needs {' and '.join(missing)} in the config")
        rep = transition_density(v, plan, U, float(cfg["U_radius"]), V, float(cfg["V_radius"]),
                                 horizons, seed, samples, workers)
        doc = rep.to_json()
        if rep.estimate is not None:
            doc["csv"] = rep.estimate.to_csv()
        _write(out, "transition.json", _dump(doc))
        return EXIT_OK
    raise ConfigError(f"unknown orbit mode {mode!r}")


COMMANDS = {"check": cmd_check, "density": cmd_density, "construct": cmd_construct,
            "orbit": cmd_orbit}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sectorfhc", description=__doc__.split("\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "check":
            sp.add_argument("weight_name", nargs="?", help="catalog weight name")
        sp.add_argument("--config", help="JSON config document")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--p", type=float)
        sp.add_argument("--h", help="dyadic cell side, e.g. 1/8")
        sp.add_argument("--horizon", type=float,
                        help="truncation horizon (construct) or final sampling horizon (others)")
        sp.add_argument("--weight")
        sp.add_argument("--workers", type=int)
        if name == "orbit":
            sp.add_argument("--mode", choices=("return", "orbit", "transition"))
            sp.add_argument("--vector", help="FhcVector JSON (default OUT/vector.json)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.command != "construct" and args.horizon is not None:
            cfg["horizon_cap"] = cfg.pop("horizon")
        cfg["out"] = args.out or cfg.get("out") or "."
        return COMMANDS[args.command](cfg)
    except (ConfigError, CatalogError, CriterionInapplicableError, ValueError, KeyError,
            TypeError, ArithmeticError) as exc:
        print(f"sectorfhc: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except VerificationFailedError as exc:
        print(f"sectorfhc: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED


if __name__ == "__main__":
    sys.exit(main())
