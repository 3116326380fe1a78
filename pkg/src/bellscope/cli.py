"""Command-line front end: scenario sweeps, quantum bounds, and golden-table
reproduction.

Exit codes: 0 success, 1 usage or input error, 2 resource cap exceeded,
3 verification mismatch (against --golden or the embedded tables).  All
output is deterministic for a fixed argument vector: optimizer restarts are
seeded, JSON keys are sorted, floats carry 12 significant digits, and exact
rationals serialize as [numerator, denominator] pairs.  Artifacts named by
--out are written atomically (temp file + rename).
"""

import argparse
import csv
import difflib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, is_dataclass, fields as dc_fields
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from itertools import combinations

from .errors import BellscopeError, ResourceCapError
from .ffun import FiniteFunction, Scenario, correlator_vertex, \
    enumerate_lhv_vertex_functions
from .poly import DEFAULT_RAY_CAP, hull_facets
from .sym import orbit_partition
from .ineq import BellInequality, NonlocalGame, catalog, nlg_success, \
    nontrivial_from_function
from .qopt import mbs_bound, ww_bound
from .nmbqc import PMatrix, decide_deterministic, minimal_n
from .nosig import ns_vertices, svetlichny_hull, unique_ns_box_check
from .loophole import PostSelectionRule, classify_rule, gm_threshold, \
    lhv_space_under_rule, mk_threshold

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CAP = 2
EXIT_MISMATCH = 3

DEFAULT_SEED = 7

# rows whose facet enumeration takes hours; reproduce-tables skips them and
# the facets/orbits commands refuse them unless --long-running is set
LONG_ROWS = {(3, 2, 3), (2, 4, 2)}

TABLE_SCENARIOS = ((2, 2, 2), (2, 2, 3), (2, 2, 4), (2, 2, 5),
                   (3, 2, 2), (3, 2, 3), (2, 3, 2), (2, 4, 2))

# bipartite quantum-bound rows in table order: id -> (catalog name, params)
TABLE3_SPECS = (
    ("chsh", "chsh", {}),
    ("cglmp_d3", "cglmp", {"d": 3}),
    ("cglmp_d4", "cglmp", {"d": 4}),
    ("c1_d4", "table4", {"id": "c1_d4"}),
    ("c2_d4", "table4", {"id": "c2_d4"}),
    ("i1_d5", "table4", {"id": "i1_d5"}),
    ("i2_d5", "table4", {"id": "i2_d5"}),
    ("i3_d5", "table4", {"id": "i3_d5"}),
    ("cglmp_d5", "cglmp", {"d": 5}),
    ("c_c3", "table4", {"id": "c_c3"}),
    ("b1", "table4", {"id": "b1"}),
    ("b6", "table4", {"id": "b6"}),
    ("c1_c4", "table4", {"id": "c1_c4"}),
)
TABLE3_BOUND_TOL = 1e-3
TABLE3_ENTROPY_TOL = 5e-3


class CliUsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """One fully resolved invocation; identical configs give identical
    bytes on stdout."""

    command: str
    scenario: tuple = None
    seed: int = DEFAULT_SEED
    restarts: int = None
    cap_rays: int = DEFAULT_RAY_CAP
    long_running: bool = False
    output: str = "text"
    out: str = None
    golden: str = None
    jobs: int = 1
    dry_run: bool = False
    params: tuple = ()   # sorted (key, value) pairs of command extras

    def param(self, key, default=None):
        return dict(self.params).get(key, default)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(message)


def _parse_scenario(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise CliUsageError(
            f"--scenario: expected three comma-separated integers n,c,d, "
            f"got {text!r}")
    try:
        n, c, d = (int(p) for p in parts)
    except ValueError:
        raise CliUsageError(f"--scenario: non-integer field in {text!r}")
    if n < 1 or c < 1 or d < 2:
        raise CliUsageError("--scenario: need n >= 1, c >= 1, d >= 2")
    return (n, c, d)


def _parse_int_list(text, flag):
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise CliUsageError(f"{flag}: expected comma-separated integers, "
                            f"got {text!r}")


def _parse_fraction_list(text, flag):
    try:
        return tuple(Fraction(t) for t in text.split(","))
    except (ValueError, ZeroDivisionError):
        raise CliUsageError(f"{flag}: expected comma-separated rationals "
                            f"(like 1, -2, 3/4), got {text!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="bellscope", description=__doc__)
    common = _Parser(add_help=False)
    common.add_argument("--scenario", type=str, default=None,
                        help="n,c,d (parties, inputs, outputs)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--restarts", type=int, default=None)
    common.add_argument("--cap-rays", type=int, default=None,
                        help="ray cap for vertex/facet enumeration "
                             "(overrides BELLSCOPE_CAP_RAYS)")
    common.add_argument("--long-running", action="store_true")
    common.add_argument("--output", choices=("json", "csv", "text"),
                        default="text")
    common.add_argument("--out", type=str, default=None,
                        help="also write the rendered output to this path")
    common.add_argument("--golden", type=str, default=None,
                        help="compare the rendered output to this file; "
                             "exit 3 on mismatch")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker pool size (default: available cores)")
    common.add_argument("--dry-run", action="store_true",
                        help="print the module call plan without computing")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("vertices", parents=[common])
    sub.add_parser("facets", parents=[common])
    sub.add_parser("orbits", parents=[common])

    p = sub.add_parser("qbound", parents=[common])
    p.add_argument("--catalog", type=str, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--id", type=str, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--beta", type=str, default=None,
                   help="raw coefficients (needs --rhs and --scenario)")
    p.add_argument("--rhs", type=str, default=None)
    p.add_argument("--method", choices=("auto", "ww", "mbs"), default="auto")

    for name in ("nontrivial", "game"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--function", type=str, required=True,
                       help="table of f over the scenario inputs")
        p.add_argument("--weights", type=str, default=None)
        if name == "game":
            p.add_argument("--method", choices=("auto", "ww", "mbs"),
                           default="auto")

    p = sub.add_parser("nmbqc", parents=[common])
    p.add_argument("--function", type=str, required=True,
                   help="Boolean table over 2^k input bits")
    p.add_argument("--at-n", type=int, default=None,
                   help="also decide achievability at this site count")

    p = sub.add_parser("nosig", parents=[common])
    p.add_argument("--function", type=str, default=None,
                   help="run the unique-completion check for this function")

    p = sub.add_parser("svetlichny", parents=[common])
    p.add_argument("--with-facets", action="store_true")

    p = sub.add_parser("loophole", parents=[common])
    p.add_argument("action", choices=("gm", "mk", "classify", "hull"))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--rule", type=str, default=None,
                   help="JSON rule file (see PostSelectionRule)")
    p.add_argument("--xbits", type=int, default=None)

    p = sub.add_parser("reproduce-tables", parents=[common])
    p.add_argument("table", type=int, choices=(1, 2, 3))
    return parser


def parse_args(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    scenario = _parse_scenario(ns.scenario) if ns.scenario else None
    cap = ns.cap_rays
    if cap is None:
        env = os.environ.get("BELLSCOPE_CAP_RAYS")
        if env is not None:
            try:
                cap = int(env)
            except ValueError:
                raise CliUsageError(
                    f"BELLSCOPE_CAP_RAYS: expected an integer, got {env!r}")
    if cap is None:
        cap = DEFAULT_RAY_CAP
    if cap <= 0:
        raise CliUsageError("ray cap must be positive")
    jobs = ns.jobs if ns.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise CliUsageError("--jobs must be at least 1")
    skip = {"command", "scenario", "seed", "restarts", "cap_rays",
            "long_running", "output", "out", "golden", "jobs", "dry_run"}
    params = tuple(sorted((k, v) for k, v in vars(ns).items()
                          if k not in skip and v is not None))
    return RunConfig(command=ns.command, scenario=scenario, seed=ns.seed,
                     restarts=ns.restarts, cap_rays=cap,
                     long_running=ns.long_running, output=ns.output,
                     out=ns.out, golden=ns.golden, jobs=jobs,
                     dry_run=ns.dry_run, params=params)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _sig12(x: float) -> float:
    return float(f"{x:.12g}")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, Scenario):
        return f"{v.n},{v.c},{v.d}"
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, frozenset):
        return ",".join(sorted(map(str, v)))
    return str(v)


def _jsonable(v):
    if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
        return v
    if isinstance(v, Fraction):
        return [v.numerator, v.denominator]
    if isinstance(v, float):
        return _sig12(v)
    if isinstance(v, Scenario):
        return [v.n, v.c, v.d]
    if isinstance(v, FiniteFunction):
        return {"scenario": _jsonable(v.scenario), "table": list(v.table)}
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, frozenset):
        return sorted(map(str, v))
    if is_dataclass(v):
        return {f.name: _jsonable(getattr(v, f.name)) for f in dc_fields(v)}
    return str(v)


def _csv_lines(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(c) for c in row])
    return buf.getvalue()


def render(record: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(record), sort_keys=True, indent=2) + "\n"
    columns = record.get("columns")
    rows = record.get("rows")
    diff = record.get("diff", ())
    if fmt == "csv":
        if rows is not None:
            body = _csv_lines(columns, rows)
        else:
            body = _csv_lines(("key", "value"),
                              [(k, _fmt(v)) for k, v in record.items()
                               if k not in ("columns", "rows", "diff")])
        return body + "".join(f"# {line}\n" for line in diff)
    lines = [f"{k}: {_fmt(v)}" for k, v in record.items()
             if k not in ("columns", "rows", "diff")]
    if rows is not None:
        lines.append("columns: " + ",".join(columns))
        lines.extend(" ".join(_fmt(c) for c in row) for row in rows)
    lines.extend(diff)
    return "\n".join(lines) + "\n"


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bellscope-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# shared computation helpers
# ---------------------------------------------------------------------------

def _require_scenario(cfg: RunConfig) -> Scenario:
    if cfg.scenario is None:
        raise CliUsageError(f"{cfg.command} needs --scenario n,c,d")
    return Scenario(*cfg.scenario)


def _beta_labels(sc: Scenario):
    return [f"p{k}|{''.join(map(str, s))}"
            for s in sc.inputs() for k in range(1, sc.d)]


def _linear_vertices(sc: Scenario):
    verts = [correlator_vertex(g) for g in enumerate_lhv_vertex_functions(sc)]
    assert len(set(verts)) == len(verts)
    return sorted(verts)


@lru_cache(maxsize=None)
def _facet_polytope(n: int, c: int, d: int, cap_rays: int):
    return hull_facets(_linear_vertices(Scenario(n, c, d)),
                       cap_rays=cap_rays)


def _gate_long(cfg: RunConfig, key):
    if key in LONG_ROWS and not cfg.long_running:
        raise ResourceCapError(
            f"facet enumeration for {key} takes hours; rerun with "
            f"--long-running", progress=0, unit="facets")


def _parse_function(cfg: RunConfig, sc: Scenario) -> FiniteFunction:
    text = cfg.param("function")
    table = _parse_int_list(text, "--function")
    if len(table) != sc.input_count:
        raise CliUsageError(
            f"--function: expected {sc.input_count} entries for "
            f"({sc.n},{sc.c},{sc.d}), got {len(table)}")
    if any(not 0 <= v < sc.d for v in table):
        raise CliUsageError(f"--function: entries must lie in [0, {sc.d})")
    return FiniteFunction(sc, table)


def _parse_weights(cfg: RunConfig, sc: Scenario):
    text = cfg.param("weights")
    if text is None:
        return None
    w = _parse_fraction_list(text, "--weights")
    if len(w) != sc.input_count:
        raise CliUsageError(f"--weights: expected {sc.input_count} entries")
    return w


def _load_rule(cfg: RunConfig) -> PostSelectionRule:
    path = cfg.param("rule")
    if path is None:
        raise CliUsageError(f"loophole {cfg.param('action')} needs --rule FILE")
    try:
        text = open(path).read()
    except OSError as e:
        raise CliUsageError(f"rule file {path}: {e.strerror}")
    try:
        return PostSelectionRule.from_json(text)
    except json.JSONDecodeError as e:
        raise CliUsageError(
            f"rule file {path}: invalid JSON at line {e.lineno} "
            f"column {e.colno}: {e.msg}")
    except (KeyError, TypeError) as e:
        raise CliUsageError(f"rule file {path}: missing or malformed "
                            f"field {e}")
    except ValueError as e:
        raise CliUsageError(f"rule file {path}: {e}")


def _build_inequality(cfg: RunConfig):
    name = cfg.param("catalog")
    raw = cfg.param("beta")
    if (name is None) == (raw is None):
        raise CliUsageError("qbound needs exactly one of --catalog, --beta")
    if name is not None:
        params = {}
        for key in ("d", "n", "id"):
            if cfg.param(key) is not None:
                params[key] = cfg.param(key)
        return catalog(name, **params)
    if cfg.param("rhs") is None or cfg.scenario is None:
        raise CliUsageError("--beta needs --rhs and --scenario")
    sc = Scenario(*cfg.scenario)
    beta = _parse_fraction_list(raw, "--beta")
    rhs = _parse_fraction_list(cfg.param("rhs"), "--rhs")[0]
    return BellInequality(sc, beta, rhs, name="cli")


def _bound_method(cfg: RunConfig, sc: Scenario) -> str:
    method = cfg.param("method", "auto")
    if method == "auto":
        return "ww" if (sc.c, sc.d) == (2, 2) else "mbs"
    return method


def _run_bound(cfg: RunConfig, ineq):
    method = _bound_method(cfg, ineq.scenario)
    if method == "ww":
        restarts = cfg.restarts if cfg.restarts is not None else 64
        return method, ww_bound(ineq, restarts=restarts, seed=cfg.seed)
    restarts = cfg.restarts if cfg.restarts is not None else 8
    return method, mbs_bound(ineq, restarts=restarts, seed=cfg.seed)


# ---------------------------------------------------------------------------
# command runners (each returns a record dict)
# ---------------------------------------------------------------------------

def _cmd_vertices(cfg: RunConfig) -> dict:
    sc = _require_scenario(cfg)
    verts = _linear_vertices(sc)
    formula = sc.d ** (sc.n * (sc.c - 1) + 1)
    assert len(verts) == formula
    return {"command": "vertices", "scenario": sc,
            "vertex_count": len(verts),
            "columns": _beta_labels(sc),
            "rows": [list(v) for v in verts]}


def _cmd_facets(cfg: RunConfig) -> dict:
    sc = _require_scenario(cfg)
    _gate_long(cfg, (sc.n, sc.c, sc.d))
    poly = _facet_polytope(sc.n, sc.c, sc.d, cfg.cap_rays)
    return {"command": "facets", "scenario": sc,
            "facet_count": len(poly.facets),
            "affine_dim": poly.affine_dim(),
            "columns": _beta_labels(sc) + ["rhs"],
            "rows": [list(f.coeffs) + [f.rhs] for f in poly.facets]}


def _cmd_orbits(cfg: RunConfig) -> dict:
    sc = _require_scenario(cfg)
    _gate_long(cfg, (sc.n, sc.c, sc.d))
    poly = _facet_polytope(sc.n, sc.c, sc.d, cfg.cap_rays)
    items = [(f.coeffs, f.rhs) for f in poly.facets]
    orbits = orbit_partition(items, sc)
    sizes = sorted((len(o) for o in orbits), reverse=True)
    return {"command": "orbits", "scenario": sc,
            "facet_count": len(items), "orbit_count": len(orbits),
            "columns": ["orbit", "size"],
            "rows": [[i, s] for i, s in enumerate(sizes)]}


def _cmd_qbound(cfg: RunConfig) -> dict:
    ineq = _build_inequality(cfg)
    method, rep = _run_bound(cfg, ineq)
    return {"command": "qbound", "inequality": ineq.name,
            "scenario": ineq.scenario, "method": method,
            "value": rep.value, "lhv_bound": ineq.lhv_bound,
            "entropy": rep.optimal_state_entropy,
            "certified": rep.certified_kind,
            "restarts_used": rep.restarts_used, "seed": cfg.seed}


def _cmd_nontrivial(cfg: RunConfig) -> dict:
    sc = _require_scenario(cfg)
    f = _parse_function(cfg, sc)
    weights = _parse_weights(cfg, sc)
    try:
        ineq = nontrivial_from_function(f, weights)
    except ValueError as e:
        raise CliUsageError(str(e))
    return {"command": "nontrivial", "scenario": sc,
            "name": ineq.name, "rhs": ineq.rhs,
            "lhv_bound": ineq.lhv_bound,
            "tags": ineq.tags,
            "columns": _beta_labels(sc),
            "rows": [list(ineq.beta)]}


def _cmd_game(cfg: RunConfig) -> dict:
    sc = _require_scenario(cfg)
    f = _parse_function(cfg, sc)
    weights = _parse_weights(cfg, sc)
    game = NonlocalGame(f, weights)
    classical = max(nlg_success(game, v) for v in _linear_vertices(sc))
    try:
        ineq = nontrivial_from_function(f, weights)
    except ValueError as e:
        raise CliUsageError(f"game has no quantum side: {e}")
    offset = sum((w for si, w in enumerate(game.weights)
                  if f.table[si] == 0), Fraction(0))
    method, rep = _run_bound(cfg, ineq)
    quantum = float(offset) + rep.value
    return {"command": "game", "scenario": sc,
            "classical_success": classical,
            "quantum_success": quantum,
            "gap": quantum - float(classical),
            "method": method, "restarts_used": rep.restarts_used,
            "seed": cfg.seed}


def _distinct_rows(k: int):
    return [tuple((v >> (k - 1 - i)) & 1 for i in range(k))
            for v in range(1, 1 << k)]


def _cmd_nmbqc(cfg: RunConfig) -> dict:
    table = _parse_int_list(cfg.param("function"), "--function")
    k = len(table).bit_length() - 1
    if len(table) != 1 << k or k < 1:
        raise CliUsageError("--function: table length must be a power of 2")
    f = FiniteFunction(Scenario(k, 2, 2), table)
    record = {"command": "nmbqc", "xbits": k, "function": table,
              "minimal_n": minimal_n(f)}
    at_n = cfg.param("at_n")
    if at_n is not None:
        verdict = None
        for rows in combinations(_distinct_rows(k), at_n):
            verdict = decide_deterministic(PMatrix(rows), f)
            if verdict.achievable:
                break
        record["at_n"] = at_n
        record["achievable"] = verdict is not None and verdict.achievable
        if verdict is not None and verdict.achievable:
            record["witness_theta_over_pi"] = verdict.witness_exact
        elif verdict is not None:
            record["obstruction"] = verdict.obstruction
    return record


def _cmd_nosig(cfg: RunConfig) -> dict:
    sc = _require_scenario(cfg)
    if cfg.param("function") is None:
        verts = ns_vertices(sc, cap_rays=cfg.cap_rays)
        return {"command": "nosig", "scenario": sc,
                "vertex_count": len(verts)}
    f = _parse_function(cfg, sc)
    verdict = unique_ns_box_check(f, cap_rays=cfg.cap_rays)
    return {"command": "nosig", "scenario": sc, "function": f.table,
            "vertex_count": verdict.vertex_count,
            "unique": verdict.unique,
            "matches_uniform_box": verdict.matches_uniform_box,
            "has_split_witness": verdict.split_witness is not None}


def _cmd_svetlichny(cfg: RunConfig) -> dict:
    sc = _require_scenario(cfg)
    with_facets = cfg.param("with_facets", False)
    poly = svetlichny_hull(sc, with_facets=with_facets,
                           cap_rays=cfg.cap_rays)
    record = {"command": "svetlichny", "scenario": sc,
              "vertex_count": len(poly.vertices)}
    if with_facets:
        record["facet_count"] = len(poly.facets)
    if (sc.n, sc.c, sc.d) == (3, 2, 2):
        ineq = catalog("svetlichny3")
        record["svetlichny3_max"] = max(ineq.evaluate(v)
                                        for v in poly.vertices)
        record["svetlichny3_rhs"] = ineq.rhs
    return record


def _cmd_loophole(cfg: RunConfig) -> dict:
    action = cfg.param("action")
    if action == "gm":
        rep = gm_threshold()
        return {"command": "loophole", "action": "gm", **rep.to_jsonable()}
    if action == "mk":
        n = cfg.param("n")
        if n is None:
            raise CliUsageError("loophole mk needs --n")
        rep = mk_threshold(n)
        return {"command": "loophole", "action": "mk", **rep.to_jsonable()}
    rule = _load_rule(cfg)
    if action == "classify":
        sc = Scenario(rule.n, rule.d, rule.d)
        rep = classify_rule(rule, sc)
        return {"command": "loophole", "action": "classify",
                "n": rule.n, "xbits": rule.xbits, "d": rule.d,
                "rule_class": rep.rule_class,
                "loophole_free": rep.loophole_free}
    n = cfg.param("n", rule.n)
    xbits = cfg.param("xbits", rule.xbits)
    sc = Scenario(n, rule.d, rule.d)
    rep = lhv_space_under_rule(rule, sc, xbits)
    return {"command": "loophole", "action": "hull",
            "rule_class": rep.rule_class,
            "loophole_free": rep.loophole_free,
            "point_count": len(rep.points),
            "excluded_assignments": rep.excluded_assignments,
            "outside_count": len(rep.outside_points),
            "exceeds_linear": rep.exceeds_linear,
            "columns": _beta_labels(rep.x_scenario),
            "rows": [list(p) for p in rep.points]}


# ---------------------------------------------------------------------------
# golden-table reproduction
# ---------------------------------------------------------------------------

def _golden_rows(which: int):
    text = resources.files("bellscope").joinpath(
        f"golden/table{which}.csv").read_text()
    return list(csv.DictReader(io.StringIO(text)))


def _table3_row(args):
    rid, name, params, restarts, seed = args
    ineq = catalog(name, **dict(params))
    rep = mbs_bound(ineq, restarts=restarts, seed=seed)
    return rid, ineq, rep


def _reproduce_counts(cfg: RunConfig, which: int):
    """Tables of vertex/facet/orbit counts; long rows skip without
    --long-running."""
    golden = {(int(r["n"]), int(r["c"]), int(r["d"])): r
              for r in _golden_rows(which)}
    rows, diff = [], []
    matched = mismatched = skipped = 0
    for key in TABLE_SCENARIOS:
        n, c, d = key
        want = golden[key]
        sc = Scenario(n, c, d)
        notes = []
        cells = {"n": n, "c": c, "d": d}
        ok = True
        if which == 1:
            got_v = len(_linear_vertices(sc))
            cells["vertices"] = got_v
            if got_v == int(want["vertices"]):
                notes.append(f"vertices {got_v} ok")
            else:
                notes.append(f"vertices got {got_v} want "
                             f"{want['vertices']} MISMATCH")
                ok = False
        if key in LONG_ROWS and not cfg.long_running:
            skipped += 1
            cells["facets"] = ""
            if which == 2:
                cells["orbits"] = ""
            notes.append("facets skipped (needs --long-running)")
            rows.append(cells)
            diff.append(f"({n},{c},{d}): " + "; ".join(notes))
            if not ok:
                mismatched += 1
            continue
        poly = _facet_polytope(n, c, d, cfg.cap_rays)
        got_f = len(poly.facets)
        cells["facets"] = got_f
        if got_f == int(want["facets"]):
            notes.append(f"facets {got_f} ok")
        else:
            notes.append(f"facets got {got_f} want {want['facets']} MISMATCH")
            ok = False
        if which == 2:
            orbits = orbit_partition([(f.coeffs, f.rhs)
                                      for f in poly.facets], sc)
            got_o = len(orbits)
            cells["orbits"] = got_o
            if got_o == int(want["orbits"]):
                notes.append(f"orbits {got_o} ok")
            else:
                notes.append(f"orbits got {got_o} want {want['orbits']} "
                             f"MISMATCH")
                ok = False
        rows.append(cells)
        diff.append(f"({n},{c},{d}): " + "; ".join(notes))
        matched += ok
        mismatched += not ok
    columns = ["n", "c", "d", "vertices", "facets"] if which == 1 else \
        ["n", "c", "d", "facets", "orbits"]
    return columns, rows, diff, matched, mismatched, skipped


def _reproduce_bounds(cfg: RunConfig):
    golden = {r["id"]: r for r in _golden_rows(3)}
    restarts = cfg.restarts if cfg.restarts is not None else 8
    jobs = min(cfg.jobs, len(TABLE3_SPECS))
    work = [(rid, name, tuple(sorted(params.items())), restarts, cfg.seed)
            for rid, name, params in TABLE3_SPECS]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_table3_row, work))
    else:
        results = [_table3_row(w) for w in work]
    rows, diff = [], []
    matched = mismatched = 0
    for rid, ineq, rep in results:
        want = golden[rid]
        sc = ineq.scenario
        cells = {"id": rid, "n": sc.n, "c": sc.c, "d": sc.d,
                 "lhv_bound": ineq.lhv_bound, "quantum_bound": rep.value,
                 "entropy": rep.optimal_state_entropy}
        notes = []
        ok = ineq.lhv_bound == Fraction(want["lhv_bound"])
        notes.append("lhv ok" if ok else
                     f"lhv got {ineq.lhv_bound} want {want['lhv_bound']} "
                     f"MISMATCH")
        dq = abs(rep.value - float(want["quantum_bound"]))
        if dq <= TABLE3_BOUND_TOL:
            notes.append(f"bound {rep.value:.6f} ok")
        else:
            notes.append(f"bound got {rep.value:.6f} want "
                         f"{want['quantum_bound']} MISMATCH")
            ok = False
        ds = abs(rep.optimal_state_entropy - float(want["entropy"]))
        if ds <= TABLE3_ENTROPY_TOL:
            notes.append(f"entropy {rep.optimal_state_entropy:.4f} ok")
        else:
            notes.append(f"entropy got {rep.optimal_state_entropy:.4f} "
                         f"want {want['entropy']} MISMATCH")
            ok = False
        rows.append(cells)
        diff.append(f"{rid}: " + "; ".join(notes))
        matched += ok
        mismatched += not ok
    columns = ["id", "n", "c", "d", "lhv_bound", "quantum_bound", "entropy"]
    return columns, rows, diff, matched, mismatched, 0


def _cmd_reproduce(cfg: RunConfig) -> dict:
    which = cfg.param("table")
    if which == 3:
        columns, rows, diff, matched, mismatched, skipped = \
            _reproduce_bounds(cfg)
    else:
        columns, rows, diff, matched, mismatched, skipped = \
            _reproduce_counts(cfg, which)
    diff.append(f"matched {matched} rows, skipped {skipped}, "
                f"mismatched {mismatched}")
    return {"command": "reproduce-tables", "table": which,
            "matched": matched, "skipped": skipped,
            "mismatched": mismatched,
            "columns": columns,
            "rows": [[cells[c] for c in columns] for cells in rows],
            "diff": diff}


# ---------------------------------------------------------------------------
# dry-run plans
# ---------------------------------------------------------------------------

def _plan(cfg: RunConfig):
    sc = cfg.scenario
    lines = []
    if cfg.command == "vertices":
        lines.append(f"plan: ffun.enumerate_lhv_vertex_functions({sc})")
        lines.append("plan: ffun.correlator_vertex per function")
    elif cfg.command == "facets":
        lines.append(f"plan: poly.hull_facets(vertices({sc}), "
                     f"cap_rays={cfg.cap_rays})")
    elif cfg.command == "orbits":
        lines.append(f"plan: poly.hull_facets(vertices({sc}), "
                     f"cap_rays={cfg.cap_rays})")
        lines.append(f"plan: sym.orbit_partition(facets, {sc})")
    elif cfg.command == "qbound":
        lines.append(f"plan: ineq.catalog({cfg.param('catalog')!r}) or raw "
                     f"coefficients")
        lines.append(f"plan: qopt.{{ww,mbs}}_bound(seed={cfg.seed}, "
                     f"restarts={cfg.restarts})")
    elif cfg.command == "nontrivial":
        lines.append("plan: ineq.nontrivial_from_function(f, weights)")
    elif cfg.command == "game":
        lines.append("plan: ineq.NonlocalGame + nlg_success over vertices")
        lines.append("plan: qopt bound on the induced inequality")
    elif cfg.command == "nmbqc":
        lines.append("plan: nmbqc.minimal_n(f)")
        if cfg.param("at_n") is not None:
            lines.append(f"plan: nmbqc.decide_deterministic over "
                         f"{cfg.param('at_n')}-row P matrices")
    elif cfg.command == "nosig":
        if cfg.param("function") is None:
            lines.append(f"plan: nosig.ns_vertices({sc})")
        else:
            lines.append("plan: nosig.unique_ns_box_check(f)")
    elif cfg.command == "svetlichny":
        lines.append(f"plan: nosig.svetlichny_hull({sc}, "
                     f"with_facets={cfg.param('with_facets', False)})")
    elif cfg.command == "loophole":
        action = cfg.param("action")
        if action == "gm":
            lines.append("plan: loophole.gm_threshold()")
        elif action == "mk":
            lines.append(f"plan: loophole.mk_threshold({cfg.param('n')})")
        elif action == "classify":
            lines.append(f"plan: loophole.classify_rule(load("
                         f"{cfg.param('rule')!r}))")
        else:
            lines.append(f"plan: loophole.lhv_space_under_rule(load("
                         f"{cfg.param('rule')!r}), xbits="
                         f"{cfg.param('xbits')})")
    elif cfg.command == "reproduce-tables":
        which = cfg.param("table")
        if which == 3:
            for rid, name, params in TABLE3_SPECS:
                lines.append(f"plan: qopt.mbs_bound(catalog {rid}, "
                             f"restarts={cfg.restarts or 8}, "
                             f"seed={cfg.seed})")
        else:
            for key in TABLE_SCENARIOS:
                if key in LONG_ROWS and not cfg.long_running:
                    lines.append(f"plan: skip {key} (needs --long-running)")
                else:
                    lines.append(f"plan: facets + "
                                 f"{'orbits' if which == 2 else 'vertices'} "
                                 f"for {key}")
    return lines


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_RUNNERS = {
    "vertices": _cmd_vertices,
    "facets": _cmd_facets,
    "orbits": _cmd_orbits,
    "qbound": _cmd_qbound,
    "nontrivial": _cmd_nontrivial,
    "game": _cmd_game,
    "nmbqc": _cmd_nmbqc,
    "nosig": _cmd_nosig,
    "svetlichny": _cmd_svetlichny,
    "loophole": _cmd_loophole,
    "reproduce-tables": _cmd_reproduce,
}


def run(cfg: RunConfig) -> int:
    """Execute one resolved configuration; returns the process exit code."""
    if cfg.dry_run:
        for line in _plan(cfg):
            print(line)
        return EXIT_OK
    record = _RUNNERS[cfg.command](cfg)
    rendered = render(record, cfg.output)
    sys.stdout.write(rendered)
    if cfg.out:
        _atomic_write(cfg.out, rendered)
    if cfg.golden:
        try:
            want = open(cfg.golden).read()
        except OSError as e:
            raise CliUsageError(f"golden file {cfg.golden}: {e.strerror}")
        if rendered != want:
            sys.stderr.write("golden mismatch:\n")
            sys.stderr.writelines(difflib.unified_diff(
                want.splitlines(keepends=True),
                rendered.splitlines(keepends=True),
                fromfile=cfg.golden, tofile="computed"))
            return EXIT_MISMATCH
    if record.get("mismatched"):
        return EXIT_MISMATCH
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except CliUsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(cfg)
    except CliUsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceCapError as e:
        print(f"cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAP
    except BellscopeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
