"""Scenario configuration files (YAML).

Node ids in config files are 1-based, as in the usual graph notation; the
library API is 0-based and the conversion happens here. Unknown keys are
errors, and every error names the offending field and, where the YAML
parser can tell, its line.

Example::

    version: 1
    system:
      continuous: {A_cont: [[0, 1], [-1, 0]], tau: 0.1}
      C: [[1, 0], [0.8, 0.6], [0.3, 0.95], [-0.3, 0.95], [-0.8, 0.6]]
    graph:
      p: 5
      edges: [[1, 2], [2, 3], [3, 4], [4, 5], [5, 1]]
    security:
      s: 1
      attack:
        - {node: 3, kind: consistent_fake_state, x0: [-2, 1]}
    compression: {mode: identity}
    tracker: {gains: auto, epsilon: 1.0e-6}
    run: {T: 300, x0: [1, 0.5], seed: 0, decode_cadence: 1}
    output: {trace: trace.csv, summary: summary.yaml}
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import yaml

from .adversary import AttackPlan, CompanionDrift, ConsistentFakeState, Jump
from .compress import CompressionMatrix, design_compression, kernel_basis, validate_compression
from .errors import CertificationError, ConfigError, DsstError, GraphError
from .graph import build_graph
from .model import LtiSystem, discretize
from .sim import Scenario
from .tracker import TrackerGains

CONFIG_VERSION = 1
ATTACK_KINDS = ("consistent_fake_state", "companion_drift", "jump")
COMPRESSION_MODES = ("identity", "given", "design")


@dataclass
class ScenarioConfig:
    """Canonical, fully-defaulted scenario description (1-based node ids)."""

    system: dict
    graph: dict
    security: dict
    compression: dict = field(default_factory=lambda: {"mode": "identity"})
    tracker: dict = field(default_factory=lambda: {"gains": "auto", "epsilon": 1e-6})
    run: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: {"trace": "trace.csv", "summary": "summary.yaml"})
    version: int = CONFIG_VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "system": copy.deepcopy(self.system),
            "graph": copy.deepcopy(self.graph),
            "security": copy.deepcopy(self.security),
            "compression": copy.deepcopy(self.compression),
            "tracker": copy.deepcopy(self.tracker),
            "run": copy.deepcopy(self.run),
            "output": copy.deepcopy(self.output),
        }


# ---------------------------------------------------------------- line lookup


def _line_map(node, path=(), out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, val in node.value:
            sub = path + (str(key.value),)
            out[sub] = key.start_mark.line + 1
            _line_map(val, sub, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, val in enumerate(node.value):
            sub = path + (str(i),)
            out[sub] = val.start_mark.line + 1
            _line_map(val, sub, out)
    return out


class _Ctx:
    def __init__(self, lines):
        self.lines = lines

    def error(self, msg, *path):
        path = tuple(str(p) for p in path)
        line = None
        for k in range(len(path), 0, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        raise ConfigError(msg, ".".join(path) or None, line)

    def mapping(self, value, allowed, required, *path):
        if not isinstance(value, dict):
            self.error("expected a mapping", *path)
        for key in value:
            if key not in allowed:
                self.error(f"unknown key '{key}' (allowed: {', '.join(allowed)})", *path, key)
        for key in required:
            if key not in value:
                self.error(f"missing required key '{key}'", *path)
        return value

    def number(self, value, *path, integer=False, positive=False, nonneg=False):
        ok = isinstance(value, int) if integer else isinstance(value, (int, float))
        if isinstance(value, bool) or not ok:
            self.error("expected an integer" if integer else "expected a number", *path)
        if positive and not value > 0:
            self.error("must be positive", *path)
        if nonneg and value < 0:
            self.error("must be nonnegative", *path)
        return int(value) if integer else float(value)

    def vector(self, value, *path, length=None):
        if not isinstance(value, list):
            self.error("expected a list of numbers", *path)
        out = [self.number(v, *path, i) for i, v in enumerate(value)]
        if length is not None and len(out) != length:
            self.error(f"expected {length} entries, got {len(out)}", *path)
        return out

    def matrix(self, value, *path):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return [[float(value)]]
        if not isinstance(value, list) or not value:
            self.error("expected a non-empty list of rows", *path)
        rows = []
        for i, row in enumerate(value):
            if not isinstance(row, list):
                self.error("expected a row (list of numbers)", *path, i)
            rows.append(self.vector(row, *path, i))
        if len({len(r) for r in rows}) != 1 or not rows[0]:
            self.error("rows must be non-empty and of equal length", *path)
        return rows


# ---------------------------------------------------------------- parsing


def parse_config(text: str) -> ScenarioConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", None, mark.line + 1 if mark else None) from None
    ctx = _Ctx(_line_map(root) if root is not None else {})
    if data is None:
        ctx.error("empty configuration")
    ctx.mapping(
        data,
        ("version", "system", "graph", "security", "compression", "tracker", "run", "output"),
        ("version", "system", "graph", "security"),
    )
    version = ctx.number(data["version"], "version", integer=True)
    if version != CONFIG_VERSION:
        ctx.error(f"unsupported config version {version} (expected {CONFIG_VERSION})", "version")

    # system
    sysd = ctx.mapping(data["system"], ("A", "C", "continuous"), ("C",), "system")
    if ("A" in sysd) == ("continuous" in sysd):
        ctx.error("give exactly one of 'A' or 'continuous'", "system")
    system = {}
    if "A" in sysd:
        system["A"] = ctx.matrix(sysd["A"], "system", "A")
        n = len(system["A"])
        if len(system["A"][0]) != n:
            ctx.error("A must be square", "system", "A")
    else:
        cont = ctx.mapping(sysd["continuous"], ("A_cont", "tau"), ("A_cont", "tau"), "system", "continuous")
        A_cont = ctx.matrix(cont["A_cont"], "system", "continuous", "A_cont")
        n = len(A_cont)
        if len(A_cont[0]) != n:
            ctx.error("A_cont must be square", "system", "continuous", "A_cont")
        system["continuous"] = {
            "A_cont": A_cont,
            "tau": ctx.number(cont["tau"], "system", "continuous", "tau", positive=True),
        }
    C = ctx.matrix(sysd["C"], "system", "C")
    if len(C[0]) != n:
        ctx.error(f"C must have n={n} columns", "system", "C")
    system["C"] = C
    p = len(C)

    # graph
    gd = ctx.mapping(data["graph"], ("p", "edges"), ("p", "edges"), "graph")
    gp = ctx.number(gd["p"], "graph", "p", integer=True, positive=True)
    if gp != p:
        ctx.error(f"graph.p={gp} but C has {p} rows (one per node)", "graph", "p")
    if not isinstance(gd["edges"], list):
        ctx.error("expected a list of [i, j] or [i, j, weight]", "graph", "edges")
    edges = []
    for k, e in enumerate(gd["edges"]):
        if not isinstance(e, list) or len(e) not in (2, 3):
            ctx.error("edge must be [i, j] or [i, j, weight]", "graph", "edges", k)
        i = ctx.number(e[0], "graph", "edges", k, integer=True)
        j = ctx.number(e[1], "graph", "edges", k, integer=True)
        w = ctx.number(e[2], "graph", "edges", k, positive=True) if len(e) == 3 else 1.0
        edges.append([i, j, w])
    try:
        build_graph(p, [(i - 1, j - 1, w) for i, j, w in edges])
    except GraphError as exc:
        ctx.error(f"{exc} (node ids are 1-based)", "graph", "edges")
    graph = {"p": gp, "edges": edges}

    # security
    sec = ctx.mapping(data["security"], ("s", "attack"), ("s",), "security")
    s = ctx.number(sec["s"], "security", "s", integer=True, nonneg=True)
    attacks = sec.get("attack") or []
    if not isinstance(attacks, list):
        ctx.error("expected a list of attack entries", "security", "attack")
    plan, seen = [], set()
    for k, a in enumerate(attacks):
        path = ("security", "attack", k)
        if not isinstance(a, dict):
            ctx.error("expected a mapping", *path)
        kind = a.get("kind")
        if kind not in ATTACK_KINDS:
            ctx.error(f"kind must be one of {', '.join(ATTACK_KINDS)}", *path, "kind")
        extra = {"consistent_fake_state": ("x0",), "companion_drift": ("e0",), "jump": ("t0", "offset")}[kind]
        ctx.mapping(a, ("node", "kind") + extra, ("node", "kind") + extra, *path)
        node = ctx.number(a["node"], *path, "node", integer=True)
        if not 1 <= node <= p:
            ctx.error(f"node must be in 1..{p}", *path, "node")
        if node in seen:
            ctx.error(f"node {node} attacked twice", *path, "node")
        seen.add(node)
        entry = {"node": node, "kind": kind}
        if kind == "jump":
            entry["t0"] = ctx.number(a["t0"], *path, "t0", integer=True, nonneg=True)
            entry["offset"] = ctx.number(a["offset"], *path, "offset")
        else:
            key = extra[0]
            entry[key] = ctx.vector(a[key], *path, key, length=n)
        plan.append(entry)
    security = {"s": s, "attack": plan}

    # compression
    cd = ctx.mapping(data.get("compression", {"mode": "identity"}), ("mode", "D", "seed", "max_tries"), ("mode",), "compression")
    mode = cd["mode"]
    if mode not in COMPRESSION_MODES:
        ctx.error(f"mode must be one of {', '.join(COMPRESSION_MODES)}", "compression", "mode")
    compression = {"mode": mode}
    if mode == "given":
        if "D" not in cd:
            ctx.error("mode 'given' needs D", "compression")
        D = ctx.matrix(cd["D"], "compression", "D")
        if len(D[0]) != p:
            ctx.error(f"D must have p={p} columns", "compression", "D")
        compression["D"] = D
    elif "D" in cd:
        ctx.error("D is only allowed with mode 'given'", "compression", "D")
    if mode == "design":
        compression["seed"] = ctx.number(cd.get("seed", 0), "compression", "seed", integer=True, nonneg=True)
        compression["max_tries"] = ctx.number(cd.get("max_tries", 20), "compression", "max_tries", integer=True, positive=True)
    else:
        for key in ("seed", "max_tries"):
            if key in cd:
                ctx.error(f"{key} is only allowed with mode 'design'", "compression", key)

    # tracker
    td = ctx.mapping(data.get("tracker", {}), ("gains", "epsilon"), (), "tracker")
    gains = td.get("gains", "auto")
    if gains != "auto":
        gm = ctx.mapping(gains, ("k_P", "k_I"), ("k_P", "k_I"), "tracker", "gains")
        gains = {
            "k_P": ctx.number(gm["k_P"], "tracker", "gains", "k_P"),
            "k_I": ctx.number(gm["k_I"], "tracker", "gains", "k_I"),
        }
    tracker = {"gains": gains, "epsilon": ctx.number(td.get("epsilon", 1e-6), "tracker", "epsilon", positive=True)}

    # run
    rd = ctx.mapping(data.get("run", {}), ("T", "x0", "seed", "decode_cadence"), ("x0",), "run")
    run = {
        "T": ctx.number(rd.get("T", 300), "run", "T", integer=True, nonneg=True),
        "x0": ctx.vector(rd["x0"], "run", "x0", length=n),
        "seed": ctx.number(rd.get("seed", 0), "run", "seed", integer=True, nonneg=True),
        "decode_cadence": ctx.number(rd.get("decode_cadence", 1), "run", "decode_cadence", integer=True, positive=True),
    }

    # output
    od = ctx.mapping(data.get("output", {}), ("trace", "summary"), (), "output")
    output = {}
    for key, default in (("trace", "trace.csv"), ("summary", "summary.yaml")):
        val = od.get(key, default)
        if not isinstance(val, str) or not val:
            ctx.error("expected a file name", "output", key)
        output[key] = val

    return ScenarioConfig(
        system=system,
        graph=graph,
        security=security,
        compression=compression,
        tracker=tracker,
        run=run,
        output=output,
        version=version,
    )


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def emit_config(cfg: ScenarioConfig) -> str:
    """Canonical YAML text; ``parse_config(emit_config(c)) == c``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def dump_yaml(data) -> str:
    return yaml.safe_dump(_plain(data), sort_keys=False, default_flow_style=None)


def _plain(obj):
    """Convert numpy scalars/arrays, tuples and complex numbers for YAML output."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        c = complex(obj)
        return {"re": float(c.real), "im": float(c.imag)} if c.imag else float(c.real)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


# ---------------------------------------------------------------- building


def build_system(cfg: ScenarioConfig) -> LtiSystem:
    if "A" in cfg.system:
        A = np.array(cfg.system["A"])
    else:
        cont = cfg.system["continuous"]
        A = discretize(np.array(cont["A_cont"]), cont["tau"])
    return LtiSystem(A, np.array(cfg.system["C"]))


def build_attack(cfg: ScenarioConfig) -> AttackPlan:
    kinds = {}
    for a in cfg.security["attack"]:
        node = a["node"] - 1
        if a["kind"] == "consistent_fake_state":
            kinds[node] = ConsistentFakeState(np.array(a["x0"], dtype=float))
        elif a["kind"] == "companion_drift":
            kinds[node] = CompanionDrift(np.array(a["e0"], dtype=float))
        else:
            kinds[node] = Jump(int(a["t0"]), float(a["offset"]))
    return AttackPlan(kinds)


def build_compression(cfg: ScenarioConfig, sys: LtiSystem):
    """Certified compression, or an uncertified one plus the failure message."""
    s = cfg.security["s"]
    mode = cfg.compression["mode"]
    if mode == "identity":
        D = np.eye(sys.p)
    elif mode == "given":
        D = np.array(cfg.compression["D"], dtype=float)
    else:
        try:
            return design_compression(
                sys, s, seed=cfg.compression["seed"], max_tries=cfg.compression["max_tries"]
            ), None
        except (CertificationError, DsstError) as exc:
            D = np.eye(sys.p)
            return CompressionMatrix(D=D, certified_s=-1, kernel=kernel_basis(D, sys.n)), str(exc)
    try:
        return validate_compression(sys, D, s), None
    except (CertificationError, ValueError, DsstError) as exc:
        return CompressionMatrix(D=D, certified_s=-1, kernel=kernel_basis(D, sys.n)), str(exc)


def build_scenario(cfg: ScenarioConfig):
    """``(Scenario, compression_error_or_None)`` from a parsed config."""
    sys = build_system(cfg)
    graph = build_graph(sys.p, [(i - 1, j - 1, w) for i, j, w in cfg.graph["edges"]])
    compression, comp_err = build_compression(cfg, sys)
    gains = cfg.tracker["gains"]
    sc = Scenario(
        sys=sys,
        graph=graph,
        compression=compression,
        s=cfg.security["s"],
        x0=np.array(cfg.run["x0"], dtype=float),
        attack=build_attack(cfg),
        horizon=cfg.run["T"],
        gains=None if gains == "auto" else TrackerGains(gains["k_P"], gains["k_I"]),
        epsilon=cfg.tracker["epsilon"],
        seed=cfg.run["seed"],
        decode_cadence=cfg.run["decode_cadence"],
    )
    return sc, comp_err
