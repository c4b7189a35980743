"""Command-line interface: ``meqforge <command> --config run.json``.

The config is a single JSON object::

    {
      "model": {"kind": "chain", "params": {"Omega_L": 1.5, "Omega_R": 1.5, "g12": 0.1}},
      "policy": {"kind": "partial", "C_PSA": 1e4},
      "mode": "global",
      "include_lamb_shift": false,
      "sweep": {"param1": {"name": "g", "values": [0.01, 0.05]},
                "param2": {"name": "g12", "start": 0.1, "stop": 0.7, "num": 5}}
    }

A custom model lists ``dims``, ``hamiltonian`` terms and ``baths``. A term
is ``{"coefficient": c, "factors": [[site, name], ...]}`` with ``name`` in
sz, sp, sm, a, adag, n, id; complex coefficients are written ``[re, im]``.
"""

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import pathlib
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import reduce

import numpy as np

from .bath import BathSpec
from .errors import ConfigError, MeqforgeError, ValidationError
from .liouvillian import build_liouvillian, export_matrix_market
from .models import ChainParams, chain_baths, chain_hamiltonians, number_operator
from .operators import CompositeSpace, annihilation, embed, pauli
from .secular import Unified, cluster_frequencies, parse_policy
from .solve import heat_flow, steady_state
from .spectral import bohr_frequencies, check_hermitian, diagonalize
from .symmetry import block_transform, export_blocks

__all__ = ["RunConfig", "parse_config", "build_model", "run_point", "main"]

log = logging.getLogger("meqforge")

COMMANDS = ("spectrum", "liouvillian", "steady", "sweep", "blocks")
SWEEP_ALIASES = {"g": ("g1", "g2"), "Omega": ("Omega_L", "Omega_R"), "omega": ("omega1", "omega2")}
CSV_COLUMNS = ["param1", "param2", "J_L", "J_R", "imbalance", "residual", "min_eig_rho", "flag"]


@dataclasses.dataclass
class RunConfig:
    model_kind: str
    chain: ChainParams = None
    custom: dict = None
    policy: object = None
    mode: str = "global"
    include_lamb_shift: bool = True
    heat_flow_hamiltonian: str = "auto"
    sweep: list = dataclasses.field(default_factory=list)
    cluster_width: float = 0.05
    symmetry: object = "number"
    out_dir: str = "meqforge_out"
    steady_tol: float = 1e-10

    def flow_hamiltonian(self):
        if self.heat_flow_hamiltonian != "auto":
            return self.heat_flow_hamiltonian
        return "system+lamb" if self.include_lamb_shift else "system"


# --- parsing -----------------------------------------------------------------


def _require(obj, key, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    if key not in obj:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return obj[key]


def _number(value, path, positive=False, allow_zero=True):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(path, f"expected a number, got {value!r}") from None
    if math.isnan(x):
        raise ConfigError(path, "NaN is not allowed")
    if positive and not (x > 0 or (allow_zero and x == 0)):
        raise ConfigError(path, f"must be {'>=' if allow_zero else '>'} 0, got {x}")
    return x


def _coefficient(value, path):
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(path, "complex coefficients are written [re, im]")
        return complex(_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))
    return complex(_number(value, path))


_LOCAL_OPS = ("sz", "sp", "sm", "a", "adag", "n", "id")


def _local_operator(name, dim, path):
    if name not in _LOCAL_OPS:
        raise ConfigError(path, f"unknown operator {name!r}; expected one of {list(_LOCAL_OPS)}")
    if name in ("sz", "sp", "sm"):
        if dim != 2:
            raise ConfigError(path, f"{name} needs a two-level site, site has dimension {dim}")
        return pauli({"sz": "z", "sp": "plus", "sm": "minus"}[name])
    if name == "id":
        return np.eye(dim, dtype=complex)
    a = annihilation(dim)
    return {"a": a, "adag": a.conj().T, "n": a.conj().T @ a}[name]


def _terms_operator(terms, space, path):
    if not isinstance(terms, list):
        raise ConfigError(path, "expected a list of terms")
    total = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    for n, term in enumerate(terms):
        tpath = f"{path}[{n}]"
        coeff = _coefficient(_require(term, "coefficient", tpath), f"{tpath}.coefficient")
        factors = _require(term, "factors", tpath)
        if not isinstance(factors, list) or not factors:
            raise ConfigError(f"{tpath}.factors", "expected a non-empty list of [site, name]")
        mats = []
        for k, fac in enumerate(factors):
            fpath = f"{tpath}.factors[{k}]"
            if not isinstance(fac, list) or len(fac) != 2 or not isinstance(fac[0], int) or isinstance(fac[0], bool):
                raise ConfigError(fpath, "expected [site, name]")
            site, name = fac
            if not 0 <= site < len(space.dims):
                raise ConfigError(fpath, f"site {site} out of range for dims {list(space.dims)}")
            mats.append(embed(_local_operator(name, space.dims[site], fpath), site, space))
        total += coeff * reduce(np.matmul, mats)
    return total


def _hermitian(op, path):
    try:
        return check_hermitian(op, path)
    except ValidationError:
        raise ValidationError(f"{path}: assembled operator is not Hermitian; check the coefficients of these terms") from None


def _grid(spec, path):
    name = _require(spec, "name", path)
    if not isinstance(name, str):
        raise ConfigError(f"{path}.name", "expected a string")
    if "values" in spec:
        vals = spec["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"{path}.values", "expected a non-empty list")
        values = [_number(v, f"{path}.values[{i}]") for i, v in enumerate(vals)]
    else:
        start = _number(_require(spec, "start", path), f"{path}.start")
        stop = _number(_require(spec, "stop", path), f"{path}.stop")
        num = _require(spec, "num", path)
        if not isinstance(num, int) or isinstance(num, bool) or num < 1:
            raise ConfigError(f"{path}.num", "expected a positive integer")
        values = [float(x) for x in np.linspace(start, stop, num)]
    if any(not math.isfinite(v) for v in values):
        raise ConfigError(f"{path}.values", "values must be finite")
    diffs = np.diff(values)
    if diffs.size and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ConfigError(f"{path}.values", "values must be strictly monotone")
    return name, values


def _chain_params(raw, path):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    known = {f.name: f for f in dataclasses.fields(ChainParams)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}", f"unknown chain parameter; expected one of {sorted(known)}")
        if key == "coupling":
            kwargs[key] = value
        elif key == "N":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{path}.N", "expected an integer")
            kwargs[key] = value
        else:
            kwargs[key] = _number(value, f"{path}.{key}")
    try:
        return ChainParams(**kwargs)
    except ValidationError as exc:
        raise ConfigError(path, str(exc)) from None


def _custom_model(raw, path):
    dims = _require(raw, "dims", path)
    if not isinstance(dims, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in dims):
        raise ConfigError(f"{path}.dims", "expected a list of integers")
    try:
        space = CompositeSpace(tuple(dims))
    except MeqforgeError as exc:
        raise ConfigError(f"{path}.dims", str(exc)) from None
    h = _terms_operator(_require(raw, "hamiltonian", path), space, f"{path}.hamiltonian")
    h = _hermitian(h, f"{path}.hamiltonian")
    bare = None
    if "bare_hamiltonian" in raw:
        bare = _hermitian(_terms_operator(raw["bare_hamiltonian"], space, f"{path}.bare_hamiltonian"), f"{path}.bare_hamiltonian")
    baths_raw = _require(raw, "baths", path)
    if not isinstance(baths_raw, list) or not baths_raw:
        raise ConfigError(f"{path}.baths", "expected a non-empty list")
    baths = []
    for n, b in enumerate(baths_raw):
        bpath = f"baths[{n}]"
        temp = _number(_require(b, "T", bpath), f"{bpath}.T", positive=True, allow_zero=False)
        alpha = _number(_require(b, "alpha", bpath), f"{bpath}.alpha")
        chi = _number(b.get("chi", 0.1), f"{bpath}.chi", positive=True)
        omega_c = _number(b.get("omega_c", 100.0), f"{bpath}.omega_c", positive=True, allow_zero=False)
        if "couplings" in b:
            term_sets = b["couplings"]
            if not isinstance(term_sets, list) or not term_sets:
                raise ConfigError(f"{bpath}.couplings", "expected a non-empty list of term lists")
            paths = [f"{bpath}.couplings[{k}]" for k in range(len(term_sets))]
        else:
            term_sets = [_require(b, "coupling", bpath)]
            paths = [f"{bpath}.coupling"]
        ops = [_hermitian(_terms_operator(t, space, p), p) for t, p in zip(term_sets, paths)]
        label = b.get("label", f"bath{n}")
        if not isinstance(label, str):
            raise ConfigError(f"{bpath}.label", "expected a string")
        try:
            baths.append(BathSpec(temp, alpha, chi, omega_c, ops, label=label))
        except MeqforgeError as exc:
            raise ConfigError(bpath, str(exc)) from None
    return {"space": space, "H": h, "H_bare": bare, "baths": baths}


def parse_config(source):
    """Validate a JSON config given as a path, JSON text or an already-loaded dict."""
    if isinstance(source, dict):
        raw = source
    else:
        path = pathlib.Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError("", f"cannot read config {source}: {exc}") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON in {source}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be an object")

    model = _require(raw, "model", "")
    kind = _require(model, "kind", "model")
    cfg = RunConfig(model_kind=kind)
    if kind == "chain":
        cfg.chain = _chain_params(model.get("params", {}), "model.params")
    elif kind == "custom":
        cfg.custom = _custom_model(model, "model")
    else:
        raise ConfigError("model.kind", f"expected 'chain' or 'custom', got {kind!r}")

    try:
        cfg.policy = parse_policy(raw.get("policy", {"kind": "partial", "C_PSA": 1e4}))
    except ValidationError as exc:
        raise ConfigError("policy", str(exc)) from None
    cfg.mode = raw.get("mode", "global")
    if cfg.mode not in ("global", "local"):
        raise ConfigError("mode", f"expected 'global' or 'local', got {cfg.mode!r}")
    if cfg.mode == "local" and kind == "custom" and cfg.custom["H_bare"] is None:
        raise ConfigError("model.bare_hamiltonian", "local mode needs a bare Hamiltonian for custom models")
    lamb = raw.get("include_lamb_shift", True)
    if not isinstance(lamb, bool):
        raise ConfigError("include_lamb_shift", "expected true or false")
    cfg.include_lamb_shift = lamb
    cfg.heat_flow_hamiltonian = raw.get("heat_flow_hamiltonian", "auto")
    if cfg.heat_flow_hamiltonian not in ("auto", "system", "system+lamb"):
        raise ConfigError("heat_flow_hamiltonian", "expected 'auto', 'system' or 'system+lamb'")
    if "steady_tol" in raw:
        cfg.steady_tol = _number(raw["steady_tol"], "steady_tol", positive=True, allow_zero=False)

    sweep = raw.get("sweep")
    if sweep is not None:
        if kind != "chain":
            raise ConfigError("sweep", "only chain models can be swept")
        if not isinstance(sweep, dict) or "param1" not in sweep:
            raise ConfigError("sweep", "expected an object with param1 and optionally param2")
        extra = set(sweep) - {"param1", "param2"}
        if extra:
            raise ConfigError(f"sweep.{sorted(extra)[0]}", "at most two parameters can be swept")
        fields = {f.name for f in dataclasses.fields(ChainParams)} - {"coupling", "N"}
        for key in ("param1", "param2"):
            if key in sweep:
                name, values = _grid(sweep[key], f"sweep.{key}")
                if name not in fields and name not in SWEEP_ALIASES:
                    raise ConfigError(f"sweep.{key}.name", f"unknown parameter {name!r}")
                cfg.sweep.append((name, values))

    spectrum = raw.get("spectrum", {})
    width = spectrum.get("w") if isinstance(spectrum, dict) else None
    if width is None and isinstance(cfg.policy, Unified):
        width = cfg.policy.width
    cfg.cluster_width = _number(width if width is not None else 0.05, "spectrum.w", positive=True, allow_zero=False)

    sym = raw.get("symmetry", {})
    gen = sym.get("generator", "number") if isinstance(sym, dict) else "number"
    if gen not in ("number", "hamiltonian") and not isinstance(gen, list):
        raise ConfigError("symmetry.generator", "expected 'number', 'hamiltonian' or a list of terms")
    if gen == "number" and kind == "custom":
        raise ConfigError("symmetry.generator", "custom models need an explicit generator")
    if isinstance(gen, list):
        if kind != "custom":
            raise ConfigError("symmetry.generator", "term lists are only supported for custom models")
        gen = _hermitian(_terms_operator(gen, cfg.custom["space"], "symmetry.generator"), "symmetry.generator")
    cfg.symmetry = gen

    outputs = raw.get("outputs", {})
    if not isinstance(outputs, dict):
        raise ConfigError("outputs", "expected an object")
    cfg.out_dir = outputs.get("dir", cfg.out_dir)
    return cfg


# --- model assembly ----------------------------------------------------------


def _with_params(params, name, value):
    targets = SWEEP_ALIASES.get(name, (name,))
    return dataclasses.replace(params, **{t: value for t in targets})


def build_model(cfg, params=None):
    """``(H_full, H_jump, baths, H_S)`` for a config, optionally with chain parameters overridden."""
    if cfg.model_kind == "chain":
        p = params or cfg.chain
        model = chain_hamiltonians(p)
        baths = chain_baths(p, model)
        jump = model.H_bare if cfg.mode == "local" else model.H_full
        return model.H_full, jump, baths, model.H_full
    c = cfg.custom
    jump = c["H_bare"] if cfg.mode == "local" else c["H"]
    return c["H"], jump, c["baths"], c["H"]


def _build(cfg, params=None):
    h, jump, baths, h_s = build_model(cfg, params)
    build = build_liouvillian(h, jump, baths, cfg.policy, include_lamb_shift=cfg.include_lamb_shift)
    return build, h_s


def run_point(cfg, params=None):
    """Build, solve and measure one configuration; returns a JSON-ready dict."""
    build, h_s = _build(cfg, params)
    ss = steady_state(build, tol=cfg.steady_tol)
    flow = heat_flow(h_s, build, ss.rho, hamiltonian=cfg.flow_hamiltonian())
    v = diagonalize(build.hamiltonian).vectors
    populations = np.real(np.einsum("ji,jk,ki->i", v.conj(), ss.rho, v))
    return {
        "policy": cfg.policy.describe(),
        "mode": cfg.mode,
        "heat_flows": flow.per_bath,
        "imbalance": flow.imbalance,
        "residual": ss.residual,
        "method": ss.method,
        "min_eig_rho": ss.min_eigenvalue,
        "flag": flow.flag,
        "kept_pairs": build.kept_pairs,
        "dropped_pairs": build.dropped_pairs,
        "energy_populations": [float(x) for x in populations],
    }


def _sweep_worker(args):
    cfg, index, values = args
    params = cfg.chain
    for (name, _), v in zip(cfg.sweep, values):
        params = _with_params(params, name, v)
    try:
        result = run_point(cfg, params)
        return index, values, result, None
    except MeqforgeError as exc:
        return index, values, None, f"{type(exc).__name__}: {exc}"


def _fmt(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _sweep_rows(cfg, jobs):
    grids = [vals for _, vals in cfg.sweep]
    points = [((i,), (v,)) for i, v in enumerate(grids[0])]
    if len(grids) == 2:
        points = [((i, j), (a, b)) for i, a in enumerate(grids[0]) for j, b in enumerate(grids[1])]
    tasks = [(cfg, idx, vals) for idx, vals in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, tasks))
    else:
        results = [_sweep_worker(t) for t in tasks]
    return sorted(results, key=lambda r: r[0])


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)
    return path


# --- commands ----------------------------------------------------------------


def cmd_spectrum(cfg, out, jobs):
    h, jump, _, _ = build_model(cfg)
    eig = diagonalize(jump)
    freqs = bohr_frequencies(eig)
    clusters = cluster_frequencies(freqs, cfg.cluster_width)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frequency", "cluster", "representative"])
    for k, c in enumerate(clusters):
        for f in c.members:
            w.writerow([repr(float(f)), k, repr(float(c.representative))])
    _write(out / "bohr_frequencies.csv", buf.getvalue())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster", "representative", "size", "min", "max", "width", "gap_to_next"])
    separated = True
    for k, c in enumerate(clusters):
        gap = clusters[k + 1].members[0] - c.members[-1] if k + 1 < len(clusters) else float("nan")
        if not math.isnan(gap) and gap <= c.width:
            separated = False
        w.writerow([k, repr(c.representative), len(c.members), repr(c.members[0]), repr(c.members[-1]), repr(c.width), repr(gap)])
    _write(out / "clusters.csv", buf.getvalue())
    print(f"{len(freqs)} Bohr frequencies, {len(clusters)} clusters at w={cfg.cluster_width:g}, well separated: {separated}")
    return 0


def cmd_liouvillian(cfg, out, jobs):
    build, _ = _build(cfg)
    export_matrix_market(build, out)
    report = {
        "policy": cfg.policy.describe(),
        "mode": cfg.mode,
        "dim": build.dim,
        "kept_pairs": build.kept_pairs,
        "dropped_pairs": build.dropped_pairs,
        "per_bath": {lab: {"kept": k, "dropped": d} for lab, (k, d) in build.pair_counts.items()},
        "clusters": None if build.clusters is None else len(build.clusters),
    }
    _write(out / "pairs.json", json.dumps(report, indent=2) + "\n")
    print(f"kept {build.kept_pairs} pairs, dropped {build.dropped_pairs}")
    return 0


def cmd_steady(cfg, out, jobs):
    result = run_point(cfg)
    _write(out / "steady.json", json.dumps(result, indent=2) + "\n")
    flows = ", ".join(f"J_{k} = {v:.6e}" for k, v in result["heat_flows"].items())
    print(f"{flows}; imbalance {result['imbalance']:.3e}; residual {result['residual']:.3e}")
    return 0


def cmd_sweep(cfg, out, jobs):
    if not cfg.sweep:
        raise ConfigError("sweep", "the sweep command needs a sweep section")
    rows = _sweep_rows(cfg, jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    failures = []
    for index, values, result, error in rows:
        p1 = _fmt(values[0])
        p2 = _fmt(values[1]) if len(values) > 1 else ""
        if error is not None:
            failures.append({"index": list(index), "values": list(values), "error": error})
            w.writerow([p1, p2, "nan", "nan", "nan", "nan", "nan", "error"])
            continue
        flows = result["heat_flows"]
        flag = result["flag"]
        jl, jr = (flows.get("L"), flows.get("R")) if not flag else (None, None)
        w.writerow([p1, p2, _fmt(jl), _fmt(jr), _fmt(result["imbalance"]), _fmt(result["residual"]), _fmt(result["min_eig_rho"]), flag])
    _write(out / "sweep.csv", buf.getvalue())
    if failures:
        _write(out / "sweep_failures.json", json.dumps(failures, indent=2) + "\n")
        for f in failures:
            print(f"point {f['values']}: {f['error']}", file=sys.stderr)
        return 2
    print(f"{len(rows)} grid points written")
    return 0


def cmd_blocks(cfg, out, jobs):
    build, h_s = _build(cfg)
    if isinstance(cfg.symmetry, np.ndarray):
        gen = cfg.symmetry
    elif cfg.symmetry == "hamiltonian":
        gen = h_s
    else:
        gen = number_operator(cfg.chain)
    decomp = block_transform(build, gen)
    export_blocks(decomp, out)
    summary = decomp.summary()
    print(f"{len(summary['labels'])} blocks, sizes {summary['sizes']}, off-block residual {summary['off_block_residual']:.3e}")
    return 0


HANDLERS = {
    "spectrum": cmd_spectrum,
    "liouvillian": cmd_liouvillian,
    "steady": cmd_steady,
    "sweep": cmd_sweep,
    "blocks": cmd_blocks,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="meqforge", description="Master-equation generators, steady states and heat flows.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    parser.add_argument("--out", default=None, help="output directory (overrides outputs.dir)")
    args = parser.parse_args(argv)
    logging.basicConfig(level=os.environ.get("MEQFORGE_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        cfg = parse_config(args.config)
        out = pathlib.Path(args.out or cfg.out_dir)
        return HANDLERS[args.command](cfg, out, args.jobs)
    except MeqforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
