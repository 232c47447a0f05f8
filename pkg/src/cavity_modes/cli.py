"""Command-line driver: mesh -> assemble -> solve -> classify -> compare -> reports.

Run configuration is a flat ``key = value`` file::

    geometry.box = 1 0.5 0.75 8 4 6     # or geometry.ball / .cylinder / .mesh
    material.preset = vacuum            # or material.eps_r / material.mu_r
    solver.methods = projection penalty
    reference.source = analytic-box
"""
from __future__ import annotations

import argparse
import io
import re
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assembly import (AssemblyError, assemble_constraint_direct, assemble_system,
                       check_identities, write_triplets)
from .eigensolvers import (PHYSICAL, DenseLimitError, SolverConfig, SolverError, solve)
from .materials import MaterialError, MaterialTensors, MediumCase, preset
from .mesh import (MeshError, extract_edges, generate_ball_mesh, generate_box_mesh,
                   generate_cylinder_mesh, format_mesh, read_mesh)
from .modes import (PAPER_IDS, ReferenceSpectrum, analytic_box_eigenvalues,
                    classify_by_alpha_sweep, classify_by_residual, compare_to_reference,
                    default_tau, paper_reference, read_reference, sets_agree)

METHODS = ("penalty", "augmented", "projection", "unconstrained")
GEOMETRY_KEYS = ("geometry.box", "geometry.ball", "geometry.cylinder", "geometry.mesh")
CROSS_TOL = 1e-8
DIGITS = 12


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    geometry: str                       # box | ball | cylinder | mesh
    geometry_args: tuple
    material: MaterialTensors
    material_name: str = "custom"
    mapping: str = "equiangular"
    methods: tuple = ("projection",)
    solver: SolverConfig = field(default_factory=SolverConfig)
    alpha_list: tuple = (800.0, 1600.0)
    tau: float | None = None
    match_tol: float = 1e-8
    out_dir: str = "cavity-modes-out"
    dump_matrices: bool = False
    reference: str = "none"
    reference_count: int = 1
    rel_tol: float = 0.02
    strict: bool = False


# ---------------------------------------------------------------------------
# config parsing

_BARE_J = re.compile(r"(^|[+-])j$")


def parse_complex(token: str) -> complex:
    """``a+bj`` style numbers; a bare ``j`` coefficient means 1."""
    tok = token.strip().replace("i", "j")
    tok = _BARE_J.sub(lambda mo: mo.group(1) + "1j", tok)
    if "j" in tok[:-1] and not tok.endswith("j"):
        raise ValueError(token)
    return complex(tok)


def parse_tensor(text: str) -> np.ndarray:
    rows = [r for r in text.split(";")]
    if len(rows) != 3:
        raise ValueError("tensor needs 3 rows separated by ';'")
    out = []
    for row in rows:
        entries = row.replace(",", " ").split()
        if len(entries) != 3:
            raise ValueError("each tensor row needs 3 entries")
        out.append([parse_complex(e) for e in entries])
    return np.array(out, dtype=complex)


def _floats(text, count, what):
    tok = text.split()
    if len(tok) != count:
        raise ValueError(f"{what} needs {count} values")
    return [float(t) for t in tok]


def _geometry(key, value, base_dir):
    kind = key.split(".", 1)[1]
    if kind == "box":
        a, b, c, nx, ny, nz = _floats(value, 6, "geometry.box")
        if min(nx, ny, nz) < 1 or not all(float(x).is_integer() for x in (nx, ny, nz)):
            raise ValueError("box divisions must be positive integers")
        return kind, (a, b, c, int(nx), int(ny), int(nz))
    if kind == "ball":
        r, level = _floats(value, 2, "geometry.ball")
        return kind, (r, int(level))
    if kind == "cylinder":
        r, height, level = _floats(value, 3, "geometry.cylinder")
        return kind, (r, height, int(level))
    path = Path(value.strip())
    if not path.is_absolute():
        path = base_dir / path
    return kind, (str(path),)


def _bool(value):
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _positive_int(value):
    k = int(value)
    if k < 1:
        raise ValueError("must be >= 1")
    return k


_SOLVER_FIELDS = {
    "solver.alpha": ("alpha", float),
    "solver.k": ("k", _positive_int),
    "solver.dense_limit": ("dense_limit", _positive_int),
    "solver.qz_tol": ("qz_tol", float),
    "solver.rank_tol_factor": ("rank_tol_factor", float),
    "solver.backend": ("backend", str),
}

KNOWN_KEYS = set(GEOMETRY_KEYS) | set(_SOLVER_FIELDS) | {
    "geometry.mapping", "material.preset", "material.eps_r", "material.mu_r",
    "solver.methods", "solver.alpha_list", "solver.tau", "solver.match_tol",
    "output.dir", "output.dump_matrices", "reference.source", "reference.rel_tol",
    "reference.count", "mesh.strict",
}


def parse_config(text: str, source: str = "<config>", base_dir=".") -> RunConfig:
    base_dir = Path(base_dir)
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        entries[key] = (lineno, value)

    def fail(key, msg):
        raise ConfigError(f"{source}:{entries[key][0]}: {key}: {msg}")

    def conv(key, fn):
        try:
            return fn(entries[key][1])
        except (ValueError, MaterialError) as exc:
            fail(key, exc)

    geo = [k for k in GEOMETRY_KEYS if k in entries]
    if not geo:
        raise ConfigError(f"{source}: missing geometry (one of {', '.join(GEOMETRY_KEYS)})")
    if len(geo) > 1:
        fail(geo[1], f"exactly one geometry source allowed (also got {geo[0]})")
    kind, gargs = conv(geo[0], lambda v: _geometry(geo[0], v, base_dir))
    opts = {"geometry": kind, "geometry_args": gargs}

    if "material.preset" in entries:
        if "material.eps_r" in entries or "material.mu_r" in entries:
            fail("material.preset", "give either a preset or explicit tensors, not both")
        name = entries["material.preset"][1]
        opts["material"] = conv("material.preset", preset)
        opts["material_name"] = name
    elif "material.eps_r" in entries or "material.mu_r" in entries:
        eps = conv("material.eps_r", parse_tensor) if "material.eps_r" in entries else np.eye(3)
        mu = conv("material.mu_r", parse_tensor) if "material.mu_r" in entries else np.eye(3)
        try:
            opts["material"] = MaterialTensors(eps, mu)
        except MaterialError as exc:
            key = "material.eps_r" if "material.eps_r" in entries else "material.mu_r"
            fail(key, exc)
    else:
        opts["material"] = preset("vacuum")
        opts["material_name"] = "vacuum"

    if "geometry.mapping" in entries:
        opts["mapping"] = entries["geometry.mapping"][1]

    if "solver.methods" in entries:
        methods = tuple(entries["solver.methods"][1].replace(",", " ").split())
        if not methods:
            fail("solver.methods", "at least one method required")
        bad = [m for m in methods if m not in METHODS]
        if bad:
            fail("solver.methods", f"unknown method {bad[0]!r}; choose from {METHODS}")
        opts["methods"] = tuple(dict.fromkeys(methods))
    solver = {}
    for key, (name, fn) in _SOLVER_FIELDS.items():
        if key in entries:
            solver[name] = conv(key, fn)
    if solver.get("backend", "auto") not in ("auto", "qz"):
        fail("solver.backend", "backend must be 'auto' or 'qz'")
    if "alpha" in solver and not solver["alpha"] > 0:
        fail("solver.alpha", "alpha must be positive")
    opts["solver"] = SolverConfig(**solver)
    if "solver.alpha_list" in entries:
        al = conv("solver.alpha_list",
                  lambda v: tuple(float(x) for x in v.replace(",", " ").split()))
        if len(al) < 2 or len(set(al)) != len(al) or min(al) <= 0:
            fail("solver.alpha_list", "need at least two distinct positive values")
        opts["alpha_list"] = al
    if "solver.tau" in entries:
        opts["tau"] = conv("solver.tau", float)
        if not opts["tau"] > 0:
            fail("solver.tau", "tau must be positive")
    if "solver.match_tol" in entries:
        opts["match_tol"] = conv("solver.match_tol", float)
    if "output.dir" in entries:
        out = Path(entries["output.dir"][1])
        opts["out_dir"] = str(out if out.is_absolute() else base_dir / out)
    if "output.dump_matrices" in entries:
        opts["dump_matrices"] = conv("output.dump_matrices", _bool)
    if "mesh.strict" in entries:
        opts["strict"] = conv("mesh.strict", _bool)
    if "reference.source" in entries:
        src = entries["reference.source"][1]
        if src not in ("none", "analytic-box") + PAPER_IDS:
            path = Path(src)
            src = str(path if path.is_absolute() else base_dir / path)
        if src == "analytic-box" and kind != "box":
            fail("reference.source", "analytic-box needs a box geometry")
        opts["reference"] = src
    if "reference.rel_tol" in entries:
        opts["rel_tol"] = conv("reference.rel_tol", float)
    if "reference.count" in entries:
        opts["reference_count"] = conv("reference.count", _positive_int)
    return RunConfig(**opts)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), path.parent)


# ---------------------------------------------------------------------------
# pipeline pieces

def build_mesh(cfg: RunConfig):
    g = cfg.geometry_args
    if cfg.geometry == "box":
        return generate_box_mesh(*g)
    if cfg.geometry == "ball":
        return generate_ball_mesh(*g, mapping=cfg.mapping)
    if cfg.geometry == "cylinder":
        return generate_cylinder_mesh(*g, mapping=cfg.mapping)
    return read_mesh(g[0], strict=cfg.strict)


def build_reference(cfg: RunConfig) -> ReferenceSpectrum | None:
    if cfg.reference == "none":
        return None
    if cfg.reference == "analytic-box":
        a, b, c = cfg.geometry_args[:3]
        return analytic_box_eigenvalues(a, b, c, cfg.reference_count)
    if cfg.reference in PAPER_IDS:
        return paper_reference(cfg.reference)
    return read_reference(cfg.reference)


def _g(x) -> str:
    return format(float(x), f".{DIGITS}g")


def _modes_csv(sol, provenance) -> str:
    lines = ["mode,re,im,label,residual_constraint,residual_eigen,method,alpha,h,case"]
    for i, md in enumerate(sol.modes, start=1):
        lines.append(",".join([
            str(i), _g(md.lam.real), _g(md.lam.imag), md.label,
            _g(md.residual_constraint), _g(md.residual_eigen), sol.method,
            str(provenance.get("alpha", "")), _g(provenance["h"]), provenance["case"]]))
    return "\n".join(lines) + "\n"


class Reports:
    """Report files collected in memory and written in one go."""

    def __init__(self):
        self.files: dict[str, str] = {}
        self.summary: dict[str, bool] = {}
        self.failures: list[str] = []

    def check(self, name: str, ok: bool, detail: str = ""):
        self.summary[name] = bool(ok)
        if not ok:
            self.failures.append(f"{name}: {detail}" if detail else name)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (out / name).write_text(text, encoding="utf-8")
        (out / "summary.txt").write_text(
            "".join(f"{k} = {'pass' if v else 'fail'}\n" for k, v in self.summary.items()),
            encoding="utf-8")

    @property
    def ok(self) -> bool:
        return all(self.summary.values())


def _size_guard(cfg: RunConfig, mesh, methods):
    size = mesh.num_nodes + len(extract_edges(mesh).edges)
    if methods and size > cfg.solver.dense_limit:
        raise DenseLimitError(f"n+m = {size} exceeds dense_limit = {cfg.solver.dense_limit}; "
                              "use a coarser mesh or raise solver.dense_limit")


def _provenance(cfg, sys, sol):
    case = str(sys.case) if sys.case is not None else ""
    alpha = sol.params.get("alpha", "")
    return {"alpha": alpha, "h": sys.mesh_h, "case": case}


def _asserted(sol, sys) -> bool:
    """Augmented results under magnetic loss are reported but not asserted."""
    return not (sol.method == "augmented"
                and sys.case in (MediumCase.CASE3, MediumCase.CASE4))


def _leading(values, count):
    v = np.asarray(values, dtype=complex)
    order = np.lexsort((v.imag, v.real, np.abs(v)))
    return v[order[:count]]


def _solve_methods(cfg, sys, methods, rep, log):
    sols = {}
    tau = cfg.tau if cfg.tau is not None else default_tau(sys)
    for method in methods:
        t0 = time.process_time()
        try:
            sol = solve(method, sys, cfg.solver)
        except (SolverError, np.linalg.LinAlgError) as exc:
            rep.check(f"{method}.solve", False, str(exc))
            continue
        if method in ("penalty", "unconstrained"):
            sol = classify_by_residual(sol, tau)
        log(f"{method}: {len(sol)} modes, {sum(md.label == PHYSICAL for md in sol.modes)} "
            f"physical, cpu {time.process_time() - t0:.2f} s")
        rep.check(f"{method}.solve", True)
        sols[method] = sol
        rep.files[f"modes_{method}.csv"] = _modes_csv(sol, _provenance(cfg, sys, sol))
    return sols


def _cross_method(sols, sys, rep):
    lines = ["method_a,method_b,max_rel_gap,asserted"]
    constrained = [m for m in ("projection", "penalty", "augmented") if m in sols]
    for i, a in enumerate(constrained):
        for b in constrained[i + 1:]:
            va, vb = sols[a].physical(), sols[b].physical()
            if not _asserted(sols[b], sys):
                vb = sols[b].eigenvalues
            count = min(len(va), len(vb))
            gap = sets_agree(_leading(va, count), _leading(vb, count)) if count else 0.0
            asserted = _asserted(sols[a], sys) and _asserted(sols[b], sys)
            lines.append(f"{a},{b},{_g(gap)},{'yes' if asserted else 'no'}")
            if asserted:
                rep.check(f"agreement.{a}_{b}", gap <= CROSS_TOL, f"max relative gap {gap:.3e}")
    if len(lines) > 1:
        rep.files["cross_method.csv"] = "\n".join(lines) + "\n"
    if "projection" in sols:
        worst = max((md.residual_constraint for md in sols["projection"].modes), default=0.0)
        rep.check("projection.residual_constraint", worst <= 1e-10, f"max |C xi| = {worst:.3e}")


def _compare(cfg, sols, sys, ref, rep, rel_tol):
    header, blocks = None, []
    for method, sol in sols.items():
        if method == "unconstrained":
            continue
        asserted = _asserted(sol, sys)
        pool = sol if asserted else sol.eigenvalues
        report = compare_to_reference(pool, ref, rel_tol, method=method,
                                      provenance=_provenance(cfg, sys, sol))
        csv = report.to_csv(DIGITS)
        head, _, body = csv.partition("\n")
        header = head
        blocks.append(body)
        if asserted:
            detail = (f"{report.missing} reference values unmatched" if report.missing
                      else f"max relative error {report.max_error:.3e} > {rel_tol}")
            rep.check(f"{method}.reference", report.passed, detail)
    if header is not None:
        rep.files["comparison.csv"] = header + "\n" + "".join(blocks)


# ---------------------------------------------------------------------------
# subcommands

def cmd_mesh(cfg, rep, log):
    mesh = build_mesh(cfg)
    edges = extract_edges(mesh)
    try:
        mesh.check_conforming()
        rep.check("mesh.conforming", True)
    except MeshError as exc:
        rep.check("mesh.conforming", False, str(exc))
    rep.files["mesh.txt"] = format_mesh(mesh)
    log(f"{mesh.label}: {mesh.num_nodes} nodes, {edges.n} edges, {mesh.num_tets} tets, "
        f"h = {_g(mesh.h)}, n+m = {mesh.num_nodes + edges.n}")
    return None


def cmd_assemble(cfg, rep, log):
    mesh = build_mesh(cfg)
    edges = extract_edges(mesh)
    sys_ = assemble_system(mesh, edges, mat=cfg.material)
    C_direct = assemble_constraint_direct(mesh, edges, cfg.material)
    ident = check_identities(sys_, C_direct)
    rep.files["identities.csv"] = "quantity,value\n" + "".join(
        f"{k},{v if isinstance(v, int) else _g(v)}\n" for k, v in ident.rows())
    rep.check("identities", ident.ok, ", ".join(ident.flags))
    log(f"assembled n = {sys_.n}, m = {sys_.m}, case {sys_.case}")
    return sys_


def cmd_solve(cfg, rep, log, rel_tol=None):
    mesh = build_mesh(cfg)
    _size_guard(cfg, mesh, cfg.methods)
    ref = build_reference(cfg)
    sys_ = assemble_system(mesh, mat=cfg.material)
    log(f"{mesh.label}: n = {sys_.n}, m = {sys_.m}, h = {_g(sys_.mesh_h)}, case {sys_.case}")
    sols = _solve_methods(cfg, sys_, cfg.methods, rep, log)
    _cross_method(sols, sys_, rep)
    if ref is not None:
        _compare(cfg, sols, sys_, ref, rep, cfg.rel_tol if rel_tol is None else rel_tol)
    return sys_, sols


def cmd_sweep(cfg, rep, log):
    mesh = build_mesh(cfg)
    _size_guard(cfg, mesh, ("penalty",))
    sys_ = assemble_system(mesh, mat=cfg.material)
    t0 = time.process_time()
    try:
        res = classify_by_alpha_sweep(sys_, cfg.alpha_list, k=cfg.solver.k,
                                      match_tol=cfg.match_tol, config=cfg.solver)
    except SolverError as exc:
        rep.check("sweep.solve", False, str(exc))
        return sys_
    rep.check("sweep.solve", True)
    log(f"sweep over alpha {cfg.alpha_list}: {len(res.stable)} stable, "
        f"{len(res.unstable)} unstable, cpu {time.process_time() - t0:.2f} s")
    alphas = ";".join(_g(a) for a in cfg.alpha_list)
    case = str(sys_.case) if sys_.case is not None else ""
    lines = ["mode,re,im,label,method,alpha,h,case"]
    for i, (lam, lab) in enumerate(zip(res.eigenvalues, res.labels), start=1):
        lines.append(f"{i},{_g(lam.real)},{_g(lam.imag)},{lab},penalty-sweep,{alphas},"
                     f"{_g(sys_.mesh_h)},{case}")
    rep.files["sweep.csv"] = "\n".join(lines) + "\n"
    try:
        proj = solve("projection", sys_, cfg.solver, k=None)
    except SolverError as exc:
        rep.check("projection.solve", False, str(exc))
        return sys_
    stable = res.stable
    gap = sets_agree(stable, _leading(proj.eigenvalues, len(stable))) if len(stable) else np.inf
    rep.check("sweep.stable_vs_projection", gap <= CROSS_TOL, f"max relative gap {gap:.3e}")
    ref = build_reference(cfg)
    if ref is not None:
        report = compare_to_reference(stable, ref, cfg.rel_tol, method="penalty-sweep",
                                      provenance={"alpha": alphas, "h": sys_.mesh_h,
                                                  "case": case})
        rep.files["comparison.csv"] = report.to_csv(DIGITS)
        rep.check("sweep.reference", report.passed, f"max relative error {report.max_error:.3e}")
    return sys_


# validation experiments: (geometry, args-without-level, preset, reference, methods, level)
EXPERIMENTS = {
    "A": ("ball", (1.0,), "vacuum", "sphere", ("penalty", "augmented", "projection"), 4),
    "B": ("cylinder", (0.2, 0.5), "paper-case2", "cylinder-case2",
          ("penalty", "augmented", "projection"), 4),
    "C": ("cylinder", (0.2, 0.5), "paper-case4", "cylinder-case4",
          ("penalty", "projection"), 4),
}
VALIDATE_REL_TOL = 0.05


def validation_config(which: str, base: RunConfig | None = None, level: int | None = None,
                      methods=None) -> RunConfig:
    kind, args, mat, ref, default_methods, default_level = EXPERIMENTS[which]
    level = default_level if level is None else level
    count = 2 if which != "A" else 1
    cfg = base or RunConfig(kind, (), preset(mat))
    return replace(cfg, geometry=kind, geometry_args=args + (level,), material=preset(mat),
                   material_name=mat, reference=ref, reference_count=count,
                   methods=tuple(methods) if methods else default_methods,
                   rel_tol=VALIDATE_REL_TOL)


def _validate_reference(which):
    ref = paper_reference(EXPERIMENTS[which][3])
    if which == "A":
        return ref
    # only the first two tabulated modes carry the loose-tolerance claim
    return ReferenceSpectrum(ref.source, ref.values[:2], ref.multiplicities[:2],
                             note=ref.note)


def cmd_validate(cfg, which, rep, log):
    sys_, sols = cmd_solve(replace(cfg, reference="none"), rep, log)
    ref = _validate_reference(which)
    _compare(cfg, sols, sys_, ref, rep, VALIDATE_REL_TOL)
    if which in ("B", "C"):
        want = 1 if which == "B" else -1
        for method, sol in sols.items():
            if method == "unconstrained" or not _asserted(sol, sys_):
                continue
            first = _leading(sol.physical(), 2)
            ok = len(first) == 2 and all(np.sign(v.imag) == want for v in first)
            rep.check(f"{method}.imag_sign", ok, f"first two physical {first}")
    return sys_


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cavity-modes",
                                description="Resonant modes of closed anisotropic cavities.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("mesh", "generate or load a mesh and write it out"),
                        ("assemble", "dump A, M, Y, C and check the matrix identities"),
                        ("solve", "solve with the configured methods and compare"),
                        ("sweep", "classify penalty eigenvalues by an alpha sweep"),
                        ("validate", "run one of the sphere/cylinder validation experiments")):
        sp_ = sub.add_parser(name, help=help_)
        if name == "validate":
            sp_.add_argument("experiment", choices=sorted(EXPERIMENTS),
                             help="A: vacuum sphere, B: electric-lossy cylinder, "
                                  "C: electric and magnetic lossy cylinder")
            sp_.add_argument("--config", help="optional; supplies solver and output settings")
            sp_.add_argument("--level", type=int, help="mesh refinement level")
            sp_.add_argument("--methods", help="comma-separated method list")
        else:
            sp_.add_argument("--config", required=True)
        sp_.add_argument("--out", help="report directory (overrides output.dir)")
        sp_.add_argument("--strict", action="store_true",
                         help="reject non-conforming mesh files")
    return p


def run(cfg: RunConfig, command: str = "solve", experiment: str | None = None,
        log=None) -> int:
    """Run one subcommand; returns the process exit status."""
    log = log or (lambda msg: print(msg, flush=True))
    rep = Reports()
    commands = {
        "mesh": lambda: cmd_mesh(cfg, rep, log),
        "assemble": lambda: cmd_assemble(cfg, rep, log),
        "solve": lambda: cmd_solve(cfg, rep, log)[0],
        "sweep": lambda: cmd_sweep(cfg, rep, log),
        "validate": lambda: cmd_validate(cfg, experiment, rep, log),
    }
    if command not in commands:
        print(f"cavity-modes: error: unknown command {command!r}", file=sys.stderr)
        return 2
    try:
        sys_ = commands[command]()
    except (ConfigError, MeshError, MaterialError, AssemblyError, SolverError, OSError,
            ValueError) as exc:
        print(f"cavity-modes: error: {exc}", file=sys.stderr)
        return 2
    if sys_ is not None and (command == "assemble" or cfg.dump_matrices):
        for name in ("A", "M", "Y", "C"):
            buf = io.StringIO()
            write_triplets(getattr(sys_, name), buf)
            rep.files[f"{name}.txt"] = buf.getvalue()
    rep.write(cfg.out_dir)
    log(f"reports written to {cfg.out_dir}")
    if not rep.ok:
        print(f"cavity-modes: FAIL {rep.failures[0]}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            base = load_config(args.config) if args.config else None
            methods = args.methods.replace(",", " ").split() if args.methods else None
            if methods and any(m not in METHODS for m in methods):
                raise ConfigError(f"--methods: choose from {METHODS}")
            cfg = validation_config(args.experiment, base, args.level, methods)
        else:
            cfg = load_config(args.config)
    except (ConfigError, MaterialError) as exc:
        print(f"cavity-modes: error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if args.strict:
        cfg = replace(cfg, strict=True)
    return run(cfg, args.command, getattr(args, "experiment", None))


if __name__ == "__main__":
    sys.exit(main())
