"""Command-line front end.

Configs are INI files::

    [grid]
    n = 1
    L = 8
    N = 16

    [run]
    seed = 42
    kmax = 6
    out = out

    [generators]
    g1 = gaussian(0, 0, 1)

    [verify-tsp]
    operator = mult:exp(2*pi*i*y)

    [frameop]
    tol = 1e-3        # range-operator agreement (Kmax truncation)
    tsp_tol = 1e-6    # commutation with twisted translations

Command-line flags override the file.  Exit codes: 0 success, 2 bad config,
3 numerical failure.
"""

from __future__ import annotations

import configparser
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import artifacts
from .errors import ConfigError, TwistFrameError
from .expr import free_names, number, parse_generator, parse_multiplier
from .frames import (EPS_RANK, GeneratorSet, decompose, fiber_gram, frame_bounds_single,
                     parsevalize, span_residual, truncated_gram_translates)
from .grids import GridSpec, norm
from .rangeops import (FiberOperatorField, PropertyRow, TSP_TOL, TranslateBasis,
                       check_tsp_property_transfer, extract_range_operator, field_distance,
                       frame_operator, identity_operator, inverse_frame_operator,
                       multiplication_operator, probes, scaled_identity, unitary_gap, verify_tsp)
from .zak import EPS_SUPPORT, bracket, membership_residual

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("analyze", "parsevalize", "decompose", "frameop", "verify-tsp", "demo-mult")


class CheckFailed(TwistFrameError):
    """A verification inside a command did not meet its tolerance."""


@dataclass
class RunConfig:
    spec: GridSpec = field(default_factory=GridSpec)
    generators: list[tuple[str, str]] = field(default_factory=list)
    seed: int = 42
    kmax: int = 6
    eps_support: float = EPS_SUPPORT
    eps_rank: float = EPS_RANK
    out: Path = Path("out")
    sections: dict[str, dict[str, str]] = field(default_factory=dict)

    def section(self, name: str) -> dict[str, str]:
        return self.sections.get(name, {})

    def param(self, command: str, key: str, default: str) -> str:
        return self.section(command).get(key, default)

    def header(self, command: str) -> str:
        s = self.spec
        return f"# twistframe {command} seed={self.seed} kmax={self.kmax} n={s.n} L={s.L} N={s.N}"


def _int(value, key: str) -> int:
    try:
        return int(str(value).strip())
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _float(value, key: str) -> float:
    try:
        return number(str(value))
    except ConfigError:
        raise ConfigError(f"{key} must be a real number, got {value!r}") from None


def load_config(path: str | Path | None = None, *, seed=None, kmax=None, grid_n=None,
                grid_l=None, out=None) -> RunConfig:
    """Read an INI config (optional) and apply flag overrides, validating ranges."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep generator labels as written
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        try:
            cp.read_string(p.read_text())
        except configparser.Error as exc:
            raise ConfigError(f"{p}: {exc}") from None
    grid = dict(cp["grid"].items()) if cp.has_section("grid") else {}
    run = {k.lower(): v for k, v in (cp["run"].items() if cp.has_section("run") else [])}
    # "n" is the dimension and "N" the sampling rate, so grid keys are case-sensitive
    unknown = set(grid) - {"n", "L", "N"}
    if unknown:
        raise ConfigError(f"unknown [grid] keys: {sorted(unknown)}")
    dim = _int(grid.get("n", 1), "grid.n")
    L = _int(grid.get("L", 8), "grid.L")
    N = _int(grid.get("N", 16), "grid.N")
    if grid_l is not None:
        L = grid_l
    if grid_n is not None:
        N = grid_n
    try:
        spec = GridSpec(dim, L, N)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cfg = RunConfig(spec=spec)
    cfg.seed = _int(seed if seed is not None else run.get("seed", 42), "seed")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    cfg.kmax = _int(kmax if kmax is not None else run.get("kmax", 6), "kmax")
    if not 1 <= cfg.kmax <= spec.L - 2:
        raise ConfigError(f"kmax must be in [1, L-2] = [1, {spec.L - 2}], got {cfg.kmax}")
    cfg.eps_support = _float(run.get("eps_support", EPS_SUPPORT), "eps_support")
    cfg.eps_rank = _float(run.get("eps_rank", EPS_RANK), "eps_rank")
    if not (0 < cfg.eps_support < 1 and 0 < cfg.eps_rank < 1):
        raise ConfigError("eps_support and eps_rank must lie in (0, 1)")
    cfg.out = Path(out if out is not None else run.get("out", "out"))
    if cp.has_section("generators"):
        cfg.generators = [(k, v) for k, v in cp["generators"].items()]
    for name in cp.sections():
        if name not in ("grid", "run", "generators"):
            if name not in COMMANDS:
                raise ConfigError(f"unknown config section [{name}]")
            cfg.sections[name] = dict(cp[name].items())
    return cfg


def build_generators(cfg: RunConfig, required: bool = True) -> GeneratorSet | None:
    if not cfg.generators:
        if required:
            raise ConfigError("the [generators] section is empty")
        return None
    gens = [parse_generator(expr, cfg.spec, label) for label, expr in cfg.generators]
    return GeneratorSet(tuple(gens))


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_") or "f"


def _emit(cfg: RunConfig, name: str, command: str, lines: list[str]) -> None:
    text = "\n".join([cfg.header(command)] + lines) + "\n"
    artifacts.atomic_write(cfg.out / name, text)
    for line in lines:
        click.echo(line)


def _row(check: str, lhs: float, rhs: float, tol: float, residual: float | None = None) -> PropertyRow:
    res = abs(lhs - rhs) if residual is None else residual
    return PropertyRow(check, lhs, rhs, res, res <= tol)


def _finish(rows: list[PropertyRow]) -> int:
    bad = [r.check for r in rows if not r.passed]
    if bad:
        raise CheckFailed(f"failed checks: {', '.join(bad)}")
    return EXIT_OK


# --------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: RunConfig) -> int:
    """Bracket tables, frame bounds and truncated-Gram cross-check per generator."""
    gens = build_generators(cfg)
    tol = _float(cfg.param("analyze", "parseval_tol", "1e-6"), "parseval_tol")
    agree = _float(cfg.param("analyze", "agreement", "0.05"), "agreement")
    reports, lines = [], []
    for g in gens:
        br = bracket(g, g, cfg.eps_support)
        artifacts.write_bracket_csv(cfg.out / f"bracket_{_slug(g.label)}.csv", br)
        rep = frame_bounds_single(g, parseval_tol=tol, eps_support=cfg.eps_support)
        A_est, B_est = truncated_gram_translates(GeneratorSet.of(g), cfg.kmax, cfg.eps_rank)
        rep = rep.with_estimates(A_est, B_est, cfg.kmax)
        reports.append(rep)
        ra, rb = abs(A_est - rep.A) / rep.A, abs(B_est - rep.B) / rep.B
        lines.append(PropertyRow(f"gram-check[{g.label}].A", A_est, rep.A, ra, ra <= agree).line())
        lines.append(PropertyRow(f"gram-check[{g.label}].B", B_est, rep.B, rb, rb <= agree).line())
    artifacts.write_frame_reports(cfg.out / "frame_report.csv", reports)
    _emit(cfg, "gram_check.txt", "analyze", lines)
    return EXIT_OK


def cmd_parsevalize(cfg: RunConfig) -> int:
    """Normalize each generator to a Parseval generator and verify it."""
    gens = build_generators(cfg)
    tol = _float(cfg.param("parsevalize", "tol", "1e-6"), "tol")
    rows = []
    for g in gens:
        psi = parsevalize(g, cfg.eps_support, f"parseval({g.label})")
        artifacts.dump_function(cfg.out / f"psi_{_slug(g.label)}.twsf", psi)
        b = bracket(psi, psi, cfg.eps_support).values.real
        on = bracket(g, g, cfg.eps_support).omega_mask
        gap = max(float(np.abs(b[on] - 1).max(initial=0)), float(np.abs(b[~on]).max(initial=0)))
        rows.append(_row(f"parseval-bracket[{g.label}]", gap, 0.0, tol))
        r1, _ = membership_residual(psi, g, cfg.eps_support)
        r2, _ = membership_residual(g, psi, cfg.eps_support)
        rows.append(_row(f"psi-in-span-of-phi[{g.label}]", r1, 0.0, tol))
        rows.append(_row(f"phi-in-span-of-psi[{g.label}]", r2, 0.0, tol))
    _emit(cfg, "parsevalize_report.txt", "parsevalize", [r.line() for r in rows])
    return _finish(rows)


def cmd_decompose(cfg: RunConfig) -> int:
    """Split the generated space into fiber-orthogonal Parseval pieces."""
    gens = build_generators(cfg)
    out = decompose(gens, cfg.eps_rank, cfg.eps_support)
    G = fiber_gram(out).gram()
    S = G.shape[-1]
    diag = G.diagonal(axis1=1, axis2=2).real
    parseval_gap = np.where(diag > 0.5, np.abs(diag - 1), np.abs(diag)).max(axis=0)
    off = np.abs(G - np.einsum("ti,ij->tij", diag, np.eye(S))).max(initial=0.0)
    spans = {g.label: span_residual(g, out, cfg.eps_rank) for g in gens}
    rows = [_row("fiber-orthogonal", float(off), 0.0, 1e-8)]
    entries = []
    for i, psi in enumerate(out):
        fname = f"{_slug(psi.label)}.twsf"
        artifacts.dump_function(cfg.out / fname, psi)
        nz = norm(psi) > 1e-6
        rows.append(_row(f"parseval[{psi.label}]", float(parseval_gap[i]), 0.0, 1e-6))
        entries.append({"label": psi.label, "file": fname, "source": gens[i].label,
                        "norm": norm(psi), "nonzero": nz, "parseval_gap": float(parseval_gap[i])})
    for label, r in spans.items():
        rows.append(_row(f"span[{label}]", r, 0.0, 1e-5))
    manifest = {
        "command": "decompose", "seed": cfg.seed,
        "grid": {"n": cfg.spec.n, "L": cfg.spec.L, "N": cfg.spec.N},
        "inputs": [{"label": g.label, "expr": e} for g, (_, e) in zip(gens, cfg.generators)],
        "outputs": entries,
        "max_fiber_overlap": float(off),
        "span_residuals": spans,
        "checks": [{"check": r.check, "residual": r.residual, "pass": r.passed} for r in rows],
    }
    artifacts.write_json(cfg.out / "manifest.json", manifest)
    _emit(cfg, "decompose_report.txt", "decompose", [r.line() for r in rows])
    return _finish(rows)


def cmd_frameop(cfg: RunConfig) -> int:
    """Check the frame operator and its inverse against the dual Gramian."""
    gens = build_generators(cfg)
    tol = _float(cfg.param("frameop", "tol", "1e-3"), "tol")
    tsp_tol = _float(cfg.param("frameop", "tsp_tol", str(TSP_TOL)), "tsp_tol")
    basis = decompose(gens, cfg.eps_rank, cfg.eps_support)
    S = frame_operator(gens, cfg.kmax, basis)
    res = verify_tsp(S, cfg.spec, seed=cfg.seed)
    rows = [_row("frameop-tsp", res, 0.0, tsp_tol)]
    RS = extract_range_operator(S, basis, check_tsp=False)
    fg = fiber_gram(gens, cfg.eps_rank)
    dual = FiberOperatorField(cfg.spec, RS.basis, fg.dual_apply(RS.basis), RS.active, "G~")
    d = field_distance(RS, dual)
    rows.append(_row("thm5.2", d, 0.0, tol))
    artifacts.dump_range_field(cfg.out / "range_S.twrf", RS)
    Si = inverse_frame_operator(gens, cfg.kmax, basis, eps_rank=cfg.eps_rank)
    RSi = extract_range_operator(Si, basis, check_tsp=False)
    pinv = FiberOperatorField(cfg.spec, RS.basis, fg.pinv_apply(RS.basis), RS.active, "pinv(G~)")
    rows.append(_row("inverse-pinv", field_distance(RSi, pinv), 0.0, tol))
    artifacts.dump_range_field(cfg.out / "range_Sinv.twrf", RSi)
    worst = 0.0
    for f in probes(S, cfg.spec, 3, cfg.seed):
        worst = max(worst, norm(S(Si(f)) - f) / norm(f))
    rows.append(_row("inverse-round-trip", worst, 0.0, tol))
    _emit(cfg, "frameop_report.txt", "frameop", [r.line() for r in rows])
    return _finish(rows)


def select_operator(cfg: RunConfig, spec_text: str, basis: GeneratorSet | None,
                    gens: GeneratorSet | None):
    text = spec_text.strip()
    if text == "identity":
        return identity_operator(basis=basis)
    if text.startswith("scale:"):
        return scaled_identity(_float(text[6:], "scale"), basis)
    if text.startswith("mult:"):
        return multiplication_operator(parse_multiplier(text[5:], cfg.spec), basis, text)
    if text == "frameop":
        if gens is None:
            raise ConfigError("operator 'frameop' needs generators")
        return frame_operator(gens, cfg.kmax, basis)
    if text.startswith("matrix:"):
        if basis is None:
            raise ConfigError("operator 'matrix:' needs generators to define the basis")
        path = Path(text[7:].strip())
        if not path.is_file():
            raise ConfigError(f"matrix file {path} does not exist")
        try:
            M = np.load(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        tb = TranslateBasis(basis, cfg.kmax)
        if M.shape != (tb.size, tb.size):
            raise ConfigError(f"matrix must be {tb.size}x{tb.size} for kmax={cfg.kmax}, got {M.shape}")
        return tb.operator(M, text)
    raise ConfigError(f"unknown operator {text!r}; use identity, scale:<c>, mult:<expr>, frameop or matrix:<path>")


def cmd_verify_tsp(cfg: RunConfig) -> int:
    """Test an operator for commuting with twisted translations."""
    gens = build_generators(cfg, required=False)
    basis = decompose(gens, cfg.eps_rank, cfg.eps_support) if gens is not None else None
    U = select_operator(cfg, cfg.param("verify-tsp", "operator", "identity"), basis, gens)
    trials = _int(cfg.param("verify-tsp", "trials", "3"), "trials")
    pmax = _int(cfg.param("verify-tsp", "pmax", "2"), "pmax")
    tol = _float(cfg.param("verify-tsp", "tol", str(TSP_TOL)), "tol")
    if trials < 1 or not 1 <= pmax <= cfg.spec.L - 2:
        raise ConfigError("trials must be >= 1 and pmax in [1, L-2]")
    res = verify_tsp(U, cfg.spec, trials, pmax, cfg.seed)
    rows = [_row("tsp", res, 0.0, tol)]
    if res <= tol and basis is not None:
        rows += check_tsp_property_transfer(U, basis, cfg.kmax, cfg.seed, tsp_tol=tol)[1:]
    click.echo(f"residual={res:.3e}")
    _emit(cfg, "tsp_report.txt", "verify-tsp", [r.line() for r in rows])
    return _finish(rows)


def cmd_demo_mult(cfg: RunConfig) -> int:
    """Tabulate the range operator of a multiplication operator."""
    spec = cfg.spec
    if spec.n != 1:
        raise ConfigError("demo-mult is defined for n = 1")
    symbol = cfg.param("demo-mult", "symbol", "exp(2*pi*i*y)")
    if "x" in free_names(symbol):
        raise ConfigError("demo-mult symbols may depend on y only")
    tol = _float(cfg.param("demo-mult", "tol", "1e-6"), "tol")
    gens = build_generators(cfg, required=False)
    if gens is None:
        gens = GeneratorSet.of(parse_generator("gaussian(0,0,1)", spec, "g"))
    basis = decompose(gens, cfg.eps_rank, cfg.eps_support)
    phi = parse_multiplier(symbol, spec)
    R = extract_range_operator(multiplication_operator(phi, basis, f"mult:{symbol}"), basis,
                               seed=cfg.seed)
    # the range operator multiplies fibers by m(xi, eta); estimate m by least
    # squares over xi' and the basis columns
    T, F, S = R.basis.shape
    q = R.basis.reshape(spec.M, spec.P, F, S)
    y = R.images.reshape(spec.M, spec.P, F, S)
    num = np.einsum("abfs,abfs->af", q.conj(), y)
    den = np.einsum("abfs,abfs->af", q.conj(), q).real
    mask = den > 1e-12 * den.max()
    table = np.where(mask, num / np.where(mask, den, 1.0), 0.0)
    xi = np.arange(spec.M) / spec.M
    eta = spec.axis()
    expected = np.asarray(parse_multiplier(symbol, GridSpec(1, spec.L, spec.N)).values[0, :])
    # g(eta - xi): eta - xi = (c - a)/N lies on the y-grid when inside the box
    c_idx = np.arange(F)[None, :] - np.arange(spec.M)[:, None]
    inside = c_idx >= 0
    exp_tab = np.where(inside, expected[np.clip(c_idx, 0, F - 1)], 0.0)
    use = mask & inside
    dev = float(np.abs(table - exp_tab)[use].max(initial=0.0))
    artifacts.write_kernel_csv(cfg.out / "demo_mult.csv", spec, table, xi, eta, use)
    artifacts.dump_range_field(cfg.out / "range_mult.twrf", R)
    rows = [_row("mult-symbol", dev, 0.0, tol)]
    if np.allclose(np.abs(expected), 1.0, atol=1e-12):
        rows.append(_row("unitary", unitary_gap(R), 0.0, 1e-8))
    _emit(cfg, "demo_mult_report.txt", "demo-mult", [r.line() for r in rows])
    return _finish(rows)


HANDLERS = {
    "analyze": cmd_analyze, "parsevalize": cmd_parsevalize, "decompose": cmd_decompose,
    "frameop": cmd_frameop, "verify-tsp": cmd_verify_tsp, "demo-mult": cmd_demo_mult,
}


# --------------------------------------------------------------------------
# click wiring


def _common(fn):
    opts = [
        click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
                     help="INI run configuration."),
        click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory."),
        click.option("--seed", type=int, default=None, help="RNG seed (default 42)."),
        click.option("--kmax", type=int, default=None, help="Lattice truncation (default 6)."),
        click.option("--grid-n", "grid_n", type=int, default=None, help="Samples per unit length N."),
        click.option("--grid-l", "grid_l", type=int, default=None, help="Box half-width L."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Twisted shift-invariant spaces: transforms, frames and range operators."""


def _register(name: str):
    handler = HANDLERS[name]

    @cli.command(name, help=(handler.__doc__ or f"Run {name}."))
    @_common
    def command(config, out, seed, kmax, grid_n, grid_l):
        cfg = load_config(config, seed=seed, kmax=kmax, grid_n=grid_n, grid_l=grid_l, out=out)
        return handler(cfg)

    return command


for _name in COMMANDS:
    _register(_name)


def main(argv: list[str] | None = None) -> int:
    try:
        rc = cli.main(args=argv, prog_name="twistframe", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_CONFIG
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_NUMERIC
    except Exception as exc:  # every other failure is numerical by contract
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_NUMERIC
    return rc if isinstance(rc, int) else EXIT_OK


def entry() -> None:
    sys.exit(main())
