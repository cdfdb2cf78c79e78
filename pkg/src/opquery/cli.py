"""Command-line drivers for the query studies.

Each subcommand runs one experiment end to end, writes its table or report
to a file, prints a one-line summary to stdout, and exits 0 on success, 1
when a certificate fails, 2 on a usage error. Outputs are byte-identical
across runs with the same flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArtifactError,
    CertificateFailure,
    ConvergenceFailure,
    DimensionMismatch,
    EmptyTail,
    InsufficientData,
    InvalidRange,
    NoComplement,
    PecletViolation,
    RankDeficient,
    SingularOperator,
    Underresolved,
    ZeroEigenvalue,
    ZeroMatrix,
)
from .linalg import Rng, Seed, qr_factor, spectral_norm, svd
from .pde import (
    Coefficients,
    Grid,
    assemble_1d,
    assemble_2d,
    greens_exact_grid,
    sine_basis_1d,
    sine_basis_2d,
)
from .sketch import (
    align_rotation,
    construct_extremal_pair,
    diameter_upper_bound,
    membership_check,
    random_instance,
    toeplitz_from_two_queries,
    toeplitz_matrix,
)
from .study import (
    bound_certificate,
    build_table,
    greens_error_study,
    greens_kernel_sample,
    perturbation_sweep,
    query_forward,
    rate_fit,
    sweep_fit,
)

DEFAULT_N_LIST_1D = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 600)
DEFAULT_N_LIST_2D = (1, 2, 4, 8, 16, 32, 64, 128, 256, 299)
DEFAULT_GREENS_N_LIST = (12, 25, 50, 100, 200)
DEFAULT_SWEEP_C = tuple(float(c) for c in range(0, 21, 2))

# which module's work a command fronts, for error provenance
_MODULE_OF = {
    "sketch-bounds": "sketch",
    "sketch-witness": "sketch",
    "toeplitz-demo": "sketch",
    "converge-1d": "study",
    "converge-2d": "study",
    "lastar": "study",
    "greens-error": "study",
    "perturb-sweep": "study",
    "selfcheck": "cli",
}

_USAGE_ERRORS = (
    InvalidRange,
    DimensionMismatch,
    Underresolved,
    PecletViolation,
    SingularOperator,
    ZeroEigenvalue,
    EmptyTail,
    InsufficientData,
    ZeroMatrix,
    NoComplement,
    RankDeficient,
)


@dataclass(frozen=True)
class RunConfig:
    """One fully resolved invocation: what to run and where to write."""

    command: str
    seed: int = 0
    grid_points: int = 0
    n_queries: int = 0
    n_list: tuple = ()
    coeffs: Coefficients = Coefficients(0.0, 0.0, 0.0)
    c_values: tuple = ()
    out_path: str = ""
    format: str = "csv"
    threads: int = 1
    n_fixed: int = 0
    kernel_out: str | None = None
    size: int = 0
    sketch_cols: int = 0
    rank: int = 0
    delta: float = 0.0
    epsilon: float = 0.0


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_json(path: str, payload: dict) -> None:
    _write_text(path, json.dumps(payload, indent=2) + "\n")


def _table_artifact(cfg: RunConfig, table) -> str:
    if cfg.format == "json":
        _write_json(cfg.out_path, {"command": cfg.command, "rows": table.to_rows()})
    else:
        _write_text(cfg.out_path, table.to_csv_text())
    return cfg.out_path


def _convergence_run(cfg: RunConfig, dim: int):
    grid = Grid(dim, cfg.grid_points)
    if dim == 1:
        basis = sine_basis_1d(cfg.n_queries, grid)
        op = assemble_1d(cfg.coeffs.nu, cfg.coeffs.c, cfg.coeffs.r, grid)
    else:
        if len(cfg.coeffs.c) != 2:
            raise InvalidRange("--c expects two comma-separated values in 2D")
        basis = sine_basis_2d(cfg.n_queries, grid)
        op = assemble_2d(cfg.coeffs.nu, cfg.coeffs.c, cfg.coeffs.r, grid)
    resp = query_forward(op, basis, cfg.n_queries, cfg.threads)
    table = build_table(resp, cfg.n_list)
    return table, bound_certificate(table)


def _rate_label(table) -> str:
    try:
        slope, r2 = rate_fit(table, int(table.n[0]), int(table.n[-1]))
    except InsufficientData:
        return "rate_slope=na"
    return f"rate_slope={slope:.3f} r2={r2:.4f}"


def _cmd_converge(cfg: RunConfig, dim: int) -> int:
    table, report = _convergence_run(cfg, dim)
    out = _table_artifact(cfg, table)
    verdict = "pass" if report.passed else "FAIL"
    print(
        f"rows={table.n.shape[0]} m_norm_final≈{table.m_norm_final:.1f} "
        f"{_rate_label(table)} certificate={verdict} wrote {out}"
    )
    return 0 if report.passed else 1


def _cmd_lastar(cfg: RunConfig) -> int:
    table, report = _convergence_run(cfg, 1)
    out = _table_artifact(cfg, table)
    verdict = "pass" if report.passed else "FAIL"
    print(
        f"m_norm_final={table.m_norm_final:.17g} rows={table.n.shape[0]} "
        f"certificate={verdict} wrote {out}"
    )
    return 0 if report.passed else 1


def _cmd_greens_error(cfg: RunConfig) -> int:
    grid = Grid(1, cfg.grid_points)
    c = cfg.c_values[0]
    rows = greens_error_study(c, cfg.n_list, grid)
    if cfg.format == "json":
        _write_json(
            cfg.out_path,
            {
                "command": cfg.command,
                "rows": [{"n": n, "rel_l2_error": e} for n, e in rows],
            },
        )
    else:
        lines = ["n,rel_l2_error"]
        lines += [f"{n},{e:.17g}" for n, e in rows]
        _write_text(cfg.out_path, "\n".join(lines) + "\n")
    if cfg.kernel_out is not None:
        sample = greens_kernel_sample(c, rows[-1][0], grid)
        stride = max(1, -(-cfg.grid_points // 201))
        idx = np.arange(0, cfg.grid_points, stride)
        xs = grid.axis_nodes()[idx]
        approx = sample.values[np.ix_(idx, idx)]
        exact = greens_exact_grid(c, xs, xs)
        lines = ["x,y,g_approx,g_exact"]
        for i in range(xs.size):
            for j in range(xs.size):
                lines.append(
                    f"{xs[i]:.17g},{xs[j]:.17g},{approx[i, j]:.17g},{exact[i, j]:.17g}"
                )
        _write_text(cfg.kernel_out, "\n".join(lines) + "\n")
    n_last, err_last = rows[-1]
    print(
        f"rows={len(rows)} final_rel_err={err_last:.6e} n={n_last} wrote {cfg.out_path}"
    )
    return 0


def _cmd_perturb_sweep(cfg: RunConfig) -> int:
    grid = Grid(1, cfg.grid_points)
    sweep = perturbation_sweep(cfg.c_values, cfg.n_fixed, cfg.n_queries, grid, cfg.threads)
    if cfg.format == "json":
        _write_json(cfg.out_path, {"command": cfg.command, "rows": sweep.to_rows()})
    else:
        _write_text(cfg.out_path, sweep.to_csv_text())
    slope, r2 = sweep_fit(sweep)
    rising = bool(np.all(np.diff(sweep.err_at_n) > 0.0))
    print(
        f"rows={sweep.c_mag.shape[0]} slope={slope:.6g} r2={r2:.4f} "
        f"increasing={'yes' if rising else 'no'} wrote {cfg.out_path}"
    )
    return 0


def _cmd_sketch_bounds(cfg: RunConfig) -> int:
    inst = random_instance(
        cfg.size, cfg.sketch_cols, cfg.rank, cfg.delta, cfg.epsilon, Seed(cfg.seed)
    )
    report = diameter_upper_bound(inst)
    payload = {
        "command": cfg.command,
        "n": cfg.size,
        "s": cfg.sketch_cols,
        "k": cfg.rank,
        "delta": cfg.delta,
        "epsilon": cfg.epsilon,
        "seed": cfg.seed,
    }
    payload.update(report.to_dict())
    _write_json(cfg.out_path, payload)
    upper = "none" if report.upper is None else f"{report.upper:.6g}"
    precondition = "ok" if report.upper is not None else "violated"
    print(
        f"lower={report.lower:.6g} upper={upper} precondition={precondition} "
        f"wrote {cfg.out_path}"
    )
    return 0


def _cmd_sketch_witness(cfg: RunConfig) -> int:
    inst = random_instance(
        cfg.size, cfg.sketch_cols, cfg.rank, cfg.delta, cfg.epsilon, Seed(cfg.seed)
    )
    bounds = diameter_upper_bound(inst)
    b_plus, b_minus = construct_extremal_pair(inst, Seed(cfg.seed))
    separation = float(spectral_norm(b_plus - b_minus)) if cfg.delta < cfg.epsilon else 0.0
    member_plus = membership_check(b_plus, inst)
    member_minus = membership_check(b_minus, inst)
    members_ok = member_plus.in_set and member_minus.in_set
    above = separation >= bounds.lower - 1e-9
    below = bounds.upper is None or separation <= bounds.upper + 1e-9
    passed = bool(members_ok and above and below)
    payload = {
        "command": cfg.command,
        "n": cfg.size,
        "s": cfg.sketch_cols,
        "k": cfg.rank,
        "delta": cfg.delta,
        "epsilon": cfg.epsilon,
        "seed": cfg.seed,
        "separation": separation,
        "lower": bounds.lower,
        "upper": bounds.upper,
        "member_plus": member_plus.to_dict(),
        "member_minus": member_minus.to_dict(),
        "certificate": "pass" if passed else "fail",
    }
    _write_json(cfg.out_path, payload)
    upper = "none" if bounds.upper is None else f"{bounds.upper:.6g}"
    print(
        f"separation={separation:.6g} lower={bounds.lower:.6g} upper={upper} "
        f"members={'ok' if members_ok else 'BAD'} "
        f"certificate={'pass' if passed else 'FAIL'} wrote {cfg.out_path}"
    )
    return 0 if passed else 1


def _cmd_toeplitz_demo(cfg: RunConfig) -> int:
    rng = Rng(Seed(cfg.seed))
    col = rng.normals(cfg.size, 1)[:, 0]
    row = rng.normals(cfg.size, 1)[:, 0]
    row[0] = col[0]
    hidden = toeplitz_matrix(col, row)
    calls = 0

    def oracle(v):
        nonlocal calls
        calls += 1
        return hidden @ v

    recovered = toeplitz_from_two_queries(oracle, cfg.size)
    max_abs_err = float(np.max(np.abs(recovered - hidden)))
    exact = max_abs_err == 0.0 and calls == 2
    if cfg.out_path:
        _write_json(
            cfg.out_path,
            {
                "command": cfg.command,
                "n": cfg.size,
                "seed": cfg.seed,
                "queries": calls,
                "max_abs_err": max_abs_err,
                "exact": exact,
            },
        )
    print(f"queries={calls} max_abs_err={max_abs_err:g}")
    return 0 if exact else 1


def _suite_lemma1(seed: int, count: int = 100) -> tuple[int, float]:
    """Alignment equality ‖V − UQ₀‖₂² = 2(1 − σ_min(UᵀV)) on random frames."""
    rng = Rng(Seed(seed))
    passed = 0
    worst = 0.0
    for _ in range(count):
        n = 2 + int(rng.uniform() * 19.0)
        k = 1 + int(rng.uniform() * n) if n > 1 else 1
        k = min(k, n)
        u, _ = qr_factor(rng.normals(n, k))
        v, _ = qr_factor(rng.normals(n, k))
        q0 = align_rotation(u, v)
        # Jacobi SVD keeps the equality check at rounding level; the power
        # iteration's 1e-10 stop rule would eat the whole tolerance
        lhs = float(svd(v - u @ q0).s[0]) ** 2
        rhs = 2.0 * (1.0 - float(svd(u.T @ v).s[-1]))
        dev = abs(lhs - rhs)
        worst = max(worst, dev)
        if dev <= 1e-10:
            passed += 1
    return passed, worst


def _suite_truncated(seed: int, count: int = 200) -> tuple[int, float]:
    """Tail-block bound ‖Y_{:,>n}‖₂·λₙ₊₁ ≤ ‖Y·diag λ‖₂ on random matrices."""
    rng = Rng(Seed(seed))
    passed = 0
    worst = 0.0
    for _ in range(count):
        m = 3 + int(rng.uniform() * 10.0)
        cols = 2 + int(rng.uniform() * 7.0)
        y = rng.normals(m, cols)
        lam = np.cumsum([0.1 + rng.uniform() for _ in range(cols)]) + 0.1
        weighted = float(svd(y * lam).s[0])
        ok = True
        for n in range(1, cols):
            ratio = float(svd(y[:, n:]).s[0]) * lam[n] / weighted
            worst = max(worst, ratio)
            if ratio > 1.0 + 1e-12:
                ok = False
        if ok:
            passed += 1
    return passed, worst


def _suite_sandwich(seed: int, count: int = 50) -> tuple[int, float]:
    """Witness pairs stay inside the ambiguity set and between the bounds."""
    rng = Rng(Seed(seed))
    passed = 0
    attempts = 0
    produced = 0
    worst = 0.0
    while produced < count and attempts < 40 * count:
        attempts += 1
        n = 4 + int(rng.uniform() * 5.0)
        k = 1 + int(rng.uniform() * 3.0)
        k = min(k, n - 2)
        s = k + int(rng.uniform() * (n - k - 1))
        delta = rng.uniform() * 0.1
        epsilon = delta + 0.05 + rng.uniform() * 0.25
        inst = random_instance(n, s, k, delta, epsilon, Seed(seed + attempts))
        bounds = diameter_upper_bound(inst)
        if bounds.upper is None:
            continue
        produced += 1
        b_plus, b_minus = construct_extremal_pair(inst, Seed(0))
        sep = float(spectral_norm(b_plus - b_minus))
        member_ok = (
            membership_check(b_plus, inst).in_set
            and membership_check(b_minus, inst).in_set
        )
        low_gap = bounds.lower - sep
        high_gap = sep - bounds.upper
        worst = max(worst, low_gap, high_gap)
        if member_ok and low_gap <= 1e-9 and high_gap <= 1e-9:
            passed += 1
    return passed, worst


def _cmd_selfcheck(cfg: RunConfig) -> int:
    lemma_pass, lemma_worst = _suite_lemma1(cfg.seed)
    trunc_pass, trunc_worst = _suite_truncated(cfg.seed)
    sand_pass, sand_worst = _suite_sandwich(cfg.seed)
    all_ok = lemma_pass == 100 and trunc_pass == 200 and sand_pass == 50
    if cfg.out_path:
        _write_json(
            cfg.out_path,
            {
                "command": cfg.command,
                "seed": cfg.seed,
                "lemma1": {"passed": lemma_pass, "total": 100, "worst_dev": lemma_worst},
                "truncated": {"passed": trunc_pass, "total": 200, "worst_ratio": trunc_worst},
                "sandwich": {"passed": sand_pass, "total": 50, "worst_gap": sand_worst},
                "certificate": "pass" if all_ok else "fail",
            },
        )
    print(f"lemma1={lemma_pass}/100 truncated={trunc_pass}/200 sandwich={sand_pass}/50")
    return 0 if all_ok else 1


def run(config: RunConfig) -> int:
    """Execute one resolved invocation; returns the process exit status."""
    handlers = {
        "converge-1d": lambda cfg: _cmd_converge(cfg, 1),
        "converge-2d": lambda cfg: _cmd_converge(cfg, 2),
        "lastar": _cmd_lastar,
        "greens-error": _cmd_greens_error,
        "perturb-sweep": _cmd_perturb_sweep,
        "sketch-bounds": _cmd_sketch_bounds,
        "sketch-witness": _cmd_sketch_witness,
        "toeplitz-demo": _cmd_toeplitz_demo,
        "selfcheck": _cmd_selfcheck,
    }
    if config.command not in handlers:
        raise InvalidRange(f"unknown command {config.command!r}")
    return handlers[config.command](config)


def _int_list(flag: str):
    def parse(text: str) -> tuple:
        try:
            values = tuple(int(tok) for tok in text.split(",") if tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects comma-separated integers")
        if not values or any(v < 1 for v in values):
            raise argparse.ArgumentTypeError(f"{flag} expects positive integers")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise argparse.ArgumentTypeError(f"{flag} must be strictly ascending")
        return values

    return parse


def _float_list(flag: str):
    def parse(text: str) -> tuple:
        try:
            values = tuple(float(tok) for tok in text.split(",") if tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects comma-separated reals")
        if not values:
            raise argparse.ArgumentTypeError(f"{flag} expects at least one value")
        return values

    return parse


def _positive_int(flag: str):
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects an integer")
        if value < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be positive")
        return value

    return parse


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opquery",
        description="Operator recovery from forward queries: experiment drivers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, default_out):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=default_out)
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p1 = sub.add_parser("converge-1d", help="1D error/bound convergence table")
    p1.add_argument("--nu", type=float, default=0.25)
    p1.add_argument("--c", type=float, default=5.0)
    p1.add_argument("--r", type=float, default=1.0)
    p1.add_argument("--grid", type=_positive_int("--grid"), default=4000)
    p1.add_argument("--queries", type=_positive_int("--queries"), default=601)
    p1.add_argument("--n-list", type=_int_list("--n-list"), default=DEFAULT_N_LIST_1D)
    p1.add_argument("--threads", type=_positive_int("--threads"), default=1)
    add_common(p1, "converge-1d.csv")

    p2 = sub.add_parser("converge-2d", help="2D error/bound convergence table")
    p2.add_argument("--nu", type=float, default=1.0)
    p2.add_argument("--c", type=_float_list("--c"), default=(10.0, 5.0))
    p2.add_argument("--r", type=float, default=0.0)
    p2.add_argument("--grid", type=_positive_int("--grid"), default=96)
    p2.add_argument("--queries", type=_positive_int("--queries"), default=300)
    p2.add_argument("--n-list", type=_int_list("--n-list"), default=DEFAULT_N_LIST_2D)
    p2.add_argument("--threads", type=_positive_int("--threads"), default=1)
    add_common(p2, "converge-2d.csv")

    pl = sub.add_parser("lastar", help="certificate-constant estimate from queries")
    pl.add_argument("--nu", type=float, default=0.25)
    pl.add_argument("--c", type=float, default=5.0)
    pl.add_argument("--r", type=float, default=1.0)
    pl.add_argument("--grid", type=_positive_int("--grid"), default=4000)
    pl.add_argument("--queries", type=_positive_int("--queries"), default=601)
    pl.add_argument("--n-list", type=_int_list("--n-list"), default=DEFAULT_N_LIST_1D)
    pl.add_argument("--threads", type=_positive_int("--threads"), default=1)
    add_common(pl, "lastar.csv")

    pg = sub.add_parser("greens-error", help="kernel reconstruction error study")
    pg.add_argument("--c", type=float, default=0.0)
    pg.add_argument("--grid", type=_positive_int("--grid"), default=1000)
    pg.add_argument(
        "--n-list", type=_int_list("--n-list"), default=DEFAULT_GREENS_N_LIST
    )
    pg.add_argument("--kernel-out", default=None)
    add_common(pg, "greens-error.csv")

    ps = sub.add_parser("perturb-sweep", help="error growth under advection")
    ps.add_argument("--c-values", type=_float_list("--c-values"), default=DEFAULT_SWEEP_C)
    ps.add_argument("--n-fixed", type=_positive_int("--n-fixed"), default=100)
    ps.add_argument("--queries", type=_positive_int("--queries"), default=200)
    ps.add_argument("--grid", type=_positive_int("--grid"), default=800)
    ps.add_argument("--threads", type=_positive_int("--threads"), default=1)
    add_common(ps, "perturb-sweep.csv")

    for name, default_out in (
        ("sketch-bounds", "sketch-bounds.json"),
        ("sketch-witness", "sketch-witness.json"),
    ):
        pk = sub.add_parser(name, help="ambiguity-set diameter " + name.split("-")[1])
        pk.add_argument("--n", type=_positive_int("--n"), default=8)
        pk.add_argument("--s", type=_positive_int("--s"), default=6)
        pk.add_argument("--k", type=_positive_int("--k"), default=2)
        pk.add_argument("--delta", type=float, default=0.02)
        pk.add_argument("--epsilon", type=float, default=0.1)
        add_common(pk, default_out)

    pt = sub.add_parser("toeplitz-demo", help="two-query Toeplitz recovery")
    pt.add_argument("--n", type=_positive_int("--n"), default=50)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--out", default="")
    pt.add_argument("--format", choices=("csv", "json"), default="json")

    pc = sub.add_parser("selfcheck", help="brute-force invariant suites")
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--out", default="")
    pc.add_argument("--format", choices=("csv", "json"), default="json")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cmd = args.command
    if cmd in ("converge-1d", "lastar"):
        return RunConfig(
            command=cmd,
            seed=args.seed,
            grid_points=args.grid,
            n_queries=args.queries,
            n_list=args.n_list,
            coeffs=Coefficients(args.nu, args.c, args.r),
            out_path=args.out,
            format=args.format,
            threads=args.threads,
        )
    if cmd == "converge-2d":
        return RunConfig(
            command=cmd,
            seed=args.seed,
            grid_points=args.grid,
            n_queries=args.queries,
            n_list=args.n_list,
            coeffs=Coefficients(args.nu, tuple(args.c), args.r),
            out_path=args.out,
            format=args.format,
            threads=args.threads,
        )
    if cmd == "greens-error":
        return RunConfig(
            command=cmd,
            seed=args.seed,
            grid_points=args.grid,
            n_list=args.n_list,
            c_values=(args.c,),
            out_path=args.out,
            format=args.format,
            kernel_out=args.kernel_out,
        )
    if cmd == "perturb-sweep":
        return RunConfig(
            command=cmd,
            seed=args.seed,
            grid_points=args.grid,
            n_queries=args.queries,
            n_fixed=args.n_fixed,
            c_values=args.c_values,
            out_path=args.out,
            format=args.format,
            threads=args.threads,
        )
    if cmd in ("sketch-bounds", "sketch-witness"):
        return RunConfig(
            command=cmd,
            seed=args.seed,
            size=args.n,
            sketch_cols=args.s,
            rank=args.k,
            delta=args.delta,
            epsilon=args.epsilon,
            out_path=args.out,
            format=args.format,
        )
    if cmd == "toeplitz-demo":
        return RunConfig(
            command=cmd, seed=args.seed, size=args.n, out_path=args.out, format=args.format
        )
    return RunConfig(command=cmd, seed=args.seed, out_path=args.out, format=args.format)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = _config_from_args(args)
    province = _MODULE_OF[cfg.command]
    try:
        return run(cfg)
    except _USAGE_ERRORS as exc:
        print(f"{province}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (CertificateFailure, ConvergenceFailure) as exc:
        print(f"{province}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ArtifactError as exc:
        print(f"{province}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cli: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
