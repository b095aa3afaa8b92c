"""Command-line harness: dataset generation, runs, comparisons, bound tables, checks.

Exit codes: 0 success, 1 usage error, 2 runtime failure.  Output files are
written atomically (temp file, then rename) under the output directory,
which defaults to $ADASIZE_OUT or the working directory.  A flat
`key = value` config file may supply any flag's default; explicit flags
win.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import os
import sys
from importlib import metadata
from pathlib import Path


from . import bench, data, driver, erm, schedule, verify
from .driver import RunConfig
from .erm import RiskSpec
from .schedule import WstarEstimate


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        raise UsageError(message)


def _version() -> str:
    try:
        return metadata.version("adasize")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "0.0.0+unpackaged"


def _parse_config_file(path: str) -> dict:
    values: dict[str, object] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        val = val.strip()
        if val.lower() in ("true", "false"):
            values[key] = val.lower() == "true"
            continue
        for conv in (int, float):
            try:
                values[key] = conv(val)
                break
            except ValueError:
                continue
        else:
            values[key] = val
    return values


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--loss", choices=erm.LOSSES, default="logistic")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--m-mode", choices=("paper", "tight"), default="paper",
                   help="smoothness constant: unit (normalized data) or tight per-loss")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="sparse text file (label idx:val ...)")
    p.add_argument("--label-map", default=None,
                   help="raw-label mapping like '0:-1,8:1' for non-binary raw labels")
    p.add_argument("--gen", default=None, metavar="N,DIM,SPARSITY",
                   help="generate synthetic data instead of reading a file")
    p.add_argument("--no-normalize", action="store_true",
                   help="skip unit-norm scaling of samples")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("gd", "agd", "svrg"), default="agd")
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--m0", type=int, default=400)
    p.add_argument("--N", type=int, default=0, help="training-set size (0: all samples)")
    p.add_argument("--budget", choices=("threshold", "theory"), default="threshold")
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--pass-cap", type=int, default=100)
    p.add_argument("--wstar", type=float, default=0.0,
                   help="||w*||^2 used inside the theoretical iteration counts")


def build_parser(file_defaults: dict | None = None) -> _Parser:
    parser = _Parser(prog="adasize",
                     description="adaptive sample-size first-order methods for regularized ERM")
    parser.add_argument("--config", help="flat key = value defaults file")
    sub = parser.add_subparsers(dest="command")

    common: list[argparse.ArgumentParser] = []

    def subparser(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key = value defaults file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output directory (default $ADASIZE_OUT or .)")
        common.append(p)
        return p

    p_gen = subparser("gen", "generate a synthetic dataset file")
    p_gen.add_argument("--gen", required=True, metavar="N,DIM,SPARSITY")
    p_gen.add_argument("--normalize", action="store_true")

    p_run = subparser("run", "run one method and write its trace CSV")
    _add_data_flags(p_run)
    _add_spec_flags(p_run)
    _add_run_flags(p_run)

    p_cmp = subparser("compare", "run gd/agd/svrg, fixed and adaptive, and summarize")
    _add_data_flags(p_cmp)
    _add_spec_flags(p_cmp)
    _add_run_flags(p_cmp)

    p_bounds = subparser("bounds", "print the per-stage plan table and complexity totals")
    p_bounds.add_argument("--N", type=int, required=True)
    p_bounds.add_argument("--m0", type=int, required=True)
    p_bounds.add_argument("--alpha", type=float, default=0.5)
    p_bounds.add_argument("--c", type=float, default=1.0)
    p_bounds.add_argument("--gamma", type=float, default=1.0)
    p_bounds.add_argument("--M", type=float, default=1.0)
    p_bounds.add_argument("--wstar", type=float, default=0.0)
    p_bounds.add_argument("--csv", default=None, help="also write the table as CSV here")

    p_ver = subparser("verify", "run the empirical check suite and emit report lines")
    _add_data_flags(p_ver)
    _add_spec_flags(p_ver)
    p_ver.add_argument("--N", type=int, default=0, help="base-set size (0: all samples)")
    p_ver.add_argument("--m0", type=int, default=256)
    p_ver.add_argument("--draws", type=int, default=200)
    p_ver.add_argument("--trials", type=int, default=100)
    p_ver.add_argument("--checks", default="all",
                       help="comma list: fd,svrg_direction,lemma1,lemma2,proposition1,theorem")

    if file_defaults:
        for p in common:
            known = {a.dest for a in p._actions}
            p.set_defaults(**{k: v for k, v in file_defaults.items() if k in known})
    return parser


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("ADASIZE_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _parse_gen(spec_str: str):
    try:
        n_s, dim_s, sp_s = spec_str.split(",")
        return int(n_s), int(dim_s), float(sp_s)
    except ValueError:
        raise UsageError(f"--gen expects N,DIM,SPARSITY, got {spec_str!r}") from None


def _parse_label_map(text: str | None) -> dict | None:
    if not text:
        return None
    out = {}
    for pair in text.split(","):
        raw, _, mapped = pair.partition(":")
        if not mapped:
            raise UsageError(f"--label-map entries look like raw:mapped, got {pair!r}")
        out[float(raw)] = float(mapped)
    return out


def _load_dataset(args) -> tuple[data.Dataset, str]:
    """Dataset plus a content hash for the manifest."""
    if args.dataset and args.gen:
        raise UsageError("give either --dataset or --gen, not both")
    if args.dataset:
        blob = Path(args.dataset).read_bytes()
        ds = data.parse_sparse_text(blob, label_map=_parse_label_map(args.label_map),
                                    name=Path(args.dataset).stem)
        digest = hashlib.sha256(blob).hexdigest()
    elif args.gen:
        n, dim, sparsity = _parse_gen(args.gen)
        ds, _ = data.generate_synthetic(n, dim, sparsity, seed=args.seed,
                                        name=f"synthetic_{n}x{dim}")
        digest = hashlib.sha256(ds.to_sparse_text().encode()).hexdigest()
    else:
        raise UsageError("a dataset is required: pass --dataset FILE or --gen N,DIM,SPARSITY")
    if not args.no_normalize:
        ds = data.normalize(ds)
    return ds, digest


def _prepare_experiment(args):
    ds, digest = _load_dataset(args)
    N = args.N or ds.n_samples
    if N > ds.n_samples:
        raise UsageError(f"--N {N} exceeds dataset size {ds.n_samples}")
    train, test = data.shuffle_and_split(ds, N, seed=args.seed)
    m = 1.0 if args.m_mode == "paper" else erm.smoothness_constant(args.loss, train, "tight")
    spec = RiskSpec(loss=args.loss, c=args.c, alpha=args.alpha, gamma=args.gamma, M=m)
    return train, test, spec, N, digest


def _manifest_text(args, digest: str, outputs: list[str], extra: dict | None = None) -> str:
    lines = [f"adasize_version = {_version()}"]
    skip = {"command", "config", "out"}
    for key in sorted(vars(args)):
        if key in skip:
            continue
        lines.append(f"{key} = {getattr(args, key)}")
    lines.append(f"dataset_sha256 = {digest}")
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {val}")
    for name in outputs:
        lines.append(f"output = {name}")
    return "\n".join(lines) + "\n"


def _run_config_from_args(args, N: int, adaptive: bool, method: str) -> RunConfig:
    return RunConfig(
        method=method,
        adaptive=adaptive,
        m0=min(args.m0, N),
        N=N,
        budget_mode="until_threshold" if args.budget == "threshold" else "theoretical_s_n",
        seed=args.seed,
        eval_every=args.eval_every,
        pass_cap=args.pass_cap,
        wstar_norm_sq=args.wstar,
    )


def _trace_name(method: str, adaptive: bool, seed: int) -> str:
    return f"trace_{method}_{'ada' if adaptive else 'fix'}_seed{seed}.csv"


def cmd_gen(args) -> int:
    n, dim, sparsity = _parse_gen(args.gen)
    ds, _ = data.generate_synthetic(n, dim, sparsity, seed=args.seed,
                                    name=f"synthetic_{n}x{dim}")
    if args.normalize:
        ds = data.normalize(ds)
    out = _out_dir(args) / f"synthetic_{n}x{dim}_seed{args.seed}.svm"
    _write_atomic(out, ds.to_sparse_text())
    print(out)
    return 0


def cmd_run(args) -> int:
    train, test, spec, N, digest = _prepare_experiment(args)
    cfg = _run_config_from_args(args, N, args.adaptive, args.method)
    if cfg.adaptive:
        _, trace, _ = driver.adaptive_run(cfg, spec, train, test if test.n_samples else None)
    else:
        _, trace = driver.fixed_run(cfg, spec, train, test if test.n_samples else None)
    ref = bench.reference_optimum(spec, train.prefix(N))
    out_dir = _out_dir(args)
    trace_file = _trace_name(args.method, cfg.adaptive, args.seed)
    _write_atomic(out_dir / trace_file, bench.trace_csv_text(trace, ref))
    manifest = _manifest_text(args, digest, [trace_file], {"spec_M": spec.M})
    _write_atomic(out_dir / f"manifest_run_seed{args.seed}.txt", manifest)
    print(out_dir / trace_file)
    return 0


def cmd_compare(args) -> int:
    train, test, spec, N, digest = _prepare_experiment(args)
    configs = [
        _run_config_from_args(args, N, adaptive, method)
        for method in ("gd", "agd", "svrg")
        for adaptive in (False, True)
    ]
    rows, traces = bench.compare_matrix(configs, spec, train,
                                        test if test.n_samples else None,
                                        return_traces=True)
    ref = bench.reference_optimum(spec, train.prefix(N))
    out_dir = _out_dir(args)
    outputs = []
    for cfg, trace in traces:
        if trace is None:
            continue
        name = _trace_name(cfg.method, cfg.adaptive, cfg.seed)
        _write_atomic(out_dir / name, bench.trace_csv_text(trace, ref))
        outputs.append(name)
    summary_io = io.StringIO()
    bench.write_summary_csv(rows, summary_io)
    _write_atomic(out_dir / f"summary_seed{args.seed}.csv", summary_io.getvalue())
    outputs.append(f"summary_seed{args.seed}.csv")
    manifest = _manifest_text(args, digest, outputs, {"spec_M": spec.M})
    _write_atomic(out_dir / f"manifest_compare_seed{args.seed}.txt", manifest)
    print(bench.format_summary_table(rows), end="")
    return 0


def cmd_bounds(args) -> int:
    spec = RiskSpec(loss="logistic", c=args.c, alpha=args.alpha, gamma=args.gamma, M=args.M)
    wstar = WstarEstimate(args.wstar, "user" if args.wstar else "zero_default")
    plans = schedule.build_stage_plans(spec, args.N, args.m0, wstar)
    headers = ["n", "V_n", "threshold", "agd_eta", "agd_beta", "svrg_q", "svrg_eta",
               "svrg_rho", "s_generic", "s_agd", "s_svrg"]
    rows = [headers]
    for p in plans:
        rows.append([
            str(p.n), f"{p.accuracy:.6g}", f"{p.stop_threshold:.6g}", f"{p.agd_eta:.6g}",
            f"{p.agd_beta:.6g}", str(p.svrg_q), f"{p.svrg_eta:.6g}", f"{p.svrg_rho:.6g}",
            str(p.iters_generic), str(p.iters_agd), str(p.iters_svrg),
        ])
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    for r in rows:
        print("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
    ratio = args.N / args.m0
    if args.N % args.m0 == 0 and (args.N // args.m0) & (args.N // args.m0 - 1) == 0:
        total_agd = schedule.total_complexity_agd(spec, args.N, args.m0, wstar)
        print(f"total_agd_grad_evals = {total_agd:.6g}")
    else:
        print(f"total_agd_grad_evals = n/a (N/m0 = {ratio:g} is not a power of two; "
              "the run itself clamps the last stage to N)")
    total_svrg = schedule.total_complexity_svrg(spec, args.N, wstar)
    print(f"total_svrg_grad_evals = {total_svrg:.6g}")
    if args.csv:
        out = io.StringIO()
        out.write(",".join(headers) + "\n")
        for r in rows[1:]:
            out.write(",".join(r) + "\n")
        _write_atomic(Path(args.csv), out.getvalue())
    return 0


def cmd_verify(args) -> int:
    if not args.dataset and not args.gen:
        args.gen = "8192,20,1.0"
    train, _, spec, N, digest = _prepare_experiment(args)
    selected = args.checks.split(",") if args.checks != "all" else [
        "fd", "svrg_direction", "lemma1", "lemma2", "proposition1", "theorem"]
    m0 = min(args.m0, N // 4 if N >= 4 else N)
    reports: list[verify.CheckReport] = []
    small = train.prefix(min(128, N))
    if "fd" in selected:
        reports.append(verify.fd_gradient_check(spec, small, args.trials, seed=args.seed))
        sq = RiskSpec(loss="squared", c=spec.c, alpha=spec.alpha, gamma=spec.gamma, M=spec.M)
        reports.append(verify.fd_gradient_check(sq, small, args.trials, seed=args.seed,
                                                rel_tol=1e-9))
    if "svrg_direction" in selected:
        reports.append(verify.svrg_direction_check(spec, train.prefix(min(17, N)),
                                                   args.trials, seed=args.seed))
    if "lemma1" in selected:
        reports.append(verify.lemma1_check(spec, train, m0, 2 * m0,
                                           max(args.draws, 100), seed=args.seed))
    if "lemma2" in selected:
        reports.append(verify.lemma2_check(spec, train, N // 4, args.draws, seed=args.seed))
    if "proposition1" in selected:
        reports.append(verify.proposition1_check(spec, train, m0, args.draws, seed=args.seed))
    if "theorem" in selected:
        for method in ("agd", "svrg"):
            reports.append(verify.theorem_sn_sufficiency_check(
                method, spec, train, m0, args.draws, seed=args.seed))
    lines = ["name,trials,violations,worst_margin,passed"]
    for rep in reports:
        lines.append(rep.csv_line())
        print(rep.csv_line())
    out_dir = _out_dir(args)
    _write_atomic(out_dir / f"checks_seed{args.seed}.csv", "\n".join(lines) + "\n")
    manifest = _manifest_text(args, digest, [f"checks_seed{args.seed}.csv"])
    _write_atomic(out_dir / f"manifest_verify_seed{args.seed}.txt", manifest)
    return 0 if all(r.passed for r in reports) else 2


_COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "compare": cmd_compare,
    "bounds": cmd_bounds,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    file_defaults = None
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1] if argv.index("--config") + 1 < len(argv) \
            else None
        if cfg_path is None:
            print("error: --config needs a file path", file=sys.stderr)
            return 1
        try:
            file_defaults = _parse_config_file(cfg_path)
        except (OSError, UsageError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    parser = build_parser(file_defaults)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
