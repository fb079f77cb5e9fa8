"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical or
degenerate-model error.
"""

from __future__ import annotations

import argparse
import configparser
import io
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .eg_moments import ConsistencyError
from .gof import (CovariateError, DegenerateNullError, fit_logistic_null, read_covariates,
                  test_dv_er, test_eg, test_her)
from .graph import GraphError, parse_node_count, read_edge_list, write_edge_list
from .her_moments import DimensionError
from .models import (Graphon, ModelError, ProbMatrix, RngSpec, read_graphon, read_prob_matrix,
                     sample_eg, sample_her, write_prob_matrix)
from .simlab import (DesignError, equivalence_csv, power_csv, qq_csv, run_power_study,
                     run_qq_study, run_size_equivalence)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------------
# output helpers


def atomic_write(path: Path, text: str):
    """Write via a temporary file in the same directory and rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(out: Path, files: dict[str, str]):
    """All outputs are rendered before any is written; each write is atomic."""
    for name, text in files.items():
        atomic_write(out / name, text)


def config_echo(command: str, settings: dict) -> str:
    cp = configparser.ConfigParser()
    cp[command] = {k: str(v) for k, v in settings.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from None


# ----------------------------------------------------------------------------
# study configs

_LIST_KEYS = {
    "power": {"n", "rho_star", "beta"},
    "simulate": {"n"},
    "qq": {"n", "exponent"},
}
_STUDY_KEYS = {
    "power": {"design", "n", "rho_star", "beta", "replicates", "seed", "alpha"},
    "simulate": {"n", "p", "replicates", "seed", "alpha"},
    "qq": {"model", "kind", "n", "exponent", "replicates", "rho_star", "seed", "repeat"},
}
_DEFAULTS = {
    "power": {"design": "her", "replicates": "500", "alpha": "0.05", "seed": "0"},
    "simulate": {"p": "0.5", "replicates": "500", "alpha": "0.05", "seed": "0"},
    "qq": {"model": "her", "kind": "vanish", "replicates": "500", "rho_star": "0.1",
           "seed": "0", "repeat": "0"},
}
_REQUIRED = {
    "power": {"n", "rho_star", "beta"},
    "simulate": {"n"},
    "qq": {"n", "exponent"},
}


def read_study_config(text: str, command: str) -> dict:
    """Flat ``key = value`` pairs, optionally under a ``[section]`` header.

    Lists are comma-separated. Unknown keys are reported all at once.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if not text.lstrip().startswith("["):
            text = "[study]\n" + text
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"config: {exc}") from None
    raw = dict(_DEFAULTS[command])
    for sec in cp.sections():
        raw.update(cp[sec])
    unknown = sorted(set(raw) - _STUDY_KEYS[command])
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
    missing = sorted(_REQUIRED[command] - set(raw))
    if missing:
        raise UsageError(f"missing config keys for {command}: {', '.join(missing)}")
    cfg = {}
    try:
        for k, v in raw.items():
            if k in _LIST_KEYS[command]:
                vals = [float(x) for x in v.split(",") if x.strip()]
                cfg[k] = [int(x) for x in vals] if k == "n" else vals
            elif k in ("replicates", "seed", "repeat"):
                cfg[k] = int(v)
            elif k in ("alpha", "p", "rho_star"):
                cfg[k] = float(v)
            else:
                cfg[k] = v.strip()
    except ValueError as exc:
        raise UsageError(f"config: bad value ({exc})") from None
    return cfg


def _apply_overrides(cfg: dict, args) -> dict:
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "alpha", None) is not None and "alpha" in cfg:
        cfg["alpha"] = args.alpha
    return cfg


def _small_run_warning(reps: int, floor: int):
    if reps < floor:
        print(f"warning: {reps} replicates is below the recommended {floor}", file=sys.stderr)


# ----------------------------------------------------------------------------
# subcommands


def _load_model(path: str) -> ProbMatrix | Graphon:
    text = _read_text(path)
    if path.endswith(".json") or text.lstrip().startswith("{"):
        return read_graphon(text)
    return read_prob_matrix(text)


def cmd_sample(args) -> int:
    model = _load_model(args.model)
    rng = RngSpec(args.seed or 0)
    files = {}
    if isinstance(model, ProbMatrix):
        if args.n is not None and args.n != model.n:
            raise DimensionError(f"--n {args.n} does not match the {model.n}-node matrix")
        g = sample_her(model, rng)
    else:
        if args.n is None:
            raise UsageError("sampling a graphon needs --n")
        g, u = sample_eg(model, args.n, rng)
        files["sample.latent.csv"] = "i,u\n" + "".join(f"{i},{x!r}\n" for i, x in enumerate(u.tolist()))
    files["sample.edges"] = write_edge_list(g)
    files["sample.config.ini"] = config_echo("sample", {"model": args.model, "n": g.n,
                                                        "seed": args.seed or 0})
    write_outputs(Path(args.out), files)
    print(f"sampled n={g.n} m={g.m}")
    return EXIT_OK


def _load_graph(path: str, n: int | None):
    text = _read_text(path)
    return read_edge_list(text, n if n is not None else parse_node_count(text))


def cmd_test(args) -> int:
    kind, _, ref = args.null.partition(":")
    if kind not in ("er", "her", "eg", "covariates") or (kind != "er" and not ref):
        raise UsageError("--null must be er, her:FILE, eg:FILE or covariates:FILE")
    lines = []
    if kind == "her":
        p0 = read_prob_matrix(_read_text(ref))
        g = _load_graph(args.graph, args.n if args.n is not None else p0.n)
        res = test_her(g, p0, args.alpha)
    elif kind == "eg":
        phi0 = read_graphon(_read_text(ref))
        g = _load_graph(args.graph, args.n)
        res = test_eg(g, phi0, args.alpha)
    elif kind == "covariates":
        g = _load_graph(args.graph, args.n)
        x = read_covariates(_read_text(ref), g.n)
        fit = fit_logistic_null(g, x)
        if not fit.converged:
            print("warning: logistic fit did not converge", file=sys.stderr)
        lines.append("term,estimate,se")
        lines.extend(fit.csv_rows())
        lines.append("")
        res = test_her(g, fit.p0, args.alpha)
    else:
        g = _load_graph(args.graph, args.n)
        res = test_dv_er(g, args.alpha)
    lines.append(res.CSV_HEADER)
    lines.append(res.csv_row())
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if args.out:
        write_outputs(Path(args.out), {
            "test.csv": report,
            "test.config.ini": config_echo("test", {"graph": args.graph, "null": args.null,
                                                    "alpha": args.alpha, "n": g.n}),
        })
    return EXIT_OK


def cmd_fit_null(args) -> int:
    g = _load_graph(args.graph, args.n)
    x = read_covariates(_read_text(args.covariates), g.n)
    fit = fit_logistic_null(g, x)
    coef = "term,estimate,se\n" + "\n".join(fit.csv_rows()) + "\n"
    sys.stdout.write(coef)
    print(f"iterations={fit.iterations} score_norm={fit.score_norm:.3g} "
          f"converged={fit.converged} ridge={fit.ridge}")
    if args.out:
        write_outputs(Path(args.out), {
            "fit.coefficients.csv": coef,
            "fit.p0.csv": write_prob_matrix(fit.p0),
            "fit.config.ini": config_echo("fit-null", {"graph": args.graph,
                                                       "covariates": args.covariates, "n": g.n}),
        })
    return EXIT_OK if fit.converged else EXIT_NUMERIC


def _study(args, command: str):
    cfg = _apply_overrides(read_study_config(_read_text(args.config), command), args)
    return cfg


def cmd_power(args) -> int:
    cfg = _study(args, "power")
    _small_run_warning(cfg["replicates"], 100)
    cells = run_power_study(cfg["design"], cfg["n"], cfg["rho_star"], cfg["beta"],
                            replicates=cfg["replicates"], alpha=cfg["alpha"], seed=cfg["seed"],
                            threads=args.threads, min_replicates=1)
    write_outputs(Path(args.out), {"power.csv": power_csv(cells),
                                   "power.config.ini": config_echo("power", _echo(cfg))})
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _study(args, "simulate")
    cells = run_size_equivalence(cfg["n"], cfg["p"], cfg["replicates"], alpha=cfg["alpha"],
                                 seed=cfg["seed"], threads=args.threads)
    write_outputs(Path(args.out), {"simulate.csv": equivalence_csv(cells),
                                   "simulate.config.ini": config_echo("simulate", _echo(cfg))})
    return EXIT_OK


def cmd_qq(args) -> int:
    cfg = _study(args, "qq")
    _small_run_warning(cfg["replicates"], 200)
    cells = run_qq_study(cfg["model"], cfg["kind"], cfg["n"], cfg["exponent"],
                         replicates=cfg["replicates"], rho_star=cfg["rho_star"], seed=cfg["seed"],
                         threads=args.threads, repeat=cfg["repeat"], min_replicates=2)
    write_outputs(Path(args.out), {"qq.csv": qq_csv(cells),
                                   "qq.config.ini": config_echo("qq", _echo(cfg))})
    return EXIT_OK


def _echo(cfg: dict) -> dict:
    return {k: ",".join(str(x) for x in v) if isinstance(v, list) else v
            for k, v in sorted(cfg.items())}


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", default=None, help="output directory")

    ap = argparse.ArgumentParser(prog="degreegof",
                                 description="Degree-based goodness-of-fit tests for random graphs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="sample a graph from a model file")
    p.add_argument("model", help="probability matrix CSV or graphon JSON")
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(func=cmd_sample, need_out=True)

    p = sub.add_parser("test", parents=[common], help="test a graph against a null model")
    p.add_argument("graph", help="edge list")
    p.add_argument("--null", required=True, help="er | her:FILE | eg:FILE | covariates:FILE")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--n", type=int, default=None, help="node count if not in the edge list header")
    p.set_defaults(func=cmd_test, need_out=False)

    p = sub.add_parser("fit-null", parents=[common], help="fit the logistic null model")
    p.add_argument("graph")
    p.add_argument("covariates", help="CSV with header i,j,x1,...,xd")
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(func=cmd_fit_null, need_out=False)

    for name, fn, text in (("power", cmd_power, "power study"),
                           ("simulate", cmd_simulate, "plug-in equivalence study under ER"),
                           ("qq", cmd_qq, "sparse-regime normality study")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("config", help="key = value study configuration")
        p.add_argument("--alpha", type=float, default=None)
        p.set_defaults(func=fn, need_out=True)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.need_out and not args.out:
        ap.error(f"{args.command} needs --out DIR")
    if args.threads < 1:
        ap.error("--threads must be at least 1")
    if getattr(args, "alpha", None) is not None and not 0 < args.alpha < 1:
        ap.error("--alpha must lie in (0, 1)")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GraphError, ModelError, CovariateError, DimensionError, DesignError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateNullError, ConsistencyError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
