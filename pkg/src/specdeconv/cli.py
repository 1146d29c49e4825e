"""Command-line interface: ``specdeconv {estimate,simulate,audit,plotdata}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.  Every CSV starts with ``# manifest=<config hash>``;
floats are written with ``repr`` so they parse back to the same value.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import Config, load_config, load_preset, parse_kappa, preset_names
from .errors import ConfigError, DataError, NumericalError
from .estimators import (EcfEstimate, bandwidth_rule, deconv_known, deconv_unknown, ecf,
                         get_kernel, kde_spectrum, keep_mask)
from .models import parse_model
from .regularization import ThresholdRule, bias_bound_audit, threshold
from .risk import (RiskReport, _Context, diagnostics, lower_bound_diagnostic, m_frontier, mise_y,
                   moment_bound_audit, rate_fit, run_experiment)
from .spectral import inverse_transform_at, make_grid

RISK_COLUMNS = ("n", "m", "mean", "se", "replicates", "alpha", "delta", "mask_size")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# formatting and files

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(manifest: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# manifest={manifest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def json_text(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n"


def _write_all(out_dir: str, files: dict):
    """Write every file only after all contents exist (no partial outputs)."""
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _manifest(cfg: Config, command: str, seed: int, started: str, outputs, threads: int) -> str:
    g = cfg.values["grid"]
    return json_text({
        "config_hash": cfg.hash,
        "tool_version": __version__,
        "command": command,
        "started": started,
        "finished": _now(),
        "seed": seed,
        "grid": {"t_max": g["t_max"], "n_points": g["n_points"]},
        "threads": threads,
        "outputs": sorted(outputs),
    })


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def read_sample(path: str) -> np.ndarray:
    """One decimal real per line; ``#`` starts a comment; blank lines ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read sample {path}: {exc.strerror}") from None
    vals = []
    for i, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            raise DataError(f"{path}:{i}: not a real number: {text!r}") from None
        if not math.isfinite(v):
            raise DataError(f"{path}:{i}: non-finite value")
        vals.append(v)
    if not vals:
        raise DataError(f"{path}: empty sample")
    return np.array(vals)


def _load(args) -> Config:
    if args.preset and args.config:
        raise ConfigError("give either --config or --preset, not both")
    if args.preset:
        cfg = load_preset(args.preset)
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise ConfigError("one of --config or --preset is required")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


# --------------------------------------------------------------------------
# commands

def cmd_estimate(args) -> int:
    started = _now()
    cfg = _load(args)
    e, r, g, est = (cfg.values[k] for k in ("experiment", "rule", "grid", "estimate"))
    if (args.eps_sample is None) == (args.known_eps is None):
        raise ConfigError("give exactly one of --eps-sample or --known-eps")
    if r["id"] is None:
        raise ConfigError("[rule] id is required")
    rule = ThresholdRule(r["id"], r["c"])
    y = read_sample(args.y_sample)
    grid = make_grid(g["t_max"], g["n_points"])
    n = y.size
    m = None
    if args.known_eps is not None:
        if rule.estimated_eps:
            raise ConfigError(f"rule {rule.rule_id!r} expects an error sample (--eps-sample)")
        try:
            phi = parse_model(args.known_eps).spectrum(grid)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        if not rule.estimated_eps:
            raise ConfigError(f"rule {rule.rule_id!r} assumes a known error density (--known-eps)")
        eps = read_sample(args.eps_sample)
        m = eps.size
        phi = ecf(eps, grid).spectrum
    order = e["kernel_order"]
    delta = float(n) ** (-2.0 * order / (2.0 * order + 1.0))
    alpha = threshold(rule, delta=delta, beta=r["beta"], p=r["p"], a=r["a"], s=e["s"],
                      r=order, kappa=cfg.kappa(), n=n, m=m)
    h = bandwidth_rule(n, order, e["bandwidth_c"])
    mask = keep_mask(phi, e["s"], alpha)
    fy = kde_spectrum(y, get_kernel(e["kernel"]), h, grid, where=mask)
    if m is None:
        res = deconv_known(fy, phi, e["s"], alpha)
    else:
        res = deconv_unknown(fy, EcfEstimate(phi, m), e["s"], alpha)
    xs = np.linspace(est["x_min"], est["x_max"], est["x_points"])
    fhat = inverse_transform_at(res.spectrum, xs)
    t = grid.nodes
    v = res.spectrum.values
    files = {
        "spectrum.csv": csv_text(cfg.hash, ("t", "re", "im", "mask"),
                                 zip(t, v.real, v.imag, res.keep_mask.astype(int))),
        "reconstruction.csv": csv_text(cfg.hash, ("x", "fhat"), zip(xs, fhat)),
        "estimate.json": json_text({
            "manifest": cfg.hash, "alpha": alpha, "s": e["s"], "rule": rule.rule_id,
            "rule_c": rule.c, "delta": delta, "delta_mode": "theory", "bandwidth": h,
            "n": n, "m": m, "provenance": res.provenance,
            "mask_fraction": res.mask_fraction, "mask_edge": res.mask_edge(),
        }),
    }
    files["manifest.json"] = _manifest(cfg, "estimate", e["seed"], started, files, 1)
    _write_all(args.out_dir, files)
    return 0


def _risk_rows(cells):
    for c in cells:
        yield (c.n, c.m_label, c.mean, c.se, c.replicates, c.alpha, c.delta, c.mask_size)


def cmd_simulate(args) -> int:
    started = _now()
    cfg = _load(args)
    exp = cfg.experiment()
    quantity = cfg.values["experiment"]["quantity"]
    files = {}
    if quantity == "m_frontier":
        rows = m_frontier(exp, threads=args.threads)
        header = ("n", "m_min", "known_mean", "known_se") + tuple(f"mean_m{m}" for m in exp.m_schedule)
        files["frontier.csv"] = csv_text(cfg.hash, header, (
            (r.n, "open" if r.m_min is None else r.m_min, r.known_mean, r.known_se) + r.est_means
            for r in rows))
    else:
        if quantity == "mise_y":
            ctx = _Context(exp)
            report = RiskReport([mise_y(exp, n, args.threads, _ctx=ctx) for n in exp.n_schedule],
                                diagnostics(exp))
        else:
            report = run_experiment(exp, threads=args.threads)
        files["risk.csv"] = csv_text(cfg.hash, RISK_COLUMNS, _risk_rows(report.cells))
        model = f"{exp.fit_model}({exp.fit_axis})"
        try:
            fit = rate_fit(report, model)
            fit_obj = {"model": fit.model, "exponent": fit.exponent, "se": fit.se,
                       "r2": fit.r2, "points": fit.points, "intercept": fit.intercept}
        except ValueError as exc:
            fit_obj = {"model": model, "error": str(exc)}
        files["ratefit.json"] = json_text({"manifest": cfg.hash, "quantity": quantity,
                                           "fit": fit_obj, "diagnostics": report.meta})
    files["manifest.json"] = _manifest(cfg, "simulate", exp.seed, started, files, args.threads)
    _write_all(args.out_dir, files)
    return 0


def cmd_audit(args) -> int:
    started = _now()
    cfg = _load(args)
    exp = cfg.experiment()
    au = cfg.values["audit"]
    cond = cfg.source_condition()
    x, eps = exp.pair.x_model, exp.pair.eps_model
    alphas = np.logspace(math.log10(au["alpha_min"]), math.log10(au["alpha_max"]), au["alpha_points"])
    audits = [bias_bound_audit(x, eps, exp.s, float(a), cond, exp.grid) for a in alphas]
    if cond.kind == "poly":
        header = ("alpha", "lhs", "rho_sq", "rate", "ratio", "rhs", "holds")
        rows = ((b.alpha, b.lhs, b.rho_sq, cond.rate(b.alpha), b.ratio, b.rhs, b.holds) for b in audits)
    else:
        header = ("alpha", "lhs", "rho_sq", "rate", "ratio")
        rows = ((b.alpha, b.lhs, b.rho_sq, cond.rate(b.alpha), b.ratio) for b in audits)
    files = {"audit_bias.csv": csv_text(cfg.hash, header, rows)}
    mrows = moment_bound_audit(eps, au["moment_m"], au["moment_gammas"], au["moment_replicates"],
                               seed=exp.seed, s=exp.s)
    files["audit_moments.csv"] = csv_text(
        cfg.hash, ("m", "t", "gamma", "scaled_mean", "scaled_se", "exact", "clt_limit"),
        ((r.m, r.t, r.gamma, r.scaled_mean, r.scaled_se, r.exact, r.clt_limit) for r in mrows))
    kappa = parse_kappa(au["diag_kappa"])
    x_spec = x.spectrum(exp.grid)
    drows = [lower_bound_diagnostic(x_spec, kappa, m) for m in au["diag_m"]]
    files["audit_diagnostic.csv"] = csv_text(cfg.hash, ("m", "value", "argmax"),
                                             ((d.m, d.value, d.argmax) for d in drows))
    files["manifest.json"] = _manifest(cfg, "audit", exp.seed, started, files, 1)
    _write_all(args.out_dir, files)
    return 0


# --------------------------------------------------------------------------
# plot data

def read_table(path: str):
    """Parse an emitted CSV: returns (manifest, header, rows of strings)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read report {path}: {exc.strerror}") from None
    manifest = None
    body = []
    for line in lines:
        if line.startswith("# manifest="):
            manifest = line.split("=", 1)[1]
        elif line.startswith("#") or not line.strip():
            continue
        else:
            body.append(line)
    if not body:
        raise DataError(f"{path}: empty report")
    rows = list(csv.reader(body))
    header, data = rows[0], rows[1:]
    if not data:
        raise DataError(f"{path}: empty report")
    if any(len(r) != len(header) for r in data):
        raise DataError(f"{path}: malformed report (ragged rows)")
    return manifest, header, data


def read_report(path: str):
    """Risk cells from a ``risk.csv`` as dicts with exact float values."""
    _, header, data = read_table(path)
    if tuple(header) != RISK_COLUMNS:
        raise DataError(f"{path}: not a risk report (columns {header})")
    out = []
    try:
        for r in data:
            d = dict(zip(header, r))
            out.append({"n": int(d["n"]), "m": None if d["m"] == "known" else int(d["m"]),
                        "mean": float(d["mean"]), "se": float(d["se"]),
                        "replicates": int(d["replicates"]), "alpha": float(d["alpha"]),
                        "delta": float(d["delta"]), "mask_size": float(d["mask_size"])})
    except ValueError as exc:
        raise DataError(f"{path}: malformed report ({exc})") from None
    return out


def _fit_line(x, y):
    if len(x) < 2 or np.ptp(x) == 0:
        return list(y)
    slope, icpt = np.polyfit(x, y, 1)
    return list(icpt + slope * np.asarray(x))


def svg_text(title: str, series, xlabel: str, ylabel: str) -> str:
    """Minimal self-contained line plot; ``series`` is a list of (label, xs, ys)."""
    W, H, P = 480, 320, 48
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    x0, x1 = (xs[ok].min(), xs[ok].max()) if ok.any() else (0.0, 1.0)
    y0, y1 = (ys[ok].min(), ys[ok].max()) if ok.any() else (0.0, 1.0)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(v):
        return P + (v - x0) / (x1 - x0) * (W - 2 * P)

    def py(v):
        return H - P - (v - y0) / (y1 - y0) * (H - 2 * P)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
           f'<line x1="{P}" y1="{H - P}" x2="{W - P}" y2="{H - P}" stroke="black"/>',
           f'<line x1="{P}" y1="{P}" x2="{P}" y2="{H - P}" stroke="black"/>',
           f'<text x="{W / 2:.1f}" y="{H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
           f'<text x="14" y="{H / 2:.1f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 14 {H / 2:.1f})">{ylabel}</text>']
    for i, (label, sx, sy) in enumerate(series):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(sx, sy)
                       if math.isfinite(a) and math.isfinite(b))
        col = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - P}" y="{P + 14 * i}" text-anchor="end" font-size="11" fill="{col}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_plotdata(args) -> int:
    manifest, header, data = read_table(args.report)
    manifest = manifest or "unknown"
    files = {}
    try:
        if tuple(header) == RISK_COLUMNS:
            cells = read_report(args.report)
            ns = sorted({c["n"] for c in cells})
            axis = "m" if len(ns) == 1 and any(c["m"] is not None for c in cells) else "n"
            groups = {}
            for c in cells:
                key = c["n"] if axis == "m" else ("known" if c["m"] is None else c["m"])
                groups.setdefault(key, []).append(c)
            rows, series = [], []
            for key, cs in groups.items():
                lx = [math.log(c[axis]) for c in cs]
                ly = [math.log(c["mean"]) if c["mean"] > 0 else -math.inf for c in cs]
                fl = _fit_line(lx, ly) if all(math.isfinite(v) for v in ly) else ly
                rows += [(key, a, b, f) for a, b, f in zip(lx, ly, fl)]
                series += [(f"{'n' if axis == 'm' else 'm'}={key}", lx, ly), (f"fit {key}", lx, fl)]
            files["series_risk.csv"] = csv_text(manifest, ("group", f"log_{axis}", "log_risk", "fit_line"), rows)
            if args.svg:
                files["risk.svg"] = svg_text("risk", series, f"log {axis}", "log risk")
        elif header[:2] == ["alpha", "lhs"]:
            idx = {h: i for i, h in enumerate(header)}
            a = np.array([float(r[idx["alpha"]]) for r in data])
            lhs = np.array([float(r[idx["lhs"]]) for r in data])
            bound = np.array([float(r[idx["rate"]]) * float(r[idx["rho_sq"]]) for r in data])
            with np.errstate(divide="ignore"):
                la, ll, lb = np.log(a), np.log(lhs), np.log(bound)
            files["series_bias.csv"] = csv_text(manifest, ("log_alpha", "log_lhs", "log_bound"), zip(la, ll, lb))
            if args.svg:
                files["bias.svg"] = svg_text("bias vs alpha", [("lhs", la, ll), ("bound", la, lb)],
                                             "log alpha", "log bias")
        elif header == ["t", "re", "im", "mask"]:
            t = np.array([float(r[0]) for r in data])
            mod = np.hypot([float(r[1]) for r in data], [float(r[2]) for r in data])
            mask = np.array([int(r[3]) for r in data])
            files["series_mask.csv"] = csv_text(manifest, ("t", "mask", "modulus"), zip(t, mask, mod))
            if args.svg:
                files["mask.svg"] = svg_text("mask", [("mask", t, mask), ("modulus", t, mod)], "t", "")
        else:
            raise DataError(f"{args.report}: unrecognized report columns {header}")
    except (ValueError, KeyError, IndexError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{args.report}: malformed report ({exc})") from None
    _write_all(args.out_dir, files)
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="specdeconv", description="Spectral cut-off density deconvolution.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, threads=False):
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--preset", help=f"shipped preset ({', '.join(preset_names())})")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--out-dir", default=".", help="output directory (default: .)")
        if threads:
            sp.add_argument("--threads", type=int, default=1, help="worker count; results do not depend on it")

    sp = sub.add_parser("estimate", help="deconvolve a Y sample")
    common(sp)
    sp.add_argument("--y-sample", required=True, help="file with one observation per line")
    sp.add_argument("--eps-sample", help="file with an error sample")
    sp.add_argument("--known-eps", help="known error density, e.g. gaussian:sigma=1")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("simulate", help="Monte Carlo risk experiment")
    common(sp, threads=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("audit", help="bias, moment and lower-bound audits")
    common(sp)
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("plotdata", help="plot series from an emitted report")
    sp.add_argument("report", help="risk.csv, audit_bias.csv or spectrum.csv")
    sp.add_argument("--out-dir", default=".", help="output directory (default: .)")
    sp.add_argument("--svg", action="store_true", help="also write a minimal SVG")
    sp.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("specdeconv: error: --threads must be at least 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"specdeconv: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"specdeconv: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"specdeconv: numerical error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"specdeconv: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
