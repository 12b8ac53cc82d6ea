"""``mfx`` command line: ingestion, analyses and data-only plot exports.

Exit status: 0 success, 1 configuration error, 2 data error, 3 numerical/fit error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from itertools import combinations
from pathlib import Path

import numpy as np

from mfx import __version__, arbitrage, cluster, fixtures, ingest, kernels, marketstats, mfcore, rho, surrogate
from mfx.config import AnalysisConfig, ConfigError, load, validate
from mfx.errors import DomainError, FitError, FormatError, MfxError, ParameterError

logger = logging.getLogger("mfx")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


# --- artifact output -------------------------------------------------------

class Artifacts:
    """Writes files under one directory, stamping each with tool version and config hash."""

    def __init__(self, root: Path, cfg: AnalysisConfig):
        self.root = Path(root)
        self.meta = {"tool": "mfx", "version": __version__, "config_hash": cfg.hash(),
                     "kernel_backend": kernels.BACKEND, "rng": surrogate.RNG_NAME}
        self.written = []
        self.timings = {}

    def _path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(name)
        return p

    def json(self, name: str, payload) -> None:
        body = {"meta": self.meta, **payload} if isinstance(payload, dict) else {"meta": self.meta, "data": payload}
        self._path(name).write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")

    def csv(self, name: str, text: str) -> None:
        stamp = f"# mfx {__version__} config={self.meta['config_hash']}\n"
        self._path(name).write_text(stamp + text)

    def text(self, name: str, text: str) -> None:
        self._path(name).write_text(text)

    def binary(self, name: str, writer, *args) -> None:
        writer(self._path(name), *args)

    def jsonl(self, name: str, records) -> None:
        lines = [json.dumps({"meta": self.meta, **r}, sort_keys=True) for r in records]
        self._path(name).write_text("".join(line + "\n" for line in lines))

    def manifest(self, command: str, cfg: AnalysisConfig) -> None:
        files = {}
        for name in sorted(set(self.written)):
            files[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
        manifest = {"meta": self.meta, "command": command, "config": cfg.canonical(),
                    "numpy": np.__version__, "artifacts": files}
        (self.root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True, default=str) + "\n")
        (self.root / "timings.json").write_text(json.dumps(self.timings, indent=1, sort_keys=True) + "\n")


# --- data loading ----------------------------------------------------------

class Dataset:
    """Per-pair returns (and bid/ask grids when loaded from ticks)."""

    def __init__(self, cfg: AnalysisConfig):
        self.cfg = cfg
        self.returns = {}
        self.gaps = {}
        self.quotes = {}
        self.ticks = {}
        self.reports = {}
        for label in cfg.pairs():
            self._load(label, Path(cfg.data[label]))

    def _load(self, label: str, path: Path) -> None:
        if path.suffix == ".mfx":
            sidecar = path.with_suffix(".gaps.json")
            gaps = ingest.read_gap_map(sidecar) if sidecar.exists() else []
            series = ingest.read_returns(path, gaps)
            series.pair = label
            self.returns[label], self.gaps[label] = series, gaps
            return
        ticks, report = ingest.parse_ticks(path)
        if len(ticks) < 2:
            raise DomainError(f"{label}: fewer than two valid ticks in {path}")
        q = ingest.resample_quotes(ticks, self.cfg.delta_t, label)
        raw = ingest.log_returns(q.mid)
        series, gaps = ingest.filter_inactive(raw, self.cfg.stale_run)
        self.returns[label], self.gaps[label] = series, gaps
        self.quotes[label], self.ticks[label], self.reports[label] = q, ticks, report

    def basket(self) -> list:
        return ingest.synchronize_all([self.returns[lab] for lab in self.cfg.pairs()])


def _scales(cfg: AnalysisConfig, n: int) -> np.ndarray:
    return mfcore.scale_grid(n, cfg.m, cfg.scales_per_decade, cfg.s_min, cfg.s_max, cfg.scale_count)


def _safe(label: str) -> str:
    return label.replace("/", "")


# --- subcommands -----------------------------------------------------------

def cmd_ingest(cfg, out, args):
    data = Dataset(cfg)
    for label, series in data.returns.items():
        out.binary(f"returns/{_safe(label)}.mfx", ingest.write_returns, series)
        out.text(f"returns/{_safe(label)}.gaps.json", json.dumps(data.gaps[label]) + "\n")
        if label in data.reports:
            r = data.reports[label]
            out.json(f"returns/{_safe(label)}.report.json", {
                "pair": label, "rows": r.rows, "accepted": r.accepted, "malformed": r.malformed,
                "rejected": r.rejected, "first_bad_line": r.first_bad_line, "samples": len(series),
                "removed_ranges": len(data.gaps[label])})


def _mfdfa_out(cfg, out, label, series, prefix=""):
    res = mfcore.mfdfa(series, cfg.q, _scales(cfg, len(series)), cfg.m, cfg.fit_range)
    res.surface.pair_x = res.surface.pair_y = label
    out.json(f"{prefix}mfdfa/{_safe(label)}.surface.json", res.surface.to_dict())
    out.json(f"{prefix}mfdfa/{_safe(label)}.hq.json", [f.to_dict() for f in res.fits])
    return res


def cmd_mfdfa(cfg, out, args):
    data = Dataset(cfg)
    for label, series in data.returns.items():
        _mfdfa_out(cfg, out, label, series)


def _mfcca_pair(cfg, out, x, y, prefix=""):
    x, y = ingest.synchronize(x, y)
    res = mfcore.mfcca(x, y, cfg.q, _scales(cfg, len(x)), cfg.m, cfg.fit_range)
    res.surface.pair_x, res.surface.pair_y = x.pair, y.pair
    name = f"{prefix}mfcca/{_safe(x.pair)}_{_safe(y.pair)}"
    out.json(f"{name}.surface.json", res.surface.to_dict())
    out.json(f"{name}.exponents.json", {
        "lambda": [f.to_dict() for f in res.fits],
        "h_x": [f.to_dict() for f in res.fits_x],
        "h_y": [f.to_dict() for f in res.fits_y],
        "h_xy": [{"q": f.q, "h_xy": h} for f, h in zip(res.fits_x, res.h_xy)],
    })
    return res


def _selected_pairs(cfg, args):
    if getattr(args, "pair_x", None) and getattr(args, "pair_y", None):
        return [(args.pair_x, args.pair_y)]
    if cfg.report_pairs and len(cfg.report_pairs) == 2:
        return [tuple(cfg.report_pairs)]
    return list(combinations(cfg.pairs(), 2))


def cmd_mfcca(cfg, out, args):
    data = Dataset(cfg)
    for a, b in _selected_pairs(cfg, args):
        _mfcca_pair(cfg, out, data.returns[a], data.returns[b])


def _rho_q(cfg):
    bad = [q for q in cfg.q if q <= 0]
    if bad:
        raise ParameterError(f"rho requires q > 0, got {bad}")
    return cfg.q


def _matrices(cfg, basket, scale):
    n = len(basket[0])
    spec = rho.ScaleAverage(_scales(cfg, n).tolist()) if scale is None else int(scale)
    return rho.rho_matrices(basket, _rho_q(cfg), spec, cfg.m, jobs=cfg.jobs)


def _write_matrices(out, mats, name):
    out.json(f"{name}.json", {"blocks": [m.to_dict() for m in mats.values()]})
    for q, m in mats.items():
        out.csv(f"{name}_q{q:g}.csv", m.to_csv())
        part = rho.triangle_partition(m) if _all_pair_labels(m.labels) else None
        if part is not None:
            out.json(f"{name}_q{q:g}.triangles.json", {
                "q": q, "means": part.means,
                "triangular": [list(e) for e in part.triangular],
                "non_triangular": [list(e) for e in part.non_triangular]})


def _all_pair_labels(labels) -> bool:
    try:
        for lab in labels:
            ingest.Pair.parse(lab)
    except ParameterError:
        return False
    return True


def _write_profiles(cfg, out, x, y, prefix=""):
    x, y = ingest.synchronize(x, y)
    grid = _scales(cfg, len(x))
    prof = rho.rho_profiles(x, y, _rho_q(cfg), grid, cfg.m)
    lines = ["s," + ",".join(f"rho_q{q:g}" for q in prof)]
    for i, s in enumerate(grid):
        lines.append(f"{int(s)}," + ",".join(repr(prof[q][i].value) for q in prof))
    out.csv(f"{prefix}rho/profile_{_safe(x.pair)}_{_safe(y.pair)}.csv", "\n".join(lines) + "\n")


def cmd_rho(cfg, out, args):
    _rho_q(cfg)
    data = Dataset(cfg)
    basket = data.basket()
    scales = args.scale or [None]
    for scale in scales:
        name = "rho/matrix_avg" if scale is None else f"rho/matrix_s{scale}"
        _write_matrices(out, _matrices(cfg, basket, scale), name)
    if args.profiles:
        for a, b in _selected_pairs(cfg, args):
            _write_profiles(cfg, out, data.returns[a], data.returns[b])


def _dendrograms(cfg, out, mats, prefix=""):
    for q, m in mats.items():
        d = cluster.to_distance(m)
        tree = cluster.agglomerate(d, cfg.linkage)
        out.json(f"{prefix}dendro/q{q:g}.distance.json", {"labels": d.labels, "rows": d.values.tolist()})
        out.json(f"{prefix}dendro/q{q:g}.tree.json", tree.to_dict())
        out.text(f"{prefix}dendro/q{q:g}.nwk",
                 f"[mfx {__version__} config={out.meta['config_hash']}]" + tree.to_newick() + "\n")


def cmd_dendro(cfg, out, args):
    _rho_q(cfg)
    data = Dataset(cfg)
    _dendrograms(cfg, out, _matrices(cfg, data.basket(), args.scale))


def _triangles(cfg, data):
    specs = []
    for text in cfg.triangles:
        cur = [c.strip() for c in text.split(",")]
        specs.append(arbitrage.TriangleSpec.build(cur, list(data.quotes)))
    return specs


def _arb(cfg, out, data, raw_ticks=False, prefix=""):
    if not cfg.triangles:
        raise ConfigError("no triangles configured (use --triangle A,B,C or [arb] triangles)")
    events = []
    for tri in _triangles(cfg, data):
        if raw_ticks:
            events += arbitrage.scan_ticks(tri, data.ticks, cfg.threshold, cfg.min_duration)
        else:
            events += arbitrage.scan(tri, data.quotes, cfg.threshold, cfg.min_duration)
    out.jsonl(f"{prefix}arb/events.jsonl", [e.to_dict() for e in events])
    out.csv(f"{prefix}arb/summary.csv", arbitrage.summary_csv(events, cfg.delta_t))
    return events


def cmd_arb(cfg, out, args):
    data = Dataset(cfg)
    if not data.quotes:
        raise ConfigError("arbitrage scans need tick CSV inputs (bid/ask), not cached returns")
    _arb(cfg, out, data, raw_ticks=args.raw_ticks)


def _tails(cfg, out, data, prefix=""):
    for label, series in data.returns.items():
        if len(series) < 100:
            raise DomainError(f"{label}: only {len(series)} active returns, tail analysis needs 100")
        dist = marketstats.ccdf(series)
        out.csv(f"{prefix}tails/{_safe(label)}.ccdf.csv", dist.log_binned().to_csv())
        fit = marketstats.tail_slope(dist, quantiles=cfg.quantiles)
        payload = {"pair": label, "fit": json.loads(fit.to_json()), "quantiles": list(cfg.quantiles)}
        if cfg.excise:
            cut_series, gaps = series, list(data.gaps.get(label, []))
            for window in cfg.excise:
                cut_series, gaps = marketstats.excise_window(cut_series, window, gaps)
            cut = marketstats.tail_slope(marketstats.ccdf(cut_series), quantiles=cfg.quantiles)
            payload["excised"] = {"windows": [list(w) for w in cfg.excise], "gaps": gaps,
                                  "fit": json.loads(cut.to_json())}
        out.json(f"{prefix}tails/{_safe(label)}.fit.json", payload)


def cmd_tails(cfg, out, args):
    _tails(cfg, out, Dataset(cfg))


def _index(cfg, out, data, prefix=""):
    labels = cfg.pairs()
    currencies = sorted({c for lab in labels for c in ingest.Pair.parse(lab).currencies})
    for c in currencies:
        involved = [data.returns[lab] for lab in labels if c in ingest.Pair.parse(lab).currencies]
        ci = marketstats.currency_index(c, involved)
        out.csv(f"{prefix}index/CI_{c}.csv", ci.to_csv())


def cmd_index(cfg, out, args):
    _index(cfg, out, Dataset(cfg))


def cmd_surrogate(cfg, out, args):
    data = Dataset(cfg)
    seeds = [cfg.seed + i for i in range(cfg.surrogate_count)]
    for label, series in data.returns.items():
        for seed, surr in zip(seeds, surrogate.ensemble(series, cfg.surrogate_kind, seeds)):
            out.binary(f"surrogate/{_safe(label)}/{cfg.surrogate_kind}_{seed}.mfx", ingest.write_returns, surr)
    man = surrogate.EnsembleManifest(cfg.surrogate_kind, seeds, {"pairs": list(data.returns)})
    out.json("surrogate/ensemble.json", json.loads(man.to_json()))


def cmd_report(cfg, out, args):
    data = Dataset(cfg)
    clock = time.perf_counter
    labels = cfg.pairs()
    pair = tuple(cfg.report_pairs) if len(cfg.report_pairs) == 2 else tuple(labels[:2])
    t = clock()
    x, y = data.returns[pair[0]], data.returns[pair[1]]
    _mfcca_pair(cfg, out, x, y, prefix="report/")          # fluctuation functions, lambda(q), h_xy
    _write_profiles(cfg, out, x, y, prefix="report/")      # rho_q(s) across scales
    out.timings["pair"] = clock() - t
    t = clock()
    mats = _matrices(cfg, data.basket(), None)             # scale-averaged matrices
    _write_matrices(out, mats, "report/rho/matrix_avg")
    _dendrograms(cfg, out, mats, prefix="report/")
    out.timings["matrices"] = clock() - t
    t = clock()
    if cfg.triangles and data.quotes:
        _arb(cfg, out, data, prefix="report/")
    _tails(cfg, out, data, prefix="report/")
    _index(cfg, out, data, prefix="report/")
    out.timings["market"] = clock() - t


def cmd_fixture(args):
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    if args.kind == "shock":
        fx = fixtures.shock_fixture()
        ticks = fx.ticks
        extra = "[arb]\ntriangles = EUR,USD,CHF\nthreshold = 0\n"
    else:
        pairs = args.pairs.split(",") if args.pairs else None
        cur = sorted({c for p in (pairs or []) for c in ingest.Pair.parse(p).currencies}) or ["EUR", "USD", "JPY"]
        ticks = fixtures.synthetic_basket(cur, pairs, n_seconds=args.seconds, seed=args.seed)
        extra = ""
    lines = ["[data]"]
    for label, t in ticks.items():
        fname = f"{_safe(label)}.csv"
        ingest.write_ticks(root / fname, t)
        lines.append(f"{label} = {fname}")
    lines += ["", "[analysis]", "delta_t = 10", "m = 2", "q = 1, 2, 3, 4", "", "[output]", "dir = out", "", extra]
    (root / "mfx.ini").write_text("\n".join(lines))
    print(root / "mfx.ini")


COMMANDS = {
    "ingest": cmd_ingest, "mfdfa": cmd_mfdfa, "mfcca": cmd_mfcca, "rho": cmd_rho,
    "dendro": cmd_dendro, "arb": cmd_arb, "tails": cmd_tails, "index": cmd_index,
    "surrogate": cmd_surrogate, "report": cmd_report,
}


# --- argument handling -----------------------------------------------------

def _common(p):
    p.add_argument("--config", "-c", help="INI config file")
    p.add_argument("--out", "-o", help="output directory")
    p.add_argument("--pair", action="append", metavar="LABEL=PATH", help="add an input series")
    p.add_argument("--q", action="append", type=float, help="q value (repeatable)")
    p.add_argument("--m", type=int, help="detrending polynomial degree")
    p.add_argument("--delta-t", type=float, help="sampling interval in seconds")
    p.add_argument("--stale-run", type=int, help="zero-return run length treated as inactivity")
    p.add_argument("--s-min", type=int)
    p.add_argument("--s-max", type=int)
    p.add_argument("--scale-count", type=int)
    p.add_argument("--fit-range", type=int, nargs=2, metavar=("SMIN", "SMAX"))
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--verbose", "-v", action="store_true")


HELP = {
    "ingest": "parse tick CSVs into cached return series and gap maps",
    "mfdfa": "generalized Hurst exponents h(q) per series",
    "mfcca": "cross-correlation exponents lambda(q) for pairs",
    "rho": "rho_q matrices at one scale or averaged, plus triangle values",
    "dendro": "hierarchical trees from rho_q distances (Newick and JSON)",
    "arb": "triangular arbitrage events from bid/ask quotes",
    "tails": "CCDF of normalized absolute returns and tail slope",
    "index": "cumulative currency index per currency",
    "surrogate": "shuffled or Fourier-phase surrogate ensembles",
    "report": "run the full analysis for a configured basket",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfx", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mfx {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        _common(p)
        if name in ("mfcca", "rho"):
            p.add_argument("--pair-x")
            p.add_argument("--pair-y")
        if name == "rho":
            p.add_argument("--avg-scales", action="store_true", help="average over the scale grid (default)")
            p.add_argument("--scale", type=int, action="append", help="single scale instead of averaging")
            p.add_argument("--profiles", action="store_true", help="also write rho_q(s) profiles")
        if name == "dendro":
            p.add_argument("--scale", type=int)
            p.add_argument("--linkage", choices=cluster.LINKAGES)
        if name == "arb":
            p.add_argument("--triangle", action="append", metavar="A,B,C")
            p.add_argument("--threshold", type=float)
            p.add_argument("--min-duration", type=int)
            p.add_argument("--raw-ticks", action="store_true", help="scan raw tick instants instead of the grid")
        if name == "tails":
            p.add_argument("--excise", action="append", metavar="START_MS,END_MS")
        if name == "surrogate":
            p.add_argument("--kind", choices=sorted(surrogate.PRESERVES))
            p.add_argument("--count", type=int)
    fx = sub.add_parser("fixture", help="write a synthetic tick fixture and config")
    fx.add_argument("kind", choices=("basket", "shock"))
    fx.add_argument("--out", "-o", required=True)
    fx.add_argument("--pairs", help="comma-separated pair labels for the basket fixture")
    fx.add_argument("--seconds", type=int, default=200_000)
    fx.add_argument("--seed", type=int, default=0)
    return parser


_FLAG_MAP = {
    "m": "m", "delta_t": "delta_t", "stale_run": "stale_run", "s_min": "s_min", "s_max": "s_max",
    "scale_count": "scale_count", "seed": "seed", "jobs": "jobs", "threshold": "threshold",
    "min_duration": "min_duration", "linkage": "linkage", "kind": "surrogate_kind",
    "count": "surrogate_count",
}


def apply_flags(cfg: AnalysisConfig, args) -> None:
    for flag, name in _FLAG_MAP.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg.set(name, v, "flag")
    if args.q:
        cfg.set("q", [float(q) for q in args.q], "flag")
    if args.fit_range:
        cfg.set("fit_range", tuple(args.fit_range), "flag")
    if args.out:
        cfg.set("output", str(Path(args.out).resolve()), "flag")
    if args.pair:
        data = dict(cfg.data)
        for spec in args.pair:
            label, sep, path = spec.partition("=")
            if not sep:
                raise ConfigError(f"--pair expects LABEL=PATH, got {spec!r}")
            data[label.strip().upper()] = str(Path(path).resolve())
        cfg.set("data", data, "flag")
    if getattr(args, "triangle", None):
        cfg.set("triangles", list(args.triangle), "flag")
    if getattr(args, "excise", None):
        try:
            windows = [tuple(int(v) for v in w.split(",")) for w in args.excise]
        except ValueError as exc:
            raise ConfigError(f"bad --excise window: {args.excise}") from exc
        cfg.set("excise", windows, "flag")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "fixture":
            cmd_fixture(args)
            return EXIT_OK
        cfg = load(args.config)
        apply_flags(cfg, args)
        validate(cfg)
        if args.verbose:
            for name, src in sorted(cfg.sources.items()):
                print(f"{name} = {getattr(cfg, name)!r} ({src})", file=sys.stderr)
            print(f"kernel backend: {kernels.BACKEND}", file=sys.stderr)
        out = Artifacts(Path(cfg.output), cfg)
        t = time.perf_counter()
        COMMANDS[args.command](cfg, out, args)
        out.timings["total"] = time.perf_counter() - t
        out.manifest(args.command, cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"mfx: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, DomainError, OSError) as exc:
        print(f"mfx: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"mfx: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MfxError as exc:
        print(f"mfx: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
