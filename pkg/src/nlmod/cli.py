"""``nlmod`` command line: generate graphs, bipartition, detect communities, evaluate partitions.

Reports go to stdout (JSON by default); partitions are written to ``--out``
as ``vertex community`` lines, 0-based and sorted by vertex.  Exit codes:
0 success (an indivisible graph is a success), 1 when every start failed
numerically, 2 on input or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import EdgeListError, chung_lu_sample, planted_model, read_edge_list, write_edge_list
from .metrics import clustering_error, nmi
from .modularity import ModularityContext, community_modularities, q_mu_of
from .partition import (
    AllStartsFailed,
    MethodSpec,
    Partition,
    default_starts,
    leading_module,
    successive_bipartition,
)
from .ratiodca import DCAOptions

METHODS = {"linear": "linear", "nonlinear-q": "nonlinear_q", "nonlinear-qmu": "nonlinear_qmu"}
CRITERIA = {"q": "q", "qmu": "q_mu"}


class UsageError(Exception):
    """Bad input or configuration; maps to exit code 2."""


@dataclass
class RunConfig:
    input: str
    measure: str = "degree"
    method: str = "nonlinear-q"
    criterion: Optional[str] = None
    starts_random: int = 30
    starts_diffusion: int = 30
    eigenvector_start: bool = True
    seed: int = 0
    max_communities: Optional[int] = None
    min_size: int = 2
    kl: bool = False
    tol: float = 1e-6
    threads: int = 1
    format: str = "json"
    out: Optional[str] = None

    def validate(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}")
        if self.criterion is not None and self.criterion not in CRITERIA:
            raise UsageError(f"unknown criterion {self.criterion!r}")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.starts_random < 0 or self.starts_diffusion < 0:
            raise UsageError("start counts must be nonnegative")
        if self.method != "linear" and not (
            self.starts_random or self.starts_diffusion or self.eigenvector_start
        ):
            raise UsageError("no starting points requested")
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")
        if self.min_size < 1:
            raise UsageError("--min-size must be >= 1")
        if self.max_communities is not None and self.max_communities < 1:
            raise UsageError("--max-communities must be >= 1")

    def method_spec(self) -> MethodSpec:
        starts = default_starts(self.starts_random, self.starts_diffusion,
                                self.eigenvector_start, self.seed)
        crit = CRITERIA[self.criterion] if self.criterion else None
        return MethodSpec(METHODS[self.method], starts or default_starts(0, 0, True), crit,
                          DCAOptions(rel_tol=self.tol), threads=self.threads)


def _load(path, measure):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            G = read_edge_list(path, measure)
    except (OSError, EdgeListError) as exc:
        raise UsageError(str(exc)) from exc
    if G.n == 0:
        raise UsageError(f"{path}: graph has no vertices")
    try:
        return G, ModularityContext.root(G)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _communities(ctx, P: Partition):
    Q = community_modularities(ctx, P.labels)
    return [{"id": c, "size": int(s), "Q": float(Q[c])} for c, s in enumerate(P.sizes)]


def _totals(ctx, P: Partition) -> dict:
    Q = community_modularities(ctx, P.labels)
    out = {"q": float(Q.sum()) / ctx.mu_total, "n_communities": P.k, "q_mu": None}
    if P.k == 2:
        out["q_mu"] = float(q_mu_of(ctx, P.labels == 0))
    return out


def _start_entries(rep):
    return [
        {"index": r.index, "kind": r.start.kind, "seed": r.start.seed, "lambdas": r.lambdas,
         "status": r.status, "value": r.value, "from_start_vector": r.from_start_vector,
         "fallback": r.fallback, "error": r.error}
        for r in rep.starts
    ]


def _base_report(cfg: RunConfig, G, command):
    return {"command": command, "input": cfg.input, "method": cfg.method,
            "criterion": cfg.criterion, "seed": cfg.seed, "measure": cfg.measure,
            "n": G.n, "m": G.n_edges}


def cmd_bipartition(cfg: RunConfig):
    """Run the leading-module procedure; returns ``(report, partition, exit_code)``."""
    cfg.validate()
    t0 = time.perf_counter()
    G, ctx = _load(cfg.input, cfg.measure)
    t_load = time.perf_counter() - t0
    spec = cfg.method_spec()
    report = _base_report(cfg, G, "bipartition")
    report["criterion"] = spec.criterion
    try:
        P, rep = leading_module(ctx, spec)
    except AllStartsFailed as exc:
        report.update({"error": str(exc), "starts": _start_entries(exc.report)})
        return report, None, 1
    report.update(_totals(ctx, P))
    report.update({
        "indivisible": rep.indivisible,
        "linear_lambda": rep.linear_lambda,
        "best_start": rep.best_start,
        "communities": _communities(ctx, P),
        "starts": _start_entries(rep),
        "timings": {"load": t_load, **rep.timings,
                    "per_start": [r.seconds for r in rep.starts]},
    })
    return report, P, 0


def cmd_detect(cfg: RunConfig):
    """Successive bipartition plus optional refinement; returns ``(report, partition, code)``."""
    cfg.validate()
    t0 = time.perf_counter()
    G, ctx = _load(cfg.input, cfg.measure)
    t_load = time.perf_counter() - t0
    spec = cfg.method_spec()
    t1 = time.perf_counter()
    H = successive_bipartition(ctx, spec, cfg.max_communities, cfg.min_size, kl=cfg.kl)
    t_run = time.perf_counter() - t1
    report = _base_report(cfg, G, "detect")
    report["criterion"] = spec.criterion
    reports = [nd.report for nd in H.nodes if nd.report is not None]
    if H.nodes[0].status.startswith("failed"):
        report["error"] = H.nodes[0].status
        return report, None, 1
    report.update(_totals(ctx, H.partition))
    report.update({
        "kl": cfg.kl,
        "communities": _communities(ctx, H.partition),
        "dendrogram": [
            {"id": nd.id, "parent": nd.parent, "size": int(nd.members.size), "depth": nd.depth,
             "gain": nd.gain, "status": nd.status, "children": nd.children,
             "starts": _start_entries(nd.report) if nd.report else []}
            for nd in H.nodes
        ],
        "timings": {"load": t_load, "detect": t_run,
                    "per_node": [sum(r.seconds for r in rep.starts) for rep in reports]},
    })
    return report, H.partition, 0


def read_partition(path, n=None) -> np.ndarray:
    """Read ``vertex community`` lines; every vertex ``0..n-1`` must appear exactly once."""
    try:
        with open(path) as fh:
            rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise UsageError(str(exc)) from exc
    try:
        pairs = np.array([(int(a), int(b)) for a, b, *_ in rows], dtype=np.int64).reshape(-1, 2)
    except ValueError as exc:
        raise UsageError(f"{path}: malformed partition line") from exc
    n = int(pairs[:, 0].max()) + 1 if n is None and pairs.size else (n or 0)
    v = pairs[:, 0]
    if np.any(v < 0) or np.any(v >= n):
        raise UsageError(f"{path}: vertex id out of range 0..{n - 1}")
    counts = np.bincount(v, minlength=n)
    if np.any(counts != 1):
        missing = np.flatnonzero(counts == 0)
        raise UsageError(f"{path}: partition does not cover every vertex exactly once"
                         + (f" (missing {missing[:5].tolist()})" if missing.size else ""))
    labels = np.empty(n, dtype=np.int64)
    labels[v] = pairs[:, 1]
    return labels


def write_partition(P, fh):
    for v, c in enumerate(np.asarray(getattr(P, "labels", P)).tolist()):
        fh.write(f"{v} {c}\n")


def cmd_eval(graph_path, partition_path, truth_path=None, measure="degree"):
    G, ctx = _load(graph_path, measure)
    labels = read_partition(partition_path, G.n)
    P = Partition(labels)
    report = {"command": "eval", "input": graph_path, "partition": partition_path,
              "n": G.n, "m": G.n_edges, **_totals(ctx, P), "communities": _communities(ctx, P)}
    if truth_path:
        truth = read_partition(truth_path, G.n)
        report["nmi"] = nmi(labels, truth)
        report["clustering_error"] = clustering_error(labels, truth) if P.k == 2 else None
    return report, 0


def cmd_generate(model, seed, out=None, truth=None, sizes=None, probs=None, weights=None,
                 background=0.05, delta=None):
    """Sample a graph; returns ``(edge_list_text, truth_text_or_None)``."""
    if model == "planted":
        kw = {}
        if sizes:
            kw["sizes"] = sizes
        if probs:
            kw["probs"] = probs
        if weights:
            kw["weights"] = weights
        try:
            G, _ = planted_model(background_prob=background, seed=seed, **kw)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        labels = G.info["labels"]
    elif model == "chung-lu":
        if not delta:
            raise UsageError("chung-lu needs --delta")
        try:
            G = chung_lu_sample(delta, seed=seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        labels = None
    else:
        raise UsageError(f"unknown model {model!r}")
    buf = io.StringIO()
    write_edge_list(G, buf)
    tbuf = None
    if labels is not None:
        tbuf = io.StringIO()
        write_partition(labels, tbuf)
    return buf.getvalue(), (tbuf.getvalue() if tbuf else None)


# ---------------------------------------------------------------------------
# formatting


def _to_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in report.items():
        if isinstance(v, (list, dict)):
            continue
        w.writerow([k, "" if v is None else repr(v) if isinstance(v, float) else v])
    if "communities" in report:
        w.writerow([])
        w.writerow(["community", "size", "Q"])
        for c in report["communities"]:
            w.writerow([c["id"], c["size"], repr(c["Q"])])
    return buf.getvalue()


def format_report(report, fmt="json") -> str:
    if fmt == "csv":
        return _to_csv(report)
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _default_threads():
    env = os.environ.get("NLMOD_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            pass
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlmod", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def run_opts(sp):
        sp.add_argument("input", help="edge list: 'u v [w]' per line")
        sp.add_argument("--method", choices=sorted(METHODS), default="nonlinear-q")
        sp.add_argument("--criterion", choices=sorted(CRITERIA), default=None,
                        help="thresholding criterion (default: qmu for nonlinear-qmu, else q)")
        sp.add_argument("--starts-random", type=int, default=30)
        sp.add_argument("--starts-diffusion", type=int, default=30)
        sp.add_argument("--eigenvector-start", action=argparse.BooleanOptionalAction,
                        default=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--measure", choices=("degree", "uniform"), default="degree")
        sp.add_argument("--tol", type=float, default=1e-6, help="outer relative tolerance")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $NLMOD_THREADS or 1)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--out", help="write the partition here")

    b = sub.add_parser("bipartition", help="best two-way split")
    run_opts(b)
    d = sub.add_parser("detect", help="successive bipartition into communities")
    run_opts(d)
    d.add_argument("--max-communities", type=int, default=None)
    d.add_argument("--min-size", type=int, default=2)
    d.add_argument("--kl", action="store_true", help="refine with single-vertex moves")

    e = sub.add_parser("eval", help="score a partition file")
    e.add_argument("graph")
    e.add_argument("partition")
    e.add_argument("--truth", help="ground-truth 'vertex label' file")
    e.add_argument("--measure", choices=("degree", "uniform"), default="degree")
    e.add_argument("--format", choices=("json", "csv"), default="json")

    g = sub.add_parser("generate", help="sample a synthetic graph")
    g.add_argument("model", choices=("planted", "chung-lu"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="edge list path (default: stdout)")
    g.add_argument("--truth", help="ground-truth path (planted; default: <out>.truth)")
    g.add_argument("--sizes", type=_floats)
    g.add_argument("--probs", type=_floats)
    g.add_argument("--weights", type=_floats)
    g.add_argument("--background", type=float, default=0.05)
    g.add_argument("--delta", type=_floats, help="expected degrees for chung-lu")
    return p


def _write(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(str(exc)) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            edges, truth = cmd_generate(args.model, args.seed, sizes=args.sizes, probs=args.probs,
                                        weights=args.weights, background=args.background,
                                        delta=args.delta)
            if args.out:
                _write(args.out, edges)
            else:
                sys.stdout.write(edges)
            tpath = args.truth or (args.out + ".truth" if args.out else None)
            if truth is not None and tpath:
                _write(tpath, truth)
            return 0
        if args.command == "eval":
            report, code = cmd_eval(args.graph, args.partition, args.truth, args.measure)
            sys.stdout.write(format_report(report, args.format))
            return code
        cfg = RunConfig(
            input=args.input, measure=args.measure, method=args.method,
            criterion=args.criterion, starts_random=args.starts_random,
            starts_diffusion=args.starts_diffusion, eigenvector_start=args.eigenvector_start,
            seed=args.seed, tol=args.tol,
            threads=args.threads if args.threads is not None else _default_threads(),
            format=args.format, out=args.out,
            max_communities=getattr(args, "max_communities", None),
            min_size=getattr(args, "min_size", 2), kl=getattr(args, "kl", False),
        )
        run = cmd_bipartition if args.command == "bipartition" else cmd_detect
        report, P, code = run(cfg)
        if P is not None and cfg.out:
            buf = io.StringIO()
            write_partition(P, buf)
            _write(cfg.out, buf.getvalue())
        sys.stdout.write(format_report(report, cfg.format))
        return code
    except UsageError as exc:
        print(f"nlmod: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
