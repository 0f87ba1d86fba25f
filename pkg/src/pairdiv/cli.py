"""Command-line driver.

Subcommands: ``ingest``, ``curate``, ``analyze``, ``audit`` and ``synth``.
Settings come from built-in defaults, then an optional flat ``key = value``
file (``--config``), then command-line flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .aggregation import FUNCTIONS, bootstrap, get_scorer, rank_from_scores
from .audit import (
    AuditReport, convergence_curve, eigenvector_alignment, iia_robustness, pairwise_efficiency,
    pairwise_matrix, svd_factors,
)
from .corpus import CorpusError, PreferenceCorpus, parse_preflib_soc, read_corpus, write_corpus
from .curation import CurationConfig, curate, detect_suspicious
from .divisiveness import (
    DEFAULT_SPLITS, aggregate_divisiveness, divisiveness_regression, multidimensional_report,
    pairwise_divisiveness, parse_split, responsiveness_matrix, split_divisiveness, split_scores,
)
from .pairwise import consistency, corpus_to_pairs, build_tally, transitivity, write_pairs
from .reports import _plain, write_csv, write_json
from .synthgen import generate, read_key_values, read_spec, spec_from_mapping

logger = logging.getLogger("pairdiv")

KINDS = ("platform-csv", "preflib-soc", "synthetic-spec")


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    kind: str = "platform-csv"
    function: str = "win"
    split: tuple[str, ...] = ()
    country: str = "fr"
    source: str = "rank"
    bootstrap_iters: int = 30
    bootstrap_fraction: float = 0.5
    membership: str = "majority"
    denominator: str = "valid"
    consistency_method: str = "modal"
    orientations: str | None = None
    scenario: str = "exclude-centrist"
    curation: bool = True
    accepted_universes: tuple[int, ...] = (2, 4, 5, 6)
    recaptcha_threshold: float = 0.7
    static_rank_max_update_rate: float = 0.10
    static_rank_min_panels: int = 3
    max_approvals: int | None = None
    iia: bool = True
    iia_threshold: int = 4
    convergence: bool = True
    convergence_sizes: tuple[int, ...] = ()
    convergence_iters: int = 30
    spectral: bool = True
    spectral_k: int = 3
    seed: int = 0
    out: str = "out"
    format: tuple[str, ...] = ("csv", "json")

    def validate(self) -> RunConfig:
        if self.kind not in KINDS:
            raise CliError(f"--kind must be one of {KINDS}, got {self.kind!r}")
        if self.function not in FUNCTIONS:
            raise CliError(f"--function must be one of {FUNCTIONS}, got {self.function!r}")
        if self.source not in ("rank", "approval", "both"):
            raise CliError(f"--source must be rank, approval or both, got {self.source!r}")
        if self.country not in DEFAULT_SPLITS:
            raise CliError(f"--country must be one of {sorted(DEFAULT_SPLITS)}")
        bad = set(self.format) - {"csv", "json"}
        if bad or not self.format:
            raise CliError(f"--format accepts csv and/or json, got {','.join(self.format)!r}")
        if self.bootstrap_iters < 0:
            raise CliError("--bootstrap-iters must be >= 0")
        if not 0.0 < self.bootstrap_fraction <= 1.0:
            raise CliError("--bootstrap-fraction must lie in (0, 1]")
        if self.iia_threshold < 0:
            raise CliError("--iia-threshold must be >= 0")
        return self

    def hashed(self) -> dict:
        # the destination does not change results, so it stays out of the hash
        return {k: v for k, v in asdict(self).items() if k != "out"}


def _as_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _as_tuple(cast):
    def conv(text):
        if isinstance(text, (list, tuple)):
            return tuple(cast(t) for t in text)
        return tuple(cast(t.strip()) for t in str(text).split(",") if t.strip())
    return conv


def _opt_int(text):
    return None if text in (None, "", "none", "None") else int(text)


_FIELD_CASTS = {
    "input": str, "kind": str, "function": str, "split": lambda t: tuple(s.strip() for s in str(t).split(";") if s.strip()),
    "country": str, "source": str, "bootstrap_iters": int, "bootstrap_fraction": float,
    "membership": str, "denominator": str, "consistency_method": str, "orientations": str,
    "scenario": str, "curation": _as_bool, "accepted_universes": _as_tuple(int),
    "recaptcha_threshold": float, "static_rank_max_update_rate": float, "static_rank_min_panels": int,
    "max_approvals": _opt_int, "iia": _as_bool, "iia_threshold": int, "convergence": _as_bool,
    "convergence_sizes": _as_tuple(int), "convergence_iters": int, "spectral": _as_bool,
    "spectral_k": int, "seed": int, "out": str, "format": _as_tuple(str),
}
assert set(_FIELD_CASTS) == {f.name for f in fields(RunConfig)}


def load_config_file(path) -> dict:
    raw = read_key_values(path)
    out = {}
    for key, value in raw.items():
        name = key.replace("-", "_")
        if name not in _FIELD_CASTS:
            raise CliError(f"{path}: unknown config key {key!r}")
        try:
            out[name] = _FIELD_CASTS[name](value)
        except ValueError as exc:
            raise CliError(f"{path}: bad value for {key!r}: {exc}") from None
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig(**values).validate()


def load_corpus(cfg: RunConfig) -> PreferenceCorpus:
    if cfg.input is None:
        raise CliError("--input is required")
    path = Path(cfg.input)
    if not path.exists():
        raise CliError(f"input not found: {path}")
    if cfg.kind == "platform-csv":
        return read_corpus(path)
    if cfg.kind == "preflib-soc":
        return parse_preflib_soc(path)
    return generate(read_spec(path))


def _curation_config(cfg: RunConfig) -> CurationConfig:
    return CurationConfig(
        accepted_universes=frozenset(cfg.accepted_universes),
        recaptcha_threshold=cfg.recaptcha_threshold,
        static_rank_max_update_rate=cfg.static_rank_max_update_rate,
        static_rank_min_panels=cfg.static_rank_min_panels,
        max_approvals=cfg.max_approvals,
    )


def prepare_records(corpus: PreferenceCorpus, cfg: RunConfig):
    """Pairs with flagged users removed: (all their records, deduplicated records, report)."""
    pairs = corpus_to_pairs(corpus, cfg.source)
    # PrefLib voters carry no platform metadata, so only deduplication applies
    report = None
    if cfg.curation and cfg.kind != "preflib-soc":
        report = detect_suspicious(corpus, _curation_config(cfg))
    kept = curate(pairs, report, dedupe=False)
    return kept, curate(kept, None, dedupe=True), report


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(cfg: RunConfig, name: str, header, rows, data) -> None:
    out = _out_dir(cfg)
    if "csv" in cfg.format and header is not None:
        write_csv(out / f"{name}.csv", header, rows, cfg.hashed())
    if "json" in cfg.format and data is not None:
        write_json(out / f"{name}.json", data, cfg.hashed())


def _print(obj) -> None:
    print(json.dumps(_plain(obj), sort_keys=True, indent=2))


def _count_rows(path: Path) -> int:
    if not path.exists():
        return 0
    with path.open(encoding="utf-8") as fh:
        return max(sum(1 for _ in fh) - 1, 0)


def cmd_ingest(cfg: RunConfig) -> dict:
    corpus = load_corpus(cfg)
    out = _out_dir(cfg)
    write_corpus(corpus, out / "corpus")
    summary = corpus.summary()
    if cfg.kind == "platform-csv":
        rows = _count_rows(Path(cfg.input) / "profiles.csv")
        summary["profile_rows"] = rows
        summary["profiles_deduplicated"] = rows - len(corpus.profiles)
    summary["voters"] = len(corpus.user_ids)
    write_json(out / "ingest_summary.json", summary, cfg.hashed())
    return summary


def cmd_curate(cfg: RunConfig) -> dict:
    corpus = load_corpus(cfg)
    kept, dedup, report = prepare_records(corpus, cfg)
    out = _out_dir(cfg)
    pairs = corpus_to_pairs(corpus, cfg.source)
    write_pairs(dedup, out / "pairs.csv")
    summary = {
        "pairs_in": len(pairs), "pairs_after_flagged_removed": len(kept), "pairs_out": len(dedup),
        "users": len(corpus.user_ids),
        "flagged_users": len(report.flagged_users) if report else 0,
        "criteria_counts": report.counts() if report else {},
        "disabled_criteria": dict(report.disabled) if report else {},
    }
    if report is not None:
        write_json(out / "suspicion.json", report.to_dict(), cfg.hashed())
    write_json(out / "curate_summary.json", summary, cfg.hashed())
    return summary


def _scorer(cfg: RunConfig):
    return get_scorer(cfg.function, **({"seed": cfg.seed} if cfg.function == "elo" else {}))


def _score(cfg: RunConfig, records):
    scorer = _scorer(cfg)
    if cfg.bootstrap_iters:
        return bootstrap(scorer, records, cfg.bootstrap_iters, cfg.bootstrap_fraction, cfg.seed)
    return scorer(records)


def _divisiveness(cfg: RunConfig, records):
    fn = cfg.function if cfg.function == "win" else _scorer(cfg)
    return pairwise_divisiveness(records, fn, membership=cfg.membership, denominator=cfg.denominator)


def _read_orientations(path) -> dict[str, str]:
    return {k: v.strip().lower() for k, v in read_key_values(path).items()}


def cmd_analyze(cfg: RunConfig) -> dict:
    corpus = load_corpus(cfg)
    kept, records, report = prepare_records(corpus, cfg)
    if not len(records.decided()):
        raise CliError("no pairwise records left after curation", code=3)
    scores = _score(cfg, records)
    ranking = rank_from_scores(scores)
    position = ranking.position
    div = _divisiveness(cfg, records)
    div_rank = rank_from_scores(div).position

    ids = records.proposal_ids
    _emit(cfg, "scores", ("proposal_id", "mean", "ci_low", "ci_high", "n", "rank", "defined"),
          [(int(p), scores.mean[k], scores.ci_low[k], scores.ci_high[k], scores.n_comparisons[k],
            position[int(p)], scores.defined[k]) for k, p in enumerate(ids)], None)

    div_rows = [(int(p), div.metric, div.value[k], div.ci_low[k], div.ci_high[k], div.n_valid_terms[k],
                 div.flags[k] if div.flags else "") for k, p in enumerate(ids)]
    splits_out = {}
    split_specs = [parse_split(s, DEFAULT_SPLITS[cfg.country]) for s in cfg.split]
    for spec in split_specs:
        table = split_divisiveness(records, corpus.profiles, spec, _scorer(cfg))
        a, b = split_scores(records, corpus.profiles, spec, _scorer(cfg))
        try:
            agg = aggregate_divisiveness(a, b)
        except ValueError as exc:
            agg = None
            logger.warning("aggregate divisiveness for %s: %s", spec.dimension, exc)
        splits_out[spec.dimension] = {
            "aggregate": agg, "a": spec.a_name, "b": spec.b_name,
            "d": table.as_dict(), "score_a": a.as_dict(), "score_b": b.as_dict(),
        }
        div_rows += [(int(p), table.metric, table.value[k], table.ci_low[k], table.ci_high[k],
                      table.n_valid_terms[k], "" if table.defined[k] else "undefined")
                     for k, p in enumerate(ids)]
    _emit(cfg, "divisiveness", ("proposal_id", "metric", "value", "ci_low", "ci_high", "n_valid_terms", "flags"),
          div_rows, None)
    _emit(cfg, "w_vs_d", ("proposal_id", "score", "divisiveness", "score_rank", "divisiveness_rank"),
          [(int(p), scores.mean[k], div.value[k], position[int(p)], div_rank[int(p)]) for k, p in enumerate(ids)],
          None)

    cons = consistency(kept, cfg.consistency_method)
    trans = transitivity(kept)
    data = {
        "counts": {"records": len(records), "records_before_dedup": len(kept),
                   "users": records.n_users, "proposals": records.n_proposals,
                   "flagged_users": len(report.flagged_users) if report else 0},
        "function": cfg.function,
        "scores": {"mean": scores.as_dict(), "ci_low": dict(zip(map(int, ids), scores.ci_low)),
                   "ci_high": dict(zip(map(int, ids), scores.ci_high))},
        "ranking": list(ranking.order),
        "divisiveness": {"metric": div.metric, "value": div.as_dict(),
                         "ranking": list(rank_from_scores(div).order)},
        "splits": splits_out,
        "consistency": {"value": cons.value, "method": cons.method, "cells": cons.n_cells},
        "transitivity": {"value": trans.value, "triplets": trans.n_triplets},
    }
    if split_specs:
        frame = multidimensional_report(records, corpus.profiles, split_specs,
                                        cfg.function if cfg.function == "win" else _scorer(cfg),
                                        membership=cfg.membership, denominator=cfg.denominator)
        try:
            data["regression"] = divisiveness_regression(frame).to_dict()
        except ValueError as exc:
            data["regression"] = {"error": str(exc)}
    if cfg.orientations:
        resp = responsiveness_matrix(corpus.approvals, corpus.profiles, _read_orientations(cfg.orientations),
                                     cfg.scenario, catalog=corpus.catalog,
                                     participant_split=DEFAULT_SPLITS[cfg.country]["politics"])
        data["responsiveness"] = resp.to_dict()
    _emit(cfg, "analysis", None, None, data)
    return {"records": len(records), "top": list(ranking.order[:5]),
            "most_divisive": list(rank_from_scores(div).order[:5]),
            "consistency": cons.value, "transitivity": trans.value}


def _default_sizes(n: int) -> list[int]:
    lo = max(10, n // 1000)
    return sorted({int(s) for s in np.geomspace(lo, n, 10)})


def cmd_audit(cfg: RunConfig) -> dict:
    corpus = load_corpus(cfg)
    _, records, _ = prepare_records(corpus, cfg)
    if not len(records.decided()):
        raise CliError("no pairwise records left after curation", code=3)
    scorer = _scorer(cfg)

    def agreement(recs):
        return rank_from_scores(scorer(recs))

    def divisive(recs):
        return rank_from_scores(_divisiveness(cfg, recs))

    scores = scorer(records)
    ranking = rank_from_scores(scores)
    div = _divisiveness(cfg, records)
    matrix = pairwise_matrix(build_tally(records))
    efficiency = pairwise_efficiency(matrix, ranking)

    iia = {}
    if cfg.iia and records.n_proposals >= 3:
        iia["agreement"] = iia_robustness(records, agreement, cfg.iia_threshold, ranking)
        iia["divisiveness"] = iia_robustness(records, divisive, cfg.iia_threshold)
    curves = {}
    if cfg.convergence:
        sizes = cfg.convergence_sizes or _default_sizes(len(records))
        sizes = [s for s in sizes if s <= len(records)]
        curves["agreement"] = convergence_curve(records, agreement, sizes, cfg.convergence_iters, cfg.seed,
                                                reference=ranking)
        curves["divisiveness"] = convergence_curve(records, divisive, sizes, cfg.convergence_iters, cfg.seed)
    spectral = alignment = None
    first_eff = None
    if cfg.spectral:
        spectral = svd_factors(matrix, min(cfg.spectral_k, matrix.n))
        alignment = eigenvector_alignment(spectral, scores, div)
        first_eff = pairwise_efficiency(spectral.factor_matrix(1), ranking)
    report = AuditReport(efficiency, first_eff, iia, curves, spectral, alignment)

    _emit(cfg, "audit", None, None, report.to_dict())
    for name, res in iia.items():
        pid = res.proposal_ids
        rows = [(int(pid[r]), int(pid[c]), res.distances[r, c])
                for r in range(len(pid)) for c in range(len(pid)) if r != c]
        _emit(cfg, f"iia_{name}", ("removed", "remaining", "distance"), rows, None)
    if curves:
        rows = [(name, t["size"], t["median"], t["q25"], t["q75"])
                for name, c in curves.items() for t in c.table()]
        _emit(cfg, "convergence", ("ranking", "size", "median", "q25", "q75"), rows, None)
    if spectral is not None:
        rows = [(r["index"], r["sigma"], r["variance_share"], r.get("r2_vs_win"), r.get("r2_vs_div"))
                for r in alignment.rows]
        _emit(cfg, "spectral", ("index", "sigma", "variance_share", "r2_vs_win", "r2_vs_div"), rows, None)
        pid = matrix.proposal_ids
        rows = [(int(pid[i]), int(pid[j]), matrix.w[i, j], matrix.observed[i, j])
                for i in range(matrix.n) for j in range(matrix.n)]
        _emit(cfg, "matrix", ("row", "column", "win_rate", "observed"), rows, None)
    summary = {"efficiency": efficiency, "first_factor_efficiency": first_eff}
    for name, res in iia.items():
        summary[f"iia_{name}"] = res.robustness
    for name, c in curves.items():
        summary[f"converged_{name}"] = c.converged_size
    if spectral is not None:
        summary["variance_share"] = [float(v) for v in spectral.variance_share[:3]]
        summary["r2_first_vs_win"] = alignment.rows[0].get("r2_vs_win")
    return summary


def cmd_synth(cfg: RunConfig, overrides: Sequence[str] = ()) -> dict:
    if cfg.input is None:
        raise CliError("--input (electorate spec file) is required")
    path = Path(cfg.input)
    if not path.exists():
        raise CliError(f"input not found: {path}")
    values = read_key_values(path)
    for item in overrides:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    spec = spec_from_mapping(values)
    corpus = generate(spec)
    write_corpus(corpus, _out_dir(cfg))
    return corpus.summary()


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pairdiv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pairdiv {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value settings file")
        sp.add_argument("--input", help="corpus directory, SOC file or electorate spec")
        sp.add_argument("--kind", choices=KINDS)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--format", type=_as_tuple(str), help="csv,json")
        sp.add_argument("--source", choices=("rank", "approval", "both"))
        sp.add_argument("--no-curation", dest="curation", action="store_const", const=False)
        sp.add_argument("-v", "--verbose", action="store_true")

    def scoring(sp):
        sp.add_argument("--function", choices=FUNCTIONS)
        sp.add_argument("--membership", choices=("majority", "record"))
        sp.add_argument("--denominator", choices=("valid", "all"))

    common(sub.add_parser("ingest", help="parse and write the canonical corpus"))
    common(sub.add_parser("curate", help="flag suspicious users and deduplicate pairs"))

    a = sub.add_parser("analyze", help="scores, rankings and divisiveness")
    common(a)
    scoring(a)
    a.add_argument("--split", action="append", help="dimension name or dim:a1,a2/b1,b2 (repeatable)")
    a.add_argument("--country", choices=sorted(DEFAULT_SPLITS))
    a.add_argument("--bootstrap-iters", type=int)
    a.add_argument("--bootstrap-fraction", type=float)
    a.add_argument("--orientations", help="key = value file mapping candidate to left/right/centrist")
    a.add_argument("--scenario", choices=("exclude-centrist", "centrist-right", "centrist-left"))

    u = sub.add_parser("audit", help="efficiency, IIA, convergence and spectral diagnostics")
    common(u)
    scoring(u)
    u.add_argument("--iia-threshold", type=int)
    u.add_argument("--convergence-sizes", type=_as_tuple(int))
    u.add_argument("--convergence-iters", type=int)
    u.add_argument("--spectral-k", type=int)
    u.add_argument("--no-iia", dest="iia", action="store_const", const=False)
    u.add_argument("--no-convergence", dest="convergence", action="store_const", const=False)
    u.add_argument("--no-spectral", dest="spectral", action="store_const", const=False)

    s = sub.add_parser("synth", help="generate a synthetic electorate")
    common(s)
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a spec key")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "split", None) is not None:
        args.split = tuple(args.split)
    try:
        cfg = build_config(args)
        if args.command == "ingest":
            result = cmd_ingest(cfg)
        elif args.command == "curate":
            result = cmd_curate(cfg)
        elif args.command == "analyze":
            result = cmd_analyze(cfg)
        elif args.command == "audit":
            result = cmd_audit(cfg)
        else:
            result = cmd_synth(cfg, args.set)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (CorpusError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
