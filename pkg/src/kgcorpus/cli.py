"""Command-line front end: ingest, build, stats, synth, validate.

Exit codes: 0 success, 1 usage error, 2 validation/data failure, 3 I/O
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from kgcorpus.emit import CorpusError, ingest_freetext, validate
from kgcorpus.graph import GraphError, RelationType
from kgcorpus.ingest import (
    IngestConfig,
    IngestError,
    ingest_release,
    load_graph,
    save_graph,
)
from kgcorpus.pipeline import BuildConfig, build_corpus
from kgcorpus.sampling import SamplingError
from kgcorpus.synth import SyntheticKgSpec, generate_synthetic_kg

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3

_RELEASE_FILES = {
    "concepts": "MRCONSO.RRF",
    "relations": "MRREL.RRF",
    "types": "MRSTY.RRF",
    "groups": "SemGroups.txt",
}


class _Parser(argparse.ArgumentParser):
    """argparse that exits with code 1 on usage errors, per the CLI contract."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat key-value configuration file (one `key = value` per line)."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, value = line.partition("=")
        elif ":" in line:
            key, _, value = line.partition(":")
        else:
            raise CorpusError(f"config line not key-value: {raw!r}")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merged(args: argparse.Namespace, file_values: dict[str, str], key: str, default, cast):
    cli_value = getattr(args, key)
    if cli_value is not None:
        return cli_value
    if key in file_values:
        raw = file_values[key]
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _build_parser() -> _Parser:
    parser = _Parser(prog="kgcorpus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse release files into a graph cache")
    p_ingest.add_argument("--release-dir", required=True, help="directory with release files")
    p_ingest.add_argument("--lang", action="append", help="language code filter (repeatable)")
    p_ingest.add_argument("--out", required=True, help="graph cache output path")
    p_ingest.add_argument("--report", help="write the ingest report to this path")
    p_ingest.add_argument("--strict", action="store_true")
    p_ingest.add_argument("--flip-orientation", action="store_true")
    p_ingest.add_argument("--group-allowlist", help="comma-separated semantic groups to keep")

    p_build = sub.add_parser("build", help="sample, render and emit a corpus")
    p_build.add_argument("--config", help="key-value config file; explicit flags override it")
    p_build.add_argument("--graph", help="graph cache from `ingest`")
    p_build.add_argument("--lang", default=None)
    p_build.add_argument("--seed", type=int, default=None)
    p_build.add_argument("--tc-size", type=int, default=None)
    p_build.add_argument("--ep-size", type=int, default=None)
    p_build.add_argument("--lp-size", type=int, default=None)
    p_build.add_argument("--max-hops", type=int, default=None)
    p_build.add_argument("--mlm-prob", type=float, default=None)
    p_build.add_argument("--freetext", action="append", help="free-text file or directory")
    p_build.add_argument("--out-dir", default=None)
    p_build.add_argument("--shards", type=int, default=None)
    p_build.add_argument(
        "--disable-task", action="append", choices=["tc", "ep", "lp"], default=None
    )

    p_stats = sub.add_parser("stats", help="per-language term/cui/relation counts")
    p_stats.add_argument("--graph", required=True, help="graph cache from `ingest`")
    p_stats.add_argument("--lang", action="append", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic release for testing")
    p_synth.add_argument("--out-dir", required=True)
    p_synth.add_argument("--concepts", type=int, default=100)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument(
        "--groups", default="ANAT:0.2,CHEM:0.3,DISO:0.5", help="group:weight pairs"
    )
    p_synth.add_argument(
        "--edges-per-relation",
        default="100",
        help="edge count per relation type: a single int or NAME:count pairs",
    )
    p_synth.add_argument("--terms-min", type=int, default=1)
    p_synth.add_argument("--terms-max", type=int, default=3)
    p_synth.add_argument("--languages", default="ENG", help="comma-separated language codes")
    p_synth.add_argument("--extra-group-prob", type=float, default=0.0)

    p_validate = sub.add_parser("validate", help="re-check an emitted corpus")
    p_validate.add_argument("corpus_dir")
    p_validate.add_argument("--graph", help="graph cache for path/membership re-checks")

    return parser


def _cmd_ingest(args: argparse.Namespace) -> int:
    release = Path(args.release_dir)
    cfg = IngestConfig(
        languages=frozenset(args.lang) if args.lang else None,
        flip_orientation=args.flip_orientation,
        group_allowlist=(
            frozenset(args.group_allowlist.split(",")) if args.group_allowlist else None
        ),
        strict=args.strict,
    )
    kg, report = ingest_release(
        release / _RELEASE_FILES["concepts"],
        release / _RELEASE_FILES["relations"],
        release / _RELEASE_FILES["types"],
        release / _RELEASE_FILES["groups"],
        cfg,
    )
    save_graph(kg, args.out)
    text = report.to_text()
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_build(args: argparse.Namespace) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    graph_path = _merged(args, file_values, "graph", None, str)
    if not graph_path:
        raise CorpusError("build requires --graph (or graph= in the config file)")
    out_dir = _merged(args, file_values, "out_dir", None, str)
    if not out_dir:
        raise CorpusError("build requires --out-dir (or out_dir= in the config file)")
    disabled = args.disable_task
    if disabled is None:
        disabled = [
            t.strip() for t in file_values.get("disable_task", "").split(",") if t.strip()
        ]
    freetext_paths = args.freetext
    if freetext_paths is None:
        freetext_paths = [
            p.strip() for p in file_values.get("freetext", "").split(",") if p.strip()
        ]

    config = BuildConfig(
        language=_merged(args, file_values, "lang", "ENG", str),
        seed=_merged(args, file_values, "seed", 0, int),
        tc_size=_merged(args, file_values, "tc_size", 0, int),
        ep_size=_merged(args, file_values, "ep_size", 0, int),
        lp_size=_merged(args, file_values, "lp_size", 0, int),
        max_hops=_merged(args, file_values, "max_hops", 4, int),
        mlm_probability=_merged(args, file_values, "mlm_prob", 0.15, float),
        shards=_merged(args, file_values, "shards", 1, int),
        disabled=frozenset(disabled),
    )
    kg = load_graph(graph_path)
    documents = ingest_freetext(freetext_paths, config.language) if freetext_paths else []
    manifest, _ = build_corpus(kg, config, documents, out_dir)
    sys.stdout.write(
        json.dumps(
            {"out_dir": str(out_dir), "counts": manifest.counts, "weights": manifest.weights},
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return EXIT_OK


def _cmd_stats(args: argparse.Namespace) -> int:
    kg = load_graph(args.graph)
    for language in args.lang:
        terms, cuis, relations = kg.statistics(language)
        sys.stdout.write(f"{language}\tterms={terms}\tcuis={cuis}\trelations={relations}\n")
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    weights: dict[str, float] = {}
    for pair in args.groups.split(","):
        group, _, weight = pair.partition(":")
        weights[group.strip()] = float(weight)
    if ":" in args.edges_per_relation:
        edges = {}
        for pair in args.edges_per_relation.split(","):
            name, _, count = pair.partition(":")
            edges[RelationType[name.strip().upper()]] = int(count)
    else:
        edges = {r: int(args.edges_per_relation) for r in RelationType}
    spec = SyntheticKgSpec(
        concept_count=args.concepts,
        group_weights=weights,
        terms_per_concept=(args.terms_min, args.terms_max),
        edges_per_relation=edges,
        languages=tuple(args.languages.split(",")),
        extra_group_prob=args.extra_group_prob,
        seed=args.seed,
    )
    truth = generate_synthetic_kg(spec, args.out_dir)
    sys.stdout.write(json.dumps(truth.as_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    kg = load_graph(args.graph) if args.graph else None
    report = validate(args.corpus_dir, kg)
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.ok else EXIT_VALIDATION


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "ingest": _cmd_ingest,
        "build": _cmd_build,
        "stats": _cmd_stats,
        "synth": _cmd_synth,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (CorpusError, IngestError, GraphError, SamplingError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
