"""Command-line pipeline: synth -> preprocess -> featurize -> sweep -> report.

Every command reads one JSON config, writes its artifacts into the output
directory, and drops a manifest recording the config hash, the seed, and a
checksum per artifact. Outputs are a pure function of (config, seed), so
rerunning a command reproduces its files byte for byte; wall-clock timing
is printed to stdout instead of being written into the manifest to keep it
that way.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import experiment, features, graph, report, synth
from .learn import BoostParams

ENV_OUT_DIR = "COUPLEREC_OUT"
MANIFEST_FORMAT_VERSION = 1

SYNTH_EDGES = "synth_social_edges.tsv"
SYNTH_RATINGS = "synth_ratings.tsv"
NETWORK_FILES = (
    "network_social_edges.tsv",
    "network_ratings.tsv",
    "user_map.csv",
    "item_map.csv",
)
FEATURES_CSV = "features.csv"
SWEEP_CSV = "sweep.csv"


class CliError(Exception):
    """User-facing failure; message printed to stderr, exit status 2."""


# ---------------------------------------------------------------------------
# config handling


_KNOWN_SECTIONS = {
    "seed", "out_dir", "workers", "input", "synthetic",
    "labeling", "split", "sweep", "learner", "features",
}


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CliError(f"config file not found: {path}")
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise CliError(f"config file {path} must hold a JSON object")
    unknown = set(config) - _KNOWN_SECTIONS
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    has_input = "input" in config
    has_synth = "synthetic" in config
    if has_input == has_synth:
        raise CliError("config must provide exactly one of 'input' or 'synthetic'")
    return config


def _section(config: dict, name: str, allowed: set[str]) -> dict:
    section = config.get(name, {})
    if not isinstance(section, dict):
        raise CliError(f"config section '{name}' must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise CliError(f"unknown keys in config section '{name}': {sorted(unknown)}")
    return section


def effective_config(config: dict, seed: int, workers: int) -> dict:
    merged = dict(config)
    merged["seed"] = seed
    merged.pop("out_dir", None)   # manifests stay location-independent
    merged.pop("workers", None)   # results are worker-count-independent
    return merged


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# manifests


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: Path, command: str, cfg_hash: str, seed: int,
                   artifact_paths) -> Path:
    manifest = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "command": command,
        "config_hash": cfg_hash,
        "seed": seed,
        "artifacts": {
            Path(p).name: _sha256_file(Path(p)) for p in sorted(map(str, artifact_paths))
        },
    }
    path = out_dir / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# commands


def _input_paths(config: dict, out_dir: Path) -> tuple[Path, Path]:
    if "input" in config:
        section = _section(config, "input", {"social_edges", "ratings"})
        for key in ("social_edges", "ratings"):
            if key not in section:
                raise CliError(f"config section 'input' must set '{key}'")
        edges, ratings = Path(section["social_edges"]), Path(section["ratings"])
        hint = ""
    else:
        edges, ratings = out_dir / SYNTH_EDGES, out_dir / SYNTH_RATINGS
        hint = " (run the synth command first)"
    for path in (edges, ratings):
        if not path.is_file():
            raise CliError(f"input file not found: {path}{hint}")
    return edges, ratings


def _synthetic_config(config: dict, seed: int) -> synth.SyntheticConfig:
    if "synthetic" not in config:
        raise CliError("config must provide a 'synthetic' section for this command")
    allowed = {
        "user_count", "item_count", "mean_social_degree", "mean_items_per_user",
        "homophily", "signal_layer", "seed", "popular_pool_fraction",
    }
    section = dict(_section(config, "synthetic", allowed))
    section.setdefault("seed", seed)
    try:
        cfg = synth.SyntheticConfig(**section)
        cfg.validate()
    except ValueError as exc:
        raise CliError(f"bad synthetic config: {exc}") from None
    return cfg


def _labeling_config(config: dict, seed: int) -> experiment.LabelingConfig:
    allowed = {"target_count", "popularity_pool_fraction", "rating_threshold", "seed"}
    section = dict(_section(config, "labeling", allowed))
    section.setdefault("seed", seed)
    try:
        cfg = experiment.LabelingConfig(**section)
        cfg.validate()
    except ValueError as exc:
        raise CliError(f"bad labeling config: {exc}") from None
    return cfg


def _boost_params(config: dict) -> BoostParams:
    section = _section(config, "learner", {"rounds", "max_depth"})
    params = BoostParams(**section)
    if params.rounds < 1 or params.max_depth < 0:
        raise CliError("bad learner config: rounds >= 1 and max_depth >= 0 required")
    return params


def cmd_synth(config: dict, out_dir: Path, seed: int, workers: int) -> list[Path]:
    cfg = _synthetic_config(config, seed)
    net = synth.synthesize(cfg)
    edges_path = out_dir / SYNTH_EDGES
    ratings_path = out_dir / SYNTH_RATINGS
    graph.write_edge_file(net.social, edges_path, external_ids=True)
    graph.write_ratings_file(
        net.behavioral, ratings_path, external_ids=True,
        user_id_map=net.social.original_id_map,
    )
    print(
        f"synth: users={net.social.user_count} links={net.social.edge_count} "
        f"items={net.behavioral.item_count} records={net.behavioral.record_count}"
    )
    return [edges_path, ratings_path]


def cmd_preprocess(config: dict, out_dir: Path, seed: int, workers: int) -> list[Path]:
    edges_path, ratings_path = _input_paths(config, out_dir)
    full_social = graph.load_social(edges_path)
    social, remap = graph.largest_connected_component(full_social)
    behavioral_raw = graph.build_behavioral(
        graph.read_rating_records(ratings_path),
        graph.user_index_map(full_social),
        full_social.user_count,
    )
    behavioral = graph.align_behavioral(behavioral_raw, remap)
    net = graph.couple(social, behavioral)
    paths = graph.save_network(net, out_dir)
    print(
        f"preprocess: users={social.user_count} links={social.edge_count} "
        f"items={behavioral.item_count} records={behavioral.record_count} "
        f"(dropped {full_social.user_count - social.user_count} users outside "
        "the largest component)"
    )
    return list(paths.values())


def _require_network(out_dir: Path) -> graph.CoupledNetwork:
    missing = [name for name in NETWORK_FILES if not (out_dir / name).is_file()]
    if missing:
        raise CliError(
            f"missing network artifacts {missing} in {out_dir}; "
            "run the preprocess command first"
        )
    return graph.load_network(out_dir)


def cmd_featurize(config: dict, out_dir: Path, seed: int, workers: int) -> list[Path]:
    net = _require_network(out_dir)
    section = _section(config, "features", {"pair_cap"})
    pair_cap = section.get("pair_cap", features.DEFAULT_PAIR_CAP)
    matrix = features.compute_matrix(net, seed=seed, pair_cap=pair_cap, workers=workers)
    path = out_dir / FEATURES_CSV
    features.write_feature_csv(matrix, path)
    print(f"featurize: users={matrix.user_count} columns={len(features.FEATURE_COLUMNS)}")
    return [path]


def cmd_sweep(config: dict, out_dir: Path, seed: int, workers: int) -> list[Path]:
    net = _require_network(out_dir)
    features_path = out_dir / FEATURES_CSV
    if not features_path.is_file():
        raise CliError(
            f"missing feature cache {features_path}; run the featurize command first"
        )
    matrix = features.read_feature_csv(features_path)
    if matrix.user_count != net.social.user_count:
        raise CliError(
            "feature cache does not match the network; rerun the featurize command"
        )

    labeling = _labeling_config(config, seed)
    section = _section(config, "split", {"train_ratios", "stratified"})
    r_list = section.get("train_ratios", [0.8])
    sweep_section = _section(config, "sweep", {"alpha_grid"})
    alpha_grid = sweep_section.get("alpha_grid", list(experiment.DEFAULT_ALPHA_GRID))
    params = _boost_params(config)

    result = experiment.run_sweep(
        net, labeling, r_list, alpha_grid, params,
        seed=seed, features=matrix, artifacts_dir=out_dir,
    )
    produced = [out_dir / SWEEP_CSV, out_dir / "labels.csv"]
    for r in sorted(float(x) for x in r_list):
        tag = f"{r:g}"
        produced += [
            out_dir / f"split_r{tag}.csv",
            out_dir / f"norm_r{tag}.json",
            out_dir / f"model_r{tag}_social.json",
            out_dir / f"model_r{tag}_behavioral.json",
        ]
    best = {r: experiment.SweepResult(result.rows).best_alpha(r)
            for r in sorted({row.train_ratio for row in result.rows})}
    print(f"sweep: rows={len(result.rows)} best_alpha={best}")
    return produced


def cmd_report(config: dict, out_dir: Path, seed: int, workers: int) -> list[Path]:
    sweep_path = out_dir / SWEEP_CSV
    if not sweep_path.is_file():
        raise CliError(f"missing sweep results {sweep_path}; run the sweep command first")
    result = experiment.read_sweep_csv(sweep_path)
    created = report.render_sweep_figures(result, out_dir)
    print(f"report: wrote {', '.join(p.name for p in created)}")
    return created


_COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "featurize": cmd_featurize,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="couplerec",
        description="Coupled-network feature extraction and hybrid classifier sweeps",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        cmd = sub.add_parser(name, help=fn.__doc__)
        cmd.add_argument("--config", required=True, help="path to the JSON run config")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--out", default=None,
                         help=f"output directory (overrides ${ENV_OUT_DIR} and config)")
        cmd.add_argument("--workers", type=int, default=None,
                         help="worker cap for parallel sections")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        config = load_config(args.config)
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        workers = args.workers if args.workers is not None else int(config.get("workers", 1))
        if workers < 1:
            raise CliError("workers must be >= 1")
        out_value = args.out or os.environ.get(ENV_OUT_DIR) or config.get("out_dir")
        if not out_value:
            raise CliError(
                f"no output directory: pass --out, set ${ENV_OUT_DIR}, "
                "or set 'out_dir' in the config"
            )
        out_dir = Path(out_value)
        out_dir.mkdir(parents=True, exist_ok=True)

        artifacts = _COMMANDS[args.command](config, out_dir, seed, workers)
        cfg_hash = config_hash(effective_config(config, seed, workers))
        manifest = write_manifest(out_dir, args.command, cfg_hash, seed, artifacts)
        print(f"{args.command}: done in {time.perf_counter() - started:.2f}s, "
              f"manifest {manifest}")
        return 0
    except (CliError, graph.GraphParseError, graph.CouplingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
