"""Command-line surface: ingest, synth, preprocess, train, eval, report.

Every run is replayable: outputs embed the seed and a hash of the resolved
configuration, and identical invocations produce identical outputs in
single-threaded mode.  Exit codes: 0 success, 1 runtime failure, 2 usage
error.

The results table is append-only tab-separated text with six data columns
(train tag, test tag, accuracy, F1, FAR, FRR); per-run metadata travels in
``#`` comment lines, including recorded failure reasons for rows whose
pipeline stage errored.  ``report`` renders percentages to two decimals.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .events import (
    Context,
    DatasetTag,
    ExternalFormat,
    IngestReport,
    Keyboard,
    KeySequence,
    parse_canonical,
    write_canonical,
    ingest_external,
)
from .metrics import ScoredPair, eer_threshold, evaluate, roc
from .model import TowerConfig, pair_scores
from .nncore import Mode, load_arrays, save_arrays
from .preprocess import FilterPolicy, PairingError, ProcessedSequence, make_pairs, process_pool
from .scenarios import (
    Axis,
    ScenarioKind,
    SplitMode,
    select,
)
from .synth import default_profiles, generate_corpus, load_profiles
from .trainer import HyperParams, load_train_config, save_checkpoint, train

__all__ = ["main", "PipelineConfig", "run_scenario_row", "load_pool"]

CACHE_DIR_ENV = "KDI_CACHE_DIR"
RESULTS_HEADER = "train\ttest\tacc\tf1\tfar\tfrr"


@dataclass(frozen=True)
class PipelineConfig:
    """Semantic knobs of a pipeline run; the config hash covers exactly
    these fields."""

    m: int = 50
    hidden: int = 32
    embed_dim: int = 32
    dropout: float = 0.5
    recurrent_dropout: float = 0.2
    summary: str = "last"
    batch_size: int = 64
    lr: float = 0.001
    epochs: int = 75
    l2_lambda: float = 1e-4
    seed: int = 0
    shift_max: float = 0.20
    min_len_frac: float = 0.50
    pairs_train: int = 1024
    pairs_val: int = 256
    pairs_test: int = 512

    def tower(self) -> TowerConfig:
        return TowerConfig(
            m=self.m,
            hidden=self.hidden,
            embed_dim=self.embed_dim,
            dropout=self.dropout,
            recurrent_dropout=self.recurrent_dropout,
            summary=self.summary,
        )

    def hyper(self) -> HyperParams:
        return HyperParams(
            m=self.m,
            batch_size=self.batch_size,
            lr=self.lr,
            epochs=self.epochs,
            l2_lambda=self.l2_lambda,
            seed=self.seed,
        )

    def policy(self) -> FilterPolicy:
        return FilterPolicy(shift_fraction_max=self.shift_max, min_len_fraction=self.min_len_frac)

    def config_hash(self) -> str:
        canon = "\n".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


_FIELD_TYPES = {
    "m": int,
    "hidden": int,
    "embed_dim": int,
    "dropout": float,
    "recurrent_dropout": float,
    "summary": str,
    "batch_size": int,
    "lr": float,
    "epochs": int,
    "l2_lambda": float,
    "seed": int,
    "shift_max": float,
    "min_len_frac": float,
    "pairs_train": int,
    "pairs_val": int,
    "pairs_test": int,
}


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """Built-in defaults, overlaid by the config file, overlaid by flags."""
    values: dict = {}
    if getattr(args, "config", None):
        for key, raw in load_train_config(args.config).items():
            if key not in _FIELD_TYPES:
                raise ValueError(f"unknown config key {key!r} in {args.config}")
            values[key] = _FIELD_TYPES[key](raw)
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return PipelineConfig(**values)


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key-value config file; flags override it")
    p.add_argument("--m", type=int, help="standardized sequence length M")
    p.add_argument("--hidden", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--recurrent-dropout", dest="recurrent_dropout", type=float)
    p.add_argument("--summary", choices=("last", "mean"))
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--l2-lambda", dest="l2_lambda", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--shift-max", dest="shift_max", type=float)
    p.add_argument("--min-len-frac", dest="min_len_frac", type=float)
    p.add_argument("--pairs-train", dest="pairs_train", type=int)
    p.add_argument("--pairs-val", dest="pairs_val", type=int)
    p.add_argument("--pairs-test", dest="pairs_test", type=int)


# ---------------------------------------------------------------------------
# Pool and cache I/O
# ---------------------------------------------------------------------------


def load_pool(path: str | Path, diagnostics: list[str] | None = None) -> list[KeySequence]:
    """All sequences from a canonical file, or every *.kdi file in a
    directory (sorted by name for determinism)."""
    path = Path(path)
    if path.is_file():
        files = [path]
    elif path.is_dir():
        files = sorted(path.glob("*.kdi"))
    else:
        raise FileNotFoundError(f"no canonical data at {path}")
    pool: list[KeySequence] = []
    for f in files:
        pool.extend(parse_canonical(f.read_bytes(), diagnostics=diagnostics))
    return pool


def write_cache(path: Path, processed: list[ProcessedSequence], counts: dict) -> None:
    if not processed:
        raise ValueError("nothing to cache: no sequences survived the filter")
    arrays = {
        "rows": np.stack([p.rows for p in processed]),
        "valid_len": np.array([p.valid_len for p in processed], dtype=np.int64),
        "user": np.array([p.meta.user_id for p in processed]),
        "condition": np.array([int(p.meta.condition) for p in processed], dtype=np.int64),
        "keyboard": np.array([p.meta.keyboard.value for p in processed]),
        "context": np.array([p.meta.context.value for p in processed]),
        "dataset": np.array([p.meta.dataset.value for p in processed]),
        "session": np.array([p.meta.session_id for p in processed]),
    }
    save_arrays(path, arrays, {"counts": json.dumps(counts)})


def read_cache(path: Path) -> tuple[list[ProcessedSequence], dict]:
    from .events import Condition, SequenceMeta

    arrays, meta = load_arrays(path)
    out = []
    for i in range(arrays["rows"].shape[0]):
        sm = SequenceMeta(
            user_id=str(arrays["user"][i]),
            condition=Condition(int(arrays["condition"][i])),
            dataset=DatasetTag(str(arrays["dataset"][i])),
            session_id=str(arrays["session"][i]),
            keyboard=Keyboard(str(arrays["keyboard"][i])),
            context=Context(str(arrays["context"][i])),
        )
        out.append(
            ProcessedSequence(
                meta=sm, rows=arrays["rows"][i], valid_len=int(arrays["valid_len"][i])
            )
        )
    return out, json.loads(meta.get("counts", "{}"))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    fmt = ExternalFormat(args.format)
    src = Path(args.indir)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in src.iterdir() if p.is_file()) if src.is_dir() else [src]
    report = IngestReport()
    written = 0
    for f in files:
        seqs = ingest_external(f, fmt, units=args.units, report=report)
        for i, seq in enumerate(seqs):
            name = f"{seq.meta.dataset.value}_{seq.meta.user_id}_{seq.meta.session_id}_{i:04d}.kdi"
            (out / name).write_bytes(write_canonical([seq]))
            written += 1
    print(f"ingested {len(files)} file(s): {report.sequences_kept} sequence(s) kept, "
          f"{len(report.sequences_rejected)} rejected, "
          f"{report.keycodes_clamped} keycode(s) clamped, "
          f"{report.keys_unmapped} key(s) unmapped")
    for msg in report.sequences_rejected:
        print(f"  rejected: {msg}")
    print(f"wrote {written} canonical file(s) to {out}")
    return 0


def cmd_synth(args) -> int:
    profiles = load_profiles(args.profiles) if args.profiles else default_profiles()
    corpus = generate_corpus(
        n_users=args.users,
        seqs_per_user_per_condition=args.per_condition,
        seed=args.seed,
        profiles=profiles,
    )
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    by_user: dict[str, list[KeySequence]] = {}
    for seq in corpus:
        by_user.setdefault(seq.meta.user_id, []).append(seq)
    for user, seqs in sorted(by_user.items()):
        (out / f"{user}.kdi").write_bytes(write_canonical(seqs))
    print(f"synthesized {len(corpus)} sequences for {len(by_user)} users "
          f"(seed {args.seed}) into {out}")
    return 0


def cmd_preprocess(args) -> int:
    cfg = resolve_config(args)
    pool = load_pool(args.indir)
    processed, counts = process_pool(pool, cfg.policy(), cfg.m)
    out = Path(args.out) if args.out else Path(
        os.environ.get(CACHE_DIR_ENV, ".")
    ) / "processed.npz"
    out.parent.mkdir(parents=True, exist_ok=True)
    count_map = {d.value: c for d, c in counts.items()}
    write_cache(out, processed, count_map)
    print(f"processed {len(pool)} sequences -> {len(processed)} kept "
          f"({count_map}) at M={cfg.m}; cache {out} (config {cfg.config_hash()}, seed {cfg.seed})")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    if args.cache:
        processed, _ = read_cache(Path(args.cache))
    else:
        pool = load_pool(args.indir)
        processed, _ = process_pool(pool, cfg.policy(), cfg.m)
    # Stratified sequence-level carve so both pools keep both conditions.
    rng = np.random.default_rng([cfg.seed, 0xCA11])
    train_pool: list[ProcessedSequence] = []
    val_pool: list[ProcessedSequence] = []
    for cond in (0, 1):
        members = [p for p in processed if int(p.meta.condition) == cond]
        order = rng.permutation(len(members))
        n_val = max(1, int(round(len(members) * args.val_fraction)))
        val_pool += [members[i] for i in order[:n_val]]
        train_pool += [members[i] for i in order[n_val:]]
    pairs_train = make_pairs(
        train_pool, seed=cfg.seed + 1, target_count=_fit_target(cfg.pairs_train, train_pool)
    )
    pairs_val = make_pairs(
        val_pool, seed=cfg.seed + 2, target_count=_fit_target(cfg.pairs_val, val_pool)
    )

    run = train(pairs_train, pairs_val, cfg.hyper(), cfg.tower())
    for rec in run.records:
        print(f"epoch {rec.epoch:3d}  loss {rec.mean_loss:.6f}  val EER {rec.val_eer:.4f}  "
              f"({rec.wall_time_s:.1f}s)")
    print(f"best epoch {run.best_epoch}; threshold {run.model.threshold:.6f} "
          f"(config {cfg.config_hash()}, seed {cfg.seed})")
    if args.checkpoint:
        Path(args.checkpoint).parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(run.model, args.checkpoint)
        print(f"checkpoint written to {args.checkpoint}")
    return 0


_KEYBOARDS = {k.value: k for k in (Keyboard.K0, Keyboard.K1, Keyboard.K2, Keyboard.K3)}
_CONTEXTS = {c.value: c for c in (Context.GM, Context.GC, Context.RF)}


def _parse_sets(text: str) -> frozenset[DatasetTag]:
    return frozenset(DatasetTag(tok.strip()) for tok in text.split(",") if tok.strip())


def scenario_kinds(args) -> list[ScenarioKind]:
    """Expand CLI scenario flags into one or more concrete scenario kinds."""
    axis_name, _, mode_name = args.scenario.rpartition("-")
    axis = Axis(axis_name)
    mode = SplitMode(mode_name)
    if axis == Axis.USER:
        if mode == SplitMode.SPECIFIC:
            return [ScenarioKind(axis=axis, mode=mode)]
        ratios = tuple(int(x) for x in (args.ratios or "80-10-10").split("-"))
        return [ScenarioKind(axis=axis, mode=mode, ratios=ratios)]
    if axis == Axis.KEYBOARD:
        named = args.held_out or "all"
        keys = list(_KEYBOARDS) if named == "all" else [named]
        return [
            ScenarioKind(axis=axis, mode=mode, held_out_keyboard=_KEYBOARDS[k]) for k in keys
        ]
    if axis == Axis.CONTEXT:
        named = args.held_out or "all"
        keys = list(_CONTEXTS) if named == "all" else [named]
        return [
            ScenarioKind(axis=axis, mode=mode, held_out_context=_CONTEXTS[k]) for k in keys
        ]
    if not args.train_sets or not args.test_sets:
        raise ValueError("dataset scenarios need --train-sets and --test-sets")
    return [
        ScenarioKind(
            axis=axis,
            mode=mode,
            train_sets=_parse_sets(args.train_sets),
            test_sets=_parse_sets(args.test_sets),
        )
    ]


def _fit_target(requested: int, pool: list[ProcessedSequence]) -> int:
    """Largest even pair count the pool can satisfy, capped at the request."""
    n1 = sum(1 for p in pool if int(p.meta.condition) == 1)
    n0 = len(pool) - n1
    cross = n0 * n1
    same = n0 * (n0 - 1) // 2 + n1 * (n1 - 1) // 2
    half = min(requested // 2, cross, same)
    return 2 * half


def run_scenario_row(
    pool: list[KeySequence],
    kind: ScenarioKind,
    cfg: PipelineConfig,
    out_dir: Path | None = None,
):
    """split -> pair -> train -> calibrate -> evaluate for one scenario.

    Returns (row dict, EvalReport).  Writes the split manifest and model
    checkpoint into ``out_dir`` when given.
    """
    spec = kind.split(pool, cfg.seed)
    policy = cfg.policy()
    pools = {}
    for section, ids in (("train", spec.train_pool), ("val", spec.val_pool),
                         ("test", spec.test_pool)):
        seqs = select(pool, ids)
        processed, _ = process_pool(seqs, policy, cfg.m)
        pools[section] = processed

    targets = {
        "train": _fit_target(cfg.pairs_train, pools["train"]),
        "val": _fit_target(cfg.pairs_val, pools["val"]),
        "test": _fit_target(cfg.pairs_test, pools["test"]),
    }
    for section, target in targets.items():
        if target < 2:
            raise PairingError(f"{section} pool of {spec.name} cannot form any balanced pairs")
    pairs = {
        section: make_pairs(pools[section], seed=cfg.seed + off, target_count=targets[section])
        for off, section in ((1, "train"), (2, "val"), (3, "test"))
    }

    run = train(pairs["train"], pairs["val"], cfg.hyper(), cfg.tower())
    scores = pair_scores(run.model, pairs["test"], Mode.INFER)
    scored = [ScoredPair(float(s), p.label) for s, p in zip(scores, pairs["test"])]
    report = evaluate(scored, run.model.threshold)
    _, test_eer = eer_threshold(roc(scored))

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        safe = "".join(ch if ch.isalnum() else "-" for ch in spec.name).strip("-")
        (out_dir / f"{safe}.manifest.txt").write_text(spec.to_manifest())
        save_checkpoint(run.model, out_dir / f"{safe}.ckpt.npz")

    row = {
        "scenario": spec.name,
        "train": kind.train_tag(),
        "test": kind.test_tag(),
        "acc": report.accuracy,
        "f1": report.f1,
        "far": report.far,
        "frr": report.frr,
        "threshold": run.model.threshold,
        "val_eer": min(r.val_eer for r in run.records),
        "test_eer": test_eer,
        "seed": cfg.seed,
        "config": cfg.config_hash(),
        "pairs": targets,
    }
    return row, report


def _append_results(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a") as fh:
        if fresh:
            fh.write(RESULTS_HEADER + "\n")
        for line in lines:
            fh.write(line + "\n")


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    pool = load_pool(args.data)
    results = Path(args.results)
    out_dir = Path(args.out_dir) if args.out_dir else None
    kinds = scenario_kinds(args)

    lines: list[str] = []
    succeeded = 0
    for kind in kinds:
        try:
            row, _ = run_scenario_row(pool, kind, cfg, out_dir)
        except Exception as exc:  # row-level isolation: record and continue
            name = f"{kind.axis.value}-{kind.mode.value}"
            lines.append(f"# failed scenario={name} seed={cfg.seed} "
                         f"config={cfg.config_hash()} reason={exc}")
            print(f"scenario {name} failed: {exc}", file=sys.stderr)
            continue
        lines.append(
            f"# run scenario={row['scenario']} seed={row['seed']} config={row['config']} "
            f"threshold={row['threshold']:.6f} val_eer={row['val_eer']:.4f} "
            f"pairs={row['pairs']['train']}/{row['pairs']['val']}/{row['pairs']['test']}"
        )
        lines.append(
            f"{row['train']}\t{row['test']}\t{row['acc']:.6f}\t{row['f1']:.6f}"
            f"\t{row['far']:.6f}\t{row['frr']:.6f}"
        )
        print(f"{row['scenario']}: acc {row['acc']:.4f} f1 {row['f1']:.4f} "
              f"far {row['far']:.4f} frr {row['frr']:.4f}")
        succeeded += 1
    _append_results(results, lines)
    return 0 if succeeded else 1


def cmd_report(args) -> int:
    path = Path(args.results)
    if not path.exists():
        raise FileNotFoundError(f"no results table at {path}")
    rows = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line == RESULTS_HEADER:
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise ValueError(f"{path}:{line_no}: expected 6 columns, got {len(parts)}")
        try:
            rows.append((parts[0], parts[1], *(float(x) for x in parts[2:])))
        except ValueError:
            raise ValueError(f"{path}:{line_no}: non-numeric metric in {line!r}") from None
    if not rows:
        print("no results")
        return 0
    rows.sort(key=lambda r: (r[0], r[1]))
    print(f"{'Train':<14}{'Test':<14}{'Acc.':>8}{'F1':>8}{'FAR':>8}{'FRR':>8}")
    for train_tag, test_tag, acc, f1, far, frr in rows:
        print(f"{train_tag:<14}{test_tag:<14}"
              f"{100 * acc:>8.2f}{100 * f1:>8.2f}{100 * far:>8.2f}{100 * frr:>8.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kdi",
        description="Keystroke-dynamics detector for AI-assisted writing: "
        "data tooling, training, and scenario evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert external corpus files to canonical format")
    p.add_argument("--format", required=True, choices=[f.value for f in ExternalFormat])
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--out", dest="outdir", required=True)
    p.add_argument("--units", choices=("ms", "us"),
                   help="source timestamp units (default: per-format documented value)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic corpus in canonical format")
    p.add_argument("--users", type=int, default=40)
    p.add_argument("--per-condition", dest="per_condition", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profiles", help="alternative generator defaults file")
    p.add_argument("--out", dest="outdir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="filter + normalize + pad into a feature cache")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--out", help=f"cache file (default: ${CACHE_DIR_ENV}/processed.npz)")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a detector on preprocessed data")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="indir", help="canonical data directory")
    src.add_argument("--cache", help="feature cache from preprocess")
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=0.2)
    p.add_argument("--checkpoint", help="where to write the trained model")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run scenario suites: split, pair, train, evaluate")
    p.add_argument("--data", required=True, help="canonical data file or directory")
    p.add_argument(
        "--scenario",
        required=True,
        choices=[
            "user-specific", "user-agnostic",
            "keyboard-specific", "keyboard-agnostic",
            "context-specific", "context-agnostic",
            "dataset-specific", "dataset-agnostic",
        ],
    )
    p.add_argument("--held-out", dest="held_out",
                   help="keyboard (K0..K3), context (GM/GC/RF), or 'all'")
    p.add_argument("--ratios", help="user-agnostic percentages, e.g. 80-10-10")
    p.add_argument("--train-sets", dest="train_sets", help="dataset tags, e.g. S,B")
    p.add_argument("--test-sets", dest="test_sets", help="dataset tags, e.g. P")
    p.add_argument("--results", required=True, help="append-only results table")
    p.add_argument("--out-dir", dest="out_dir", help="manifests and checkpoints")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render the results table")
    p.add_argument("--results", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
