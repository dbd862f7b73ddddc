"""
Command handlers behind the ``affectfuse`` CLI.

Every handler takes the parsed arguments and a ``RunContext`` and returns a
process exit code. Handlers communicate only through files under the corpus
and work directories; each one finishes by writing a run manifest.
"""

from __future__ import annotations

import argparse
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from affectfuse.affectfuse import logger as app_logger
from core import feature_store
from core.annotations import (
    COMBINATION_RULE,
    ContingencyTable,
    agreement_summary,
    audio_rater_tracks,
    build_audio_gold,
    build_vad_gold,
    build_video_gold,
    contingency_audio_video,
    contingency_by_country,
    filter_avatar_overlap,
    label_distribution,
    segment_count,
)
from core.attention import AttentionResult, lookingness, video_attention
from core.classifier import fit_classifier, save_model
from core.digest import build_run_manifest, write_run_manifest
from core.enrichment import FoldEnrichment, SegmentCorpus, speech_enrichment
from core.evaluation import EvalReport, ExperimentSpec, make_folds, mlp_trainer, run_experiment
from core.experiments import build_matrix, parse_modalities
from core.feature_store import CorpusLayout, SubjectInfo, WorkLayout
from core.functionals import PERCENTILE_METHOD, compute_window_features
from core.input_validator import validate_inputs
from core.report import comparisons_table, report_render
from core.settings import PipelineConfig
from core.significance import pairwise_comparisons
from core.sync import SubjectStreams, assemble_dataset
from core.synth import spec_from_dict, synth_corpus
from core.trajectories import MEDIAN_EDGE_MODE, make_windows, prepare_trajectory, video_bounds_ms
from shared.label_sets import (
    AUDIO_SEGMENT_LABELS,
    COUNTRIES,
    GAZE_DIM,
    REDUCED_AUDIO,
    REDUCED_VIDEO,
    VAD_CHANNELS,
    VIDEO_FRAME_LABELS,
    WHOLE,
    reduced_labels,
)
from shared.records import SampleMatrix

_LOGGER = app_logger.get_logger()

EXIT_OK = 0
EXIT_VALIDATION = 1
SEED_COMPONENTS = ("enrichment", "folds", "experiments", "train")


@dataclass(frozen=True)
class RunContext:
    config: PipelineConfig

    @property
    def corpus(self) -> CorpusLayout:
        return CorpusLayout(self.config.corpus_dir)

    @property
    def work(self) -> WorkLayout:
        return WorkLayout(self.config.work_dir)

    def component_seed(self, component: str) -> int:
        """Independent child seed of the root seed for one pipeline component."""
        children = np.random.SeedSequence(self.config.seed).spawn(len(SEED_COMPONENTS))
        return int(children[SEED_COMPONENTS.index(component)].generate_state(1)[0])

    def metadata(self, **extra: object) -> Dict[str, object]:
        return {
            **self.config.metadata(),
            "combination_rule": COMBINATION_RULE,
            "percentile_method": PERCENTILE_METHOD,
            "median_edge_mode": MEDIAN_EDGE_MODE,
            **extra,
        }

    def finish(self, command: str, root: Path, **extra: object) -> None:
        manifest = build_run_manifest(
            command,
            root,
            config=self.config.source,
            seed=self.config.seed,
            metadata=self.metadata(**extra),
        )
        write_run_manifest(Path(root) / "manifest.json", manifest)
        _LOGGER.info("{} finished; manifest lists {} files.", command, len(manifest["files"]))


def _subjects(ctx: RunContext) -> List[SubjectInfo]:
    return feature_store.read_subjects(ctx.corpus.subjects_csv)


# --- synth / validate ----------------------------------------------------------------


def cmd_synth(args: argparse.Namespace, ctx: RunContext) -> int:
    out = Path(args.out) if args.out else ctx.corpus.root
    spec = spec_from_dict(ctx.config.synth, seed=ctx.config.seed)
    result = synth_corpus(spec, out)
    ctx.finish("synth", out, subjects=len(result.subjects), effect_audio=spec.effect_audio, effect_video=spec.effect_video)
    print(f"Wrote {result.n_files} files for {len(result.subjects)} subjects to {out}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, ctx: RunContext) -> int:
    paths = [Path(p) for p in args.paths] or [ctx.corpus.root]
    report = validate_inputs(paths)
    for violation in report.violations:
        print(violation)
    if not report.ok:
        return EXIT_VALIDATION
    print(f"OK: {len(report.row_counts)} files, {sum(report.row_counts.values())} rows")
    return EXIT_OK


# --- gold standards and agreement ----------------------------------------------------------


def _gold_audio(ctx: RunContext, subject: SubjectInfo, majority: float, avatar_dir: Optional[Path]) -> None:
    events = feature_store.read_annotations(ctx.corpus.annotations(subject.subject_id))
    segments = build_audio_gold(events, subject.session_ms, majority, subject_id=subject.subject_id)
    vad = build_vad_gold(events, subject.session_ms, majority)
    avatar_path = (avatar_dir / f"{subject.subject_id}.csv") if avatar_dir else ctx.corpus.avatar(subject.subject_id)
    intervals = feature_store.read_avatar(avatar_path)
    kept = filter_avatar_overlap(segments, intervals, ctx.config.annotations.avatar_max_fraction)
    feature_store.write_audio_gold(ctx.work.audio_gold(subject.subject_id), kept)
    feature_store.write_vad_gold(ctx.work.vad_gold(subject.subject_id), subject.subject_id, vad, segment_count(subject.session_ms))


def _gold_video(ctx: RunContext, subject: SubjectInfo) -> None:
    fps, rater_a, rater_b = feature_store.read_frame_labels(ctx.corpus.frames(subject.subject_id))
    track = build_video_gold(rater_a, rater_b, subject_id=subject.subject_id, fps=fps)
    feature_store.write_video_gold(ctx.work.video_gold(subject.subject_id), track)


def _gold_summaries(ctx: RunContext, subjects: Sequence[SubjectInfo]) -> None:
    """Label distributions and audio x video contingency tables per country, from whatever gold exists."""
    audio: Dict[str, List[str]] = {}
    video: Dict[str, List[str]] = {}
    tables: Dict[str, ContingencyTable] = {}
    for subject in subjects:
        audio_path = ctx.work.audio_gold(subject.subject_id)
        video_path = ctx.work.video_gold(subject.subject_id)
        segments = feature_store.read_audio_gold(audio_path) if audio_path.exists() else None
        track = feature_store.read_video_gold(video_path) if video_path.exists() else None
        if segments is not None:
            audio.setdefault(subject.country, []).extend(s.label for s in segments)
        if track is not None:
            video.setdefault(subject.country, []).extend(track.labels)
        if segments is not None and track is not None:
            part = contingency_audio_video(segments, track, REDUCED_AUDIO, REDUCED_VIDEO)
            tables[subject.country] = tables[subject.country] + part if subject.country in tables else part

    for label_type, groups, vocabulary in (("audio", audio, AUDIO_SEGMENT_LABELS), ("video", video, VIDEO_FRAME_LABELS)):
        if groups:
            groups[WHOLE] = [label for labels in groups.values() for label in labels]
            frame = label_distribution(groups, vocabulary).rename_axis("country").reset_index()
            feature_store.write_table(ctx.work.distribution_csv(label_type), frame)
    if tables:
        ordered = {c: tables[c] for c in COUNTRIES if c in tables}
        feature_store.write_table(ctx.work.contingency_csv, contingency_by_country(ordered, WHOLE))
        _LOGGER.info(
            "Contingency over {} audio segments ({} skipped).",
            sum(t.total for t in ordered.values()),
            sum(t.skipped for t in ordered.values()),
        )


def cmd_goldstd(args: argparse.Namespace, ctx: RunContext) -> int:
    majority = args.majority_fraction if args.majority_fraction is not None else ctx.config.annotations.majority_fraction
    avatar_dir = Path(args.avatar_track) if args.avatar_track else None
    subjects = _subjects(ctx)
    for subject in subjects:
        if args.channel in ("audio", "both"):
            _gold_audio(ctx, subject, majority, avatar_dir)
        if args.channel in ("video", "both"):
            _gold_video(ctx, subject)
    _gold_summaries(ctx, subjects)
    ctx.finish("goldstd", ctx.work.root, channel=args.channel, majority_fraction=majority)
    print(f"Gold standards written for {len(subjects)} subjects under {ctx.work.gold_dir}")
    return EXIT_OK


def cmd_kappa(args: argparse.Namespace, ctx: RunContext) -> int:
    rows = []
    for subject in _subjects(ctx):
        events = feature_store.read_annotations(ctx.corpus.annotations(subject.subject_id))
        present = {e.channel for rater_events in events.values() for e in rater_events}
        summaries = {
            channel: agreement_summary(audio_rater_tracks(events, subject.session_ms, channel))
            for channel in ("audio",) + VAD_CHANNELS
            if channel in present
        }
        _, rater_a, rater_b = feature_store.read_frame_labels(ctx.corpus.frames(subject.subject_id))
        summaries["video"] = agreement_summary({"a": rater_a, "b": rater_b})
        for channel, summary in summaries.items():
            for pair, kappa in summary["pairs"].items():
                rows.append({"scope": "subject", "country": subject.country, "subject_id": subject.subject_id, "channel": channel, "pair": pair, "kappa": kappa})

    frame = pd.DataFrame(rows, columns=["scope", "country", "subject_id", "channel", "pair", "kappa"])
    means = (
        frame.groupby(["country", "channel"], sort=True)["kappa"].mean().reset_index().assign(scope="country_mean", subject_id="", pair="")
    )
    overall = frame.groupby("channel", sort=True)["kappa"].mean().reset_index().assign(scope="country_mean", country=WHOLE, subject_id="", pair="")
    frame = pd.concat([frame, means, overall], ignore_index=True)[list(frame.columns)]
    feature_store.write_table(ctx.work.agreement_csv, frame)
    for r in overall.itertuples(index=False):
        print(f"{r.channel}: mean kappa {r.kappa:.3f}")
    ctx.finish("kappa", ctx.work.root)
    return EXIT_OK


# --- gaze features ----------------------------------------------------------------------------


def _trajectory_paths(ctx: RunContext, source: Optional[str]) -> List[Path]:
    path = Path(source) if source else ctx.corpus.root / "trajectories"
    if path.is_dir():
        return sorted(path.glob("*.csv"))
    return [path]


def _cluster_rows(subject_id: str, result: AttentionResult) -> List[Dict[str, object]]:
    rows = []
    for k, cluster in enumerate(result.clusters):
        rows.append(
            {
                "subject_id": subject_id,
                "cluster": k,
                "center_x": float(cluster.center[0]),
                "center_y": float(cluster.center[1]),
                "cov_xx": float(cluster.covariance[0, 0]),
                "cov_xy": float(cluster.covariance[0, 1]),
                "cov_yy": float(cluster.covariance[1, 1]),
                "member_count": int(cluster.member_count),
                "support": int(cluster.support),
                "bandwidth": float(result.bandwidth),
                "is_coach": int(k == 0),
            }
        )
    return rows


def cmd_gazefeat(args: argparse.Namespace, ctx: RunContext) -> int:
    settings = ctx.config.trajectories
    attention = ctx.config.attention
    window_ms = args.window_ms or settings.window_ms
    stride_ms = args.center_stride_ms or settings.center_stride_ms
    out_dir = Path(args.out) if args.out else ctx.work.root / "gaze" / "windows"
    glasses = {s.subject_id: s.glasses for s in _subjects(ctx)} if ctx.corpus.subjects_csv.exists() else {}

    clusters: List[Dict[str, object]] = []
    candidates = dropped = unweighted = 0
    for path in _trajectory_paths(ctx, args.input):
        trajectory = prepare_trajectory(
            feature_store.read_trajectory(path), median_width=settings.median_width, eye_model=settings.eye_model
        )
        attended = video_attention(
            trajectory,
            bandwidth=attention.bandwidth,
            bandwidth_rule=attention.bandwidth_rule,
            formula=attention.weight_formula,
            prefilter_factor=attention.prefilter_iqr_factor,
        )
        windows = make_windows(trajectory, window_ms, stride_ms, settings.min_span_ms, settings.max_invalid)
        candidates += windows.n_candidates
        dropped += windows.n_dropped
        flag = glasses.get(trajectory.subject_id, 0)
        vectors = []
        for window in windows:
            looking, no_weights = lookingness(attended.weights[list(window.frame_indices)])
            unweighted += no_weights
            vectors.append(compute_window_features(trajectory, window, looking, flag).combined_228)
        feature_store.write_window_features(
            out_dir / f"{trajectory.subject_id}.csv",
            trajectory.subject_id,
            [w.center_ms for w in windows],
            np.asarray(vectors).reshape(len(vectors), -1) if vectors else np.zeros((0, GAZE_DIM)),
            window_ms=window_ms,
            video_bounds_ms=video_bounds_ms(trajectory),
        )
        clusters.extend(_cluster_rows(trajectory.subject_id, attended))

    feature_store.write_clusters(out_dir.parent / "clusters.csv", clusters)
    drop_rate = dropped / candidates if candidates else 0.0
    _LOGGER.info("Gaze windows: {} of {} candidates dropped ({:.1%}).", dropped, candidates, drop_rate)
    if unweighted:
        _LOGGER.warning("{} gaze windows have no weighted frames; their looking-at-coach codes are all zero.", unweighted)
    ctx.finish(
        "gazefeat",
        ctx.work.root,
        window_ms=window_ms,
        center_stride_ms=stride_ms,
        window_drop_rate=drop_rate,
        unweighted_windows=unweighted,
    )
    print(f"Gaze windows written to {out_dir} ({drop_rate:.1%} of windows dropped)")
    return EXIT_OK


# --- synchronisation ----------------------------------------------------------------------------


def _audio_labels(ctx: RunContext, subject: SubjectInfo, indices: Sequence[int]) -> Dict[str, List[Optional[str]]]:
    by_index = {s.segment_index: s.label for s in feature_store.read_audio_gold(ctx.work.audio_gold(subject.subject_id))}
    vad = feature_store.read_vad_gold(ctx.work.vad_gold(subject.subject_id))
    labels: Dict[str, List[Optional[str]]] = {"audio": [by_index.get(i) for i in indices]}
    for channel in VAD_CHANNELS:
        track = vad.get(channel, [])
        labels[channel] = [track[i] if i < len(track) else None for i in indices]
    return labels


def _segment_corpus(ctx: RunContext, subjects: Sequence[SubjectInfo]) -> Tuple[SegmentCorpus, List[Tuple[str, List[int]]]]:
    """Every subject's segment embeddings and head labels, plus the segment indices per subject."""
    blocks = []
    owners: List[str] = []
    index: List[Tuple[str, List[int]]] = []
    labels: Dict[str, List[Optional[str]]] = {channel: [] for channel in ("audio",) + VAD_CHANNELS}
    for subject in subjects:
        embeddings = feature_store.read_embeddings(ctx.corpus.embeddings(subject.subject_id))
        indices = sorted(embeddings)
        blocks.append(np.vstack([embeddings[i] for i in indices]))
        owners.extend([subject.subject_id] * len(indices))
        index.append((subject.subject_id, indices))
        for channel, values in _audio_labels(ctx, subject, indices).items():
            labels[channel].extend(values)
    return SegmentCorpus(subjects=np.array(owners, dtype=object), embeddings=np.vstack(blocks), labels=labels), index


def ensure_audio_features(ctx: RunContext, subjects: Sequence[SubjectInfo], *, force: bool = False) -> None:
    """
    Train the enrichment heads over every subject's segments and write the 1031-wide features.

    Cross-validation replaces the head columns fold by fold; see ``cmd_eval``.
    """
    if not force and ctx.work.enrichment_json.exists() and all(ctx.work.audio_features(s.subject_id).exists() for s in subjects):
        return
    corpus, index = _segment_corpus(ctx, subjects)
    settings = ctx.config.enrichment
    enriched, heads = speech_enrichment(
        corpus.embeddings,
        corpus.labels,
        settings.heads,
        ctx.component_seed("enrichment"),
        target_width=settings.target_width,
        steps=settings.steps,
    )
    offset = 0
    for subject_id, indices in index:
        feature_store.write_audio_features(ctx.work.audio_features(subject_id), subject_id, indices, enriched[offset : offset + len(indices)])
        offset += len(indices)
    feature_store.write_json(
        ctx.work.enrichment_json,
        {
            "heads": [{"name": h.name, "channel": h.channel, "classes": list(h.classes), "output": h.output} for h in heads.specs],
            "train_accuracy": heads.train_accuracy,
            "target_width": settings.target_width,
            "steps": settings.steps,
        },
    )


def load_streams(ctx: RunContext, subjects: Sequence[SubjectInfo], modalities: Sequence[str]) -> List[SubjectStreams]:
    streams = []
    for subject in subjects:
        sid = subject.subject_id
        segments = feature_store.read_audio_gold(ctx.work.audio_gold(sid))
        video_path = ctx.work.video_gold(sid)
        track = feature_store.read_video_gold(video_path) if video_path.exists() else None
        stream = SubjectStreams(subject_id=sid, country=subject.country, segments=segments, frames=track)
        if "A" in modalities:
            stream.audio_features = feature_store.read_audio_features(ctx.work.audio_features(sid))
        if "F" in modalities:
            n_frames = len(track) if track is not None else len(feature_store.read_trajectory(ctx.corpus.trajectory(sid)))
            stream.face_features = feature_store.read_face(ctx.corpus.face(sid), n_frames)
        if "G" in modalities:
            windows, vectors = feature_store.read_window_features(ctx.work.gaze_windows(sid))
            stream.gaze_windows = windows
            stream.gaze_vectors = vectors
        streams.append(stream)
    return streams


def build_sample_matrix(
    ctx: RunContext,
    subjects: Sequence[SubjectInfo],
    label_type: str,
    modalities: Sequence[str],
    speaking: str = "all",
) -> SampleMatrix:
    if "A" in modalities:
        ensure_audio_features(ctx, subjects)
    matrix = assemble_dataset(
        load_streams(ctx, subjects, modalities), label_type, modalities, speaking, face_pooling=ctx.config.face_pooling
    )
    feature_store.write_matrix(ctx.work.matrix(feature_store.matrix_name(label_type, matrix.modalities, speaking)), matrix)
    return matrix


def cmd_sync(args: argparse.Namespace, ctx: RunContext) -> int:
    modalities = parse_modalities(args.modalities)
    subjects = _subjects(ctx)
    if "A" in modalities:
        ensure_audio_features(ctx, subjects, force=args.refit_enrichment)
    matrix = build_sample_matrix(ctx, subjects, args.label_type, modalities, args.speaking)
    path = ctx.work.matrix(feature_store.matrix_name(args.label_type, matrix.modalities, args.speaking))
    ctx.finish("sync", ctx.work.root, label_type=args.label_type, modalities=list(matrix.modalities), retention=matrix.retention)
    print(f"{len(matrix)} rows x {matrix.features().shape[1]} features -> {path}")
    return EXIT_OK


# --- training and evaluation ---------------------------------------------------------------------


def cmd_train(args: argparse.Namespace, ctx: RunContext) -> int:
    matrix = feature_store.read_matrix(Path(args.matrix))
    labels = matrix.labels()
    keep = np.array([label is not None for label in labels], dtype=bool)
    arch = args.arch or ctx.config.train.arch
    config = ctx.config.train.train_config(epochs=args.epochs)
    result = fit_classifier(
        matrix.features()[keep], list(labels[keep]), reduced_labels(matrix.label_type), arch, config, ctx.component_seed("train")
    )
    out = Path(args.out) if args.out else ctx.work.model(Path(args.matrix).stem)
    save_model(result.model, out)
    ctx.finish("train", ctx.work.root, arch=arch, final_loss=result.loss_curve[-1], steps=result.steps)
    print(f"Trained {arch} on {int(keep.sum())} rows; final loss {result.loss_curve[-1]:.4f} -> {out}")
    return EXIT_OK


def _experiment_matrix(
    ctx: RunContext, subjects: Sequence[SubjectInfo], spec: ExperimentSpec, cache: Dict[Tuple[str, Tuple[str, ...]], SampleMatrix]
) -> SampleMatrix:
    key = (spec.label_type, spec.modalities)
    if key not in cache:
        path = ctx.work.matrix(feature_store.matrix_name(spec.label_type, spec.modalities, "all"))
        if path.exists():
            cache[key] = feature_store.read_matrix(path)
        else:
            cache[key] = build_sample_matrix(ctx, subjects, spec.label_type, spec.modalities)
    return cache[key]


def _fold_enrichment(ctx: RunContext, subjects: Sequence[SubjectInfo]) -> FoldEnrichment:
    corpus, _ = _segment_corpus(ctx, subjects)
    settings = ctx.config.enrichment
    return FoldEnrichment(
        corpus, settings.heads, ctx.component_seed("enrichment"), target_width=settings.target_width, steps=settings.steps
    )


def cmd_eval(args: argparse.Namespace, ctx: RunContext) -> int:
    subjects = _subjects(ctx)
    settings = ctx.config.evaluation
    plan = make_folds({s.subject_id: s.country for s in subjects}, settings.folds, ctx.component_seed("folds"))
    feature_store.write_json(ctx.work.folds_json, plan.to_dict())
    specs = build_matrix(ctx.config.experiments)
    if args.only:
        specs = [s for s in specs if s.name in set(args.only)]
    experiment_seed = ctx.component_seed("experiments")
    cache: Dict[Tuple[str, Tuple[str, ...]], SampleMatrix] = {}
    enrichment = _fold_enrichment(ctx, subjects) if any("A" in s.modalities for s in specs) else None
    for spec in specs:
        matrix = _experiment_matrix(ctx, subjects, spec, cache)
        report = run_experiment(
            matrix,
            spec,
            plan,
            trainer=mlp_trainer(ctx.config.train.train_config(epochs=spec.epochs, budget=spec.budget)),
            candidates=ctx.config.train.candidates,
            n_runs=settings.runs,
            seed=experiment_seed,
            validation_fraction=settings.validation_fraction,
            refit=enrichment.refresh if enrichment is not None else None,
        )
        report.metadata.update(ctx.metadata(retention=matrix.retention))
        if enrichment is not None and "A" in spec.modalities:
            report.metadata["enrichment_heads"] = "per_fold"
        feature_store.write_json(ctx.work.report(spec.name), report.to_dict())
    ctx.finish("eval", ctx.work.root, experiments=len(specs), folds=plan.k, runs=settings.runs)
    print(f"Evaluated {len(specs)} experiments; reports in {ctx.work.reports_dir}")
    return EXIT_OK


def load_reports(directory: Path) -> List[EvalReport]:
    return [EvalReport.from_dict(feature_store.read_json(p)) for p in sorted(Path(directory).glob("*.json"))]


GROUP_KEYS: Mapping[str, Callable[[EvalReport], str]] = {
    "test_country": lambda r: r.spec.test_country,
    "label_and_country": lambda r: f"{r.spec.label_type}:{r.spec.test_country}",
    "all": lambda r: "all",
}


def cmd_stats(args: argparse.Namespace, ctx: RunContext) -> int:
    directory = Path(args.reports) if args.reports else ctx.work.reports_dir
    reports = load_reports(directory)
    q = args.q if args.q is not None else ctx.config.evaluation.q
    grouping = ctx.config.evaluation.bky_grouping
    comparisons = pairwise_comparisons(reports, q=q, group_key=GROUP_KEYS[grouping])
    out = Path(args.out) if args.out else ctx.work.comparisons_csv
    feature_store.write_table(out, comparisons_table(comparisons))
    rejected = sum(c.reject for c in comparisons)
    ctx.finish("stats", ctx.work.root, q=q, comparisons=len(comparisons), rejected=rejected)
    print(f"{len(comparisons)} comparisons, {rejected} significant at q={q} -> {out}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace, ctx: RunContext) -> int:
    reports = load_reports(Path(args.reports) if args.reports else ctx.work.reports_dir)
    out = Path(args.out) if args.out else ctx.work.render_dir
    result = report_render(reports, out)
    ctx.finish("report", ctx.work.root, tables=len(result.tables), charts=len(result.charts))
    print(f"{len(result.tables)} tables and {len(result.charts)} charts -> {out}")
    return EXIT_OK


def with_overrides(config: PipelineConfig, **changes: object) -> PipelineConfig:
    return dataclasses.replace(config, **changes)


HANDLERS: Mapping[str, Callable[[argparse.Namespace, RunContext], int]] = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "goldstd": cmd_goldstd,
    "kappa": cmd_kappa,
    "gazefeat": cmd_gazefeat,
    "sync": cmd_sync,
    "train": cmd_train,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "report": cmd_report,
}
