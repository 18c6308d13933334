"""Subcommand implementations. Each takes the parsed arguments and the app config."""

import argparse
import json
import logging
import sys
from pathlib import Path

from pydantic import BaseModel, ConfigDict

from app.core.config import AppConfig
from app.echo.features import (
    FeatureMatrix,
    build_feature_matrix,
    fit_scale,
    standardize,
)
from app.echo.forest import ForestConfig, cross_validate, evaluate, predict, split_frames, train
from app.echo.models import (
    FitResult,
    Frame,
    GainFit,
    InitConfig,
    LMConfig,
    PreprocessConfig,
    StagePlan,
)
from app.echo.preprocess import preprocess_frame
from app.echo.staged_fit import fit_frames, reconstruct
from app.echo.synth import (
    BENCHMARK_INIT,
    DEFAULT_COMPONENTS,
    SynthSpec,
    compare_skew,
    generate,
    random_components,
    score_denoise,
    separable_feature_set,
    skewed_corpus,
)
from app.infra.files._documents import write_text
from app.infra.files.feature_files import features_to_csv, read_features
from app.infra.files.forest_store import write_forest
from app.infra.files.frame_files import read_frames, write_frame, write_frames
from app.infra.files.params_store import params_json, read_params, write_params
from app.shared.constants import OPERATING_FREQUENCY_KHZ
from app.shared.exceptions import DegenerateTrainingError, FormatError, UsageError

logger = logging.getLogger(__name__)


class DenoiseRow(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    frame_index: int
    n_components: int
    psnr_raw_db: float | None = None
    psnr_fit_db: float | None = None
    gain_db: float | None = None


class DenoiseRun(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    frames: list[DenoiseRow]


class ClassifyResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    columns: list[str]
    f1: float
    precision: float
    recall: float
    recall_defined: bool
    confusion: list[list[int]]
    importances: dict[str, float]
    oob_score: float | None = None
    cv_f1: list[float] | None = None
    train_frames: list[int]
    test_frames: list[int]
    train_rows: int
    test_rows: int


def _emit(text: str, args: argparse.Namespace) -> None:
    if args.output:
        write_text(Path(args.output), text)
    else:
        sys.stdout.write(text)


def _init_config(args: argparse.Namespace, base: InitConfig | None = None) -> InitConfig:
    """Detection settings; flags given on the command line override ``base``."""
    flags = {
        "tau": args.tau,
        "grad_separation": args.grad_sep,
        "normalize_gradient": args.normalize_gradient,
        "min_rel_amplitude": args.min_rel_amplitude,
        "sigma_rule": args.sigma_rule,
        "f_e": args.fe,
        "sigma_init": args.sigma_init,
    }
    settings = (base or InitConfig()).model_dump()
    settings.update({name: value for name, value in flags.items() if value is not None})
    return InitConfig(**settings)


def _preprocess_config(args: argparse.Namespace) -> PreprocessConfig:
    if (args.gain_a is None) != (args.gain_b is None):
        raise UsageError("--gain-a and --gain-b must be given together")
    gain = None if args.gain_a is None else GainFit(a=args.gain_a, b=args.gain_b)
    return PreprocessConfig(
        bandpass=not args.no_bandpass,
        rel_bandwidth=args.bandwidth,
        center=args.fe,
        gain=gain,
        fit_gain=args.fit_gain,
        blind_zone=args.blind_zone,
    )


def _load_frames(path: str, args: argparse.Namespace) -> list[Frame]:
    """Read frames, filling a missing operating frequency with the transducer's."""
    frames = read_frames(Path(path))
    if args.fe is not None or args.estimate_fe:
        return frames
    return [
        frame if frame.f_e else frame.model_copy(update={"f_e": OPERATING_FREQUENCY_KHZ})
        for frame in frames
    ]


def _conditioned(frames: list[Frame], args: argparse.Namespace) -> list[Frame]:
    cfg = _preprocess_config(args)
    return [preprocess_frame(frame, cfg) for frame in frames]


def _fit_all(frames: list[Frame], args: argparse.Namespace, config: AppConfig) -> list[FitResult]:
    return fit_frames(
        frames,
        _init_config(args),
        StagePlan.by_name(args.plan),
        LMConfig(max_iterations=args.max_iter),
        threads=config.threads,
    )


def cmd_synth(args: argparse.Namespace, config: AppConfig) -> None:
    """Write gt.csv, noisy.csv (with sidecars), spec.json and gt_params.json."""
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    duration = args.samples / args.fs
    defaults = DEFAULT_COMPONENTS[: args.k]
    if args.k <= len(DEFAULT_COMPONENTS) and all(p.mu < duration for p in defaults):
        components = defaults
    else:
        components = random_components(args.k, args.seed, duration, carrier=args.fe)
    spec = SynthSpec(
        components=components,
        fs_khz=args.fs,
        n_samples=args.samples,
        noise_sigma=args.noise,
        quantize=not args.no_quantize,
        seed=args.seed,
        f_e=args.fe,
    )
    signal = generate(spec)
    out = Path(args.output or ".")
    paths = {
        "gt": write_frame(signal.gt, out / "gt.csv"),
        "noisy": write_frame(signal.noisy, out / "noisy.csv"),
        "spec": write_text(out / "spec.json", spec.model_dump_json(indent=2) + "\n"),
        "params": write_params([FitResult(params=signal.params)], out / "gt_params.json"),
    }
    logger.info("cli.synth.complete k=%d samples=%d out=%s", args.k, args.samples, out)
    summary = {key: path.as_posix() for key, path in paths.items()}
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")


def cmd_fit(args: argparse.Namespace, config: AppConfig) -> None:
    frames = _conditioned(_load_frames(args.input, args), args)
    fits = _fit_all(frames, args, config)
    if args.format == "csv":
        _emit(features_to_csv(build_feature_matrix(fits, frames)), args)
    else:
        _emit(params_json(fits), args)


def _by_index(items: list[FitResult]) -> dict[int, FitResult]:
    return {fit.params.frame_index: fit for fit in items}


def cmd_denoise(args: argparse.Namespace, config: AppConfig) -> None:
    """Reconstruct every input frame; score against --gt when given.

    With --output, the value is a directory receiving recon_XXXX.csv files and
    report.json; otherwise the report goes to stdout.
    """
    raw = _load_frames(args.input, args)
    frames = _conditioned(raw, args)
    if args.from_params:
        stored = _by_index(read_params(Path(args.from_params)))
        missing = [f.frame_index for f in frames if f.frame_index not in stored]
        if missing:
            raise FormatError(f"{args.from_params}: no parameters for frames {missing}")
        fits = [stored[f.frame_index] for f in frames]
    else:
        fits = _fit_all(frames, args, config)
    truth = {f.frame_index: f for f in read_frames(Path(args.gt))} if args.gt else {}

    rows = []
    reconstructions = []
    for noisy, frame, fit in zip(raw, frames, fits):
        recon = reconstruct(fit, frame.x)
        reconstructions.append(frame.with_samples(recon))
        row = DenoiseRow(frame_index=frame.frame_index, n_components=len(fit.params))
        if args.gt:
            if frame.frame_index not in truth:
                raise FormatError(f"{args.gt}: no ground truth for frame {frame.frame_index}")
            report = score_denoise(truth[frame.frame_index], noisy, recon)
            row = row.model_copy(
                update={
                    "psnr_raw_db": report.psnr_raw_db,
                    "psnr_fit_db": report.psnr_fit_db,
                    "gain_db": report.gain_db,
                }
            )
        rows.append(row)

    if args.format == "csv":
        lines = ["frame,n_components,psnr_raw_db,psnr_fit_db,gain_db"]
        for row in rows:
            values = (row.psnr_raw_db, row.psnr_fit_db, row.gain_db)
            cells = ["" if v is None else repr(v) for v in values]
            lines.append(f"{row.frame_index},{row.n_components}," + ",".join(cells))
        text = "\n".join(lines) + "\n"
    else:
        text = DenoiseRun(frames=rows).model_dump_json(indent=2) + "\n"

    if args.output:
        out = Path(args.output)
        write_frames(reconstructions, out, stem="recon")
        write_text(out / ("report.csv" if args.format == "csv" else "report.json"), text)
    else:
        sys.stdout.write(text)


def _parse_gate(text: str) -> tuple[float, float]:
    try:
        start, end = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"--gate expects START:END in ms, got {text!r}") from exc
    if not start <= end:
        raise UsageError(f"--gate start {start} exceeds end {end}")
    return start, end


def _relabel(features: FeatureMatrix, gate: tuple[float, float]) -> FeatureMatrix:
    mu = features.column("mu")
    return features.model_copy(update={"labels": ((mu >= gate[0]) & (mu <= gate[1])).astype(int)})


def _classification_rows(args: argparse.Namespace) -> FeatureMatrix:
    gate = _parse_gate(args.gate) if args.gate else None
    if args.bundled:
        features = separable_feature_set(seed=args.seed)
    elif args.input is None:
        raise UsageError("classify needs an input path or --bundled")
    elif Path(args.input).suffix == ".json":
        if not args.frames or gate is None:
            raise UsageError("params input needs --frames and --gate")
        fits = _by_index(read_params(Path(args.input)))
        frames = [
            f
            for f in _conditioned(_load_frames(args.frames, args), args)
            if f.frame_index in fits
        ]
        features = build_feature_matrix([fits[f.frame_index] for f in frames], frames, gate)
    else:
        features = read_features(Path(args.input))
        if gate is not None:
            features = _relabel(features, gate)
    if features.labels is None:
        raise UsageError("feature rows carry no labels; pass --gate")
    return features


def cmd_classify(args: argparse.Namespace, config: AppConfig) -> None:
    features = _classification_rows(args)
    columns = [c for c in args.columns.split(",") if c and c not in set(args.exclude)]
    if not columns:
        raise UsageError("no feature columns left after --exclude")
    selected = features.select(columns)
    forest_cfg = ForestConfig(
        n_trees=args.trees,
        max_depth=args.depth,
        min_samples_leaf=args.min_leaf,
        min_samples_split=args.min_split,
        features_per_split=args.features_per_split,
        seed=args.seed,
        bootstrap=not args.no_bootstrap,
    )

    train_part, test_part = split_frames(selected, args.train_frac, args.seed)
    scale = fit_scale(train_part)
    train_rows = standardize(train_part, scale)
    test_rows = standardize(test_part, scale)
    forest = train(train_rows, forest_cfg)
    report = evaluate(predict(forest, test_rows).labels, test_rows.labels)

    oob = None
    if forest_cfg.bootstrap:
        try:
            oob = forest.oob_score(train_rows)
        except DegenerateTrainingError:
            oob = None
    cv = cross_validate(selected, forest_cfg, args.cv, args.seed) if args.cv else None
    if args.save_forest:
        write_forest(forest, Path(args.save_forest), scale)

    result = ClassifyResult(
        columns=columns,
        f1=report.f1,
        precision=report.precision,
        recall=report.recall,
        recall_defined=report.recall_defined,
        confusion=[list(row) for row in report.confusion],
        importances=forest.importances(),
        oob_score=oob,
        cv_f1=list(cv.fold_f1) if cv else None,
        train_frames=sorted({int(f) for f in train_part.frames}),
        test_frames=sorted({int(f) for f in test_part.frames}),
        train_rows=train_part.n_rows,
        test_rows=test_part.n_rows,
    )
    logger.info("cli.classify.complete f1=%.4f test_rows=%d", report.f1, test_part.n_rows)
    if args.format == "csv":
        (tn, fp), (fn, tp) = report.confusion
        metrics = {
            "f1": report.f1,
            "precision": report.precision,
            "recall": report.recall,
            "tn": tn,
            "fp": fp,
            "fn": fn,
            "tp": tp,
            **{f"importance_{k}": v for k, v in result.importances.items()},
        }
        _emit("metric,value\n" + "".join(f"{k},{v!r}\n" for k, v in metrics.items()), args)
    else:
        _emit(result.model_dump_json(indent=2) + "\n", args)


def cmd_compare(args: argparse.Namespace, config: AppConfig) -> None:
    base = None
    if args.synthetic:
        frames = skewed_corpus(args.synthetic, args.seed)
        base = BENCHMARK_INIT
    elif args.input:
        frames = _load_frames(args.input, args)
    else:
        raise UsageError("compare needs an input path or --synthetic N")
    report = compare_skew(
        frames,
        _init_config(args, base),
        LMConfig(max_iterations=args.max_iter),
        _preprocess_config(args),
    )
    _emit(report.model_dump_json(indent=2) + "\n", args)


def cmd_serve(args: argparse.Namespace, config: AppConfig) -> None:
    import uvicorn

    from app.core.application import create_app

    uvicorn.run(create_app(config), host=args.host, port=args.port, log_config=None)

