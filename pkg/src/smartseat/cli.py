"""Command-line entry point.

Subcommands: simulate | train-eval | embed | ppg-validate | export |
replay | serve | stats. Every run writes a manifest.json recording the
effective configuration, the seed, and a sha256 per output file; a fixed
seed reproduces every output byte-for-byte. Report paths emit plot-ready
CSVs plus rendered PNG figures (disable with --no-figures).

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import figures, ppg
from .dataset import SplitSpec, frames_to_dataset, read_csv, split_train_test, write_csv
from .embedding import pca, save_embedding, tsne
from .errors import ConfigError, DataError, InvalidConfigError, SmartSeatError
from .export import (
    FORMAT_BINARY,
    FORMAT_FIRMWARE,
    export_model,
    load_artifact,
    load_model,
    save_artifact,
)
from .models import ModelSpec, compare_models
from .monitor.config import MonitorConfig, get_float, get_int, get_str, load_config
from .monitor.replay import replay as replay_stream
from .monitor.service import serve as serve_service
from .monitor.session import SessionStore, posture_stats, stats_csv
from .monitor.wire import FrameStreamDecoder, encode_frame
from .monitor.replay import frames_to_wire
from .postures import POSTURES
from .sensing import (
    DEFAULT_SIGNATURES,
    CushionLayout,
    load_layout,
    load_signatures,
    save_layout,
    save_signatures,
    synth_session,
)

DEFAULT_MASSES = (65.0, 58.0, 72.0, 61.0, 50.0)


def _subject_seed(seed: int, subject: int) -> int:
    return int(np.random.SeedSequence([seed, subject]).generate_state(1)[0])


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, command, args_ns, seed, inputs, outputs, t0) -> str:
    manifest = {
        "command": command,
        "config": {
            k: v for k, v in sorted(vars(args_ns).items())
            if k not in ("func",) and not k.startswith("_")
        },
        "seed": seed,
        "inputs": sorted(str(p) for p in inputs),
        "outputs": {os.path.basename(p): _sha256(p) for p in sorted(outputs)},
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args, cfg) -> tuple[list[str], list[str]]:
    out = _out_dir(args)
    subjects = args.subjects if args.subjects is not None else get_int(cfg, "simulate.subjects", 5)
    seconds = args.seconds if args.seconds is not None else get_float(cfg, "simulate.seconds", 60.0)
    rate = args.rate if args.rate is not None else get_float(cfg, "simulate.rate_hz", 3.0)
    gap = args.empty_gap if args.empty_gap is not None else get_float(cfg, "simulate.empty_gap_s", 2.0)
    masses_txt = args.masses or get_str(cfg, "simulate.masses", ",".join(map(str, DEFAULT_MASSES)))
    masses = [float(v) for v in masses_txt.split(",") if v.strip()]
    if subjects < 1:
        raise InvalidConfigError("need at least one subject")
    signatures = load_signatures(args.signatures) if args.signatures else DEFAULT_SIGNATURES
    layout = load_layout(args.layout) if args.layout else CushionLayout()
    inputs = [p for p in (args.signatures, args.layout) if p]

    schedule = [(p, seconds) for p in POSTURES]
    all_frames = []
    per_subject = []
    for i in range(subjects):
        mass = masses[i % len(masses)]
        frames = synth_session(
            schedule, mass, rate, seed=_subject_seed(args.seed, i),
            empty_gap_s=gap, signatures=signatures,
        )
        per_subject.append(frames)
        span = frames[-1].timestamp_ms + round(1000 / rate)
        offset = i * (span + 10_000)
        for f in frames:
            all_frames.append(
                type(f)(
                    timestamp_ms=f.timestamp_ms + offset,
                    counts=f.counts,
                    forces_kg=f.forces_kg,
                    label=f.label,
                )
            )

    outputs = []
    ds = frames_to_dataset(all_frames, provenance=f"synthetic x{subjects} subjects")
    dataset_path = os.path.join(out, "dataset.csv")
    write_csv(ds, dataset_path)
    outputs.append(dataset_path)

    stream_path = os.path.join(out, "session.wire")
    with open(stream_path, "wb") as fh:
        for wf in frames_to_wire(per_subject[0]):
            fh.write(encode_frame(wf))
    outputs.append(stream_path)

    layout_path = os.path.join(out, "layout.csv")
    save_layout(layout, layout_path)
    outputs.append(layout_path)
    signatures_path = os.path.join(out, "signatures.csv")
    save_signatures(signatures, signatures_path)
    outputs.append(signatures_path)

    if not args.no_figures:
        mean_forces = {}
        for posture in POSTURES:
            rows = [f.forces_kg for f in per_subject[0] if f.label == posture]
            if rows:
                mean_forces[posture] = np.mean(np.asarray(rows), axis=0)
        fig_path = os.path.join(out, "pressure_maps.png")
        figures.render_posture_pressure_maps(mean_forces, fig_path, layout)
        outputs.append(fig_path)

    print(f"wrote {len(ds)} rows to {dataset_path}")
    return outputs, inputs


# ---------------------------------------------------------------------------
# train-eval


def cmd_train_eval(args, cfg) -> tuple[list[str], list[str]]:
    out = _out_dir(args)
    dataset_path = args.dataset or os.path.join(out, "dataset.csv")
    ds = read_csv(dataset_path)
    train_ds, test_ds = split_train_test(
        ds, SplitSpec(train_fraction=args.train_fraction, seed=args.seed)
    )
    wanted = [k.strip() for k in args.models.split(",") if k.strip()]
    spec_map = {
        "dt": ModelSpec.dt(seed=args.seed),
        "rf": ModelSpec.rf(seed=args.seed),
        "svm": ModelSpec.svm(seed=args.seed),
        "mlp": ModelSpec.mlp(seed=args.seed),
    }
    unknown = [k for k in wanted if k not in spec_map]
    if unknown:
        raise InvalidConfigError(f"unknown model kinds: {unknown}")
    specs = [spec_map[k] for k in wanted]

    outputs = []
    if len(specs) == 1:
        from .models import evaluate, train as train_model

        model = train_model(specs[0], train_ds)
        results = [(model, evaluate(model, test_ds))]
    else:
        results = compare_models(specs, train_ds, test_ds)

    table_lines = [
        f"{'model':<6} {'accuracy':>9} {'micro-F1':>9} {'macro-F1':>9}"
    ]
    for _, rep in results:
        table_lines.append(
            f"{rep.model_kind:<6} {rep.accuracy:>9.4f} {rep.f1_micro:>9.4f} "
            f"{rep.f1_macro:>9.4f}"
        )
    table = "\n".join(table_lines)
    print(table)

    report_path = os.path.join(out, "reports.txt")
    with open(report_path, "w") as fh:
        fh.write(f"dataset: {os.path.basename(dataset_path)} ({len(ds)} rows, "
                 f"{len(train_ds)} train / {len(test_ds)} test)\n\n")
        fh.write(table + "\n\n")
        for _, rep in results:
            fh.write(rep.to_text(ds.class_names) + "\n\n")
    outputs.append(report_path)

    for _, rep in results:
        cpath = os.path.join(out, f"confusion_{rep.model_kind}.csv")
        with open(cpath, "w") as fh:
            fh.write(rep.confusion_csv(ds.class_names))
        outputs.append(cpath)

    best_model, best_rep = results[0]
    artifact = export_model(best_model, FORMAT_BINARY)
    model_path = os.path.join(out, "model.scm")
    save_artifact(artifact, model_path)
    outputs.append(model_path)
    fw = export_model(best_model, FORMAT_FIRMWARE)
    fw_path = os.path.join(out, "model.c")
    with open(fw_path, "wb") as fh:
        fh.write(fw.payload)
    outputs.append(fw_path)
    print(f"best model: {best_rep.model_kind} "
          f"(accuracy {best_rep.accuracy:.4f}) -> {model_path}")

    if not args.no_figures:
        reports = [rep for _, rep in results]
        fig1 = os.path.join(out, "confusion_matrices.png")
        figures.render_confusion_heatmaps(reports, ds.class_names, fig1)
        fig2 = os.path.join(out, "accuracy.png")
        figures.render_accuracy_bars(reports, fig2)
        outputs += [fig1, fig2]
    return outputs, [dataset_path]


# ---------------------------------------------------------------------------
# embed


def cmd_embed(args, cfg) -> tuple[list[str], list[str]]:
    out = _out_dir(args)
    dataset_path = args.dataset or os.path.join(out, "dataset.csv")
    ds = read_csv(dataset_path)
    X = ds.features.astype(float)
    labels = list(ds.labels)
    if args.sample and 0 < args.sample < len(ds):
        rng = np.random.default_rng(args.seed)
        idx = np.sort(rng.choice(len(ds), size=args.sample, replace=False))
        X = X[idx]
        labels = [labels[i] for i in idx]
    if args.method == "pca":
        emb = pca(X, d=args.dims, labels=labels)
    else:
        emb = tsne(
            X, d=args.dims, perplexity=args.perplexity, iters=args.iters,
            seed=args.seed, labels=labels,
        )
    outputs = []
    coords_path = os.path.join(out, f"embedding_{args.method}_{args.dims}d.csv")
    diag_path = coords_path.replace(".csv", ".diag.txt")
    save_embedding(emb, coords_path, diag_path)
    outputs += [coords_path, diag_path]
    if not args.no_figures:
        fig_path = coords_path.replace(".csv", ".png")
        figures.render_embedding(emb, fig_path)
        outputs.append(fig_path)
    print(f"embedded {X.shape[0]} rows with {args.method} -> {coords_path}")
    return outputs, [dataset_path]


# ---------------------------------------------------------------------------
# ppg-validate


def cmd_ppg_validate(args, cfg) -> tuple[list[str], list[str]]:
    out = _out_dir(args)
    base = args.hr_base if args.hr_base is not None else get_float(cfg, "ppg.hr_base", 80.0)
    amp = args.hr_amp if args.hr_amp is not None else get_float(cfg, "ppg.hr_amp", 15.0)
    period = args.hr_period if args.hr_period is not None else get_float(cfg, "ppg.hr_period_s", 60.0)
    duration = args.duration if args.duration is not None else get_float(cfg, "ppg.duration_s", 240.0)
    fs = args.fs if args.fs is not None else get_float(cfg, "ppg.fs_hz", 100.0)

    profile = lambda t: base + amp * np.sin(2 * np.pi * t / period)
    if args.clean:
        noise = ppg.NoiseSpec()
    else:
        clean = ppg.synth_ppg(profile, duration, fs)
        sd = ppg.white_sd_for_snr(clean, args.snr_db)
        noise = ppg.NoiseSpec(drift_amp=0.03, white_sd=sd)
    raw = ppg.synth_ppg(profile, duration, fs, noise, seed=args.seed)
    times, main_bpm, ref_bpm, stages = ppg.paired_hr(raw)
    report = ppg.bland_altman(main_bpm, ref_bpm)

    outputs = []
    agreement_path = os.path.join(out, "agreement.csv")
    ppg.save_agreement_report(report, agreement_path)
    outputs.append(agreement_path)

    stage_path = os.path.join(out, "stages.csv")
    ppg.save_stage_dump(stages, stage_path)
    outputs.append(stage_path)

    trace_path = os.path.join(out, "trace.csv")
    ppg.save_trace(raw, trace_path)
    outputs.append(trace_path)

    pair_path = os.path.join(out, "hr_pair.csv")
    with open(pair_path, "w") as fh:
        fh.write("t_s,main_bpm,ref_bpm\n")
        for t, a, b in zip(times, main_bpm, ref_bpm):
            fh.write(f"{float(t)!r},{float(a)!r},{float(b)!r}\n")
    outputs.append(pair_path)

    if not args.no_figures:
        f1 = os.path.join(out, "stages.png")
        figures.render_chain_stages(stages, f1)
        f2 = os.path.join(out, "hr_comparison.png")
        figures.render_hr_comparison(times, main_bpm, ref_bpm, f2)
        f3 = os.path.join(out, "bland_altman.png")
        figures.render_bland_altman(main_bpm, ref_bpm, report, f3)
        outputs += [f1, f2, f3]

    print(
        f"agreement over {report.n_pairs} pairs: r={report.pearson_r:.4f} "
        f"bias={report.bias_bpm:+.3f} bpm "
        f"loa=[{report.loa_low_bpm:.3f}, {report.loa_high_bpm:.3f}]"
    )
    return outputs, []


# ---------------------------------------------------------------------------
# export / replay / serve / stats


def cmd_export(args, cfg) -> tuple[list[str], list[str]]:
    out = _out_dir(args)
    artifact = load_artifact(args.model)
    model = load_model(artifact)
    outputs = []
    if args.format == FORMAT_FIRMWARE:
        fw = export_model(model, FORMAT_FIRMWARE)
        path = os.path.join(out, "model.c")
        with open(path, "wb") as fh:
            fh.write(fw.payload)
        outputs.append(path)
    else:
        path = os.path.join(out, "model.scm")
        save_artifact(export_model(model, FORMAT_BINARY), path)
        outputs.append(path)
    print(f"exported {model.kind} model -> {outputs[0]}")
    return outputs, [args.model]


def cmd_replay(args, cfg) -> tuple[list[str], list[str]]:
    out = _out_dir(args)
    with open(args.stream, "rb") as fh:
        blob = fh.read()
    decoder = FrameStreamDecoder()
    frames = decoder.feed(blob)
    if decoder.pending_bytes:
        raise DataError(f"stream file has {decoder.pending_bytes} trailing bytes")
    result = replay_stream(
        args.host, args.port, frames, speed=args.speed, wait_each=not args.no_wait
    )
    # Timing goes to stdout only; the file stays deterministic per stream.
    summary_path = os.path.join(out, "replay_result.json")
    with open(summary_path, "w") as fh:
        json.dump(
            {"frames_sent": result.frames_sent, "acks_received": result.acks_received},
            fh,
            indent=2,
        )
        fh.write("\n")
    print(
        f"replayed {result.frames_sent} frames, {result.acks_received} acknowledged, "
        f"max round trip {result.max_roundtrip_ms:.1f} ms"
    )
    if result.acks_received != result.frames_sent:
        raise SmartSeatError(
            f"{result.frames_sent - result.acks_received} frames were not acknowledged"
        )
    return [summary_path], [args.stream]


def cmd_serve(args, cfg) -> tuple[list[str], list[str]]:
    out = _out_dir(args)
    mc = MonitorConfig.from_mapping(
        cfg,
        model_path=args.model,
        storage_dir=args.storage or os.path.join(out, "sessions"),
        ingest_port=args.ingest_port,
        http_port=args.http_port,
        host=args.host,
        debounce_k=args.debounce_k,
        static_dir=args.static_dir,
        layout_path=args.layout,
    )
    service = serve_service(mc)
    print(
        f"serving: ingest tcp://{mc.host}:{service.ingest_port} "
        f"http http://{mc.host}:{service.http_port} (Ctrl-C to stop)"
    )
    try:
        if args.duration > 0:
            time.sleep(args.duration)
        else:
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return [], [mc.model_path]


def cmd_stats(args, cfg) -> tuple[list[str], list[str]]:
    out = _out_dir(args)
    store = SessionStore(args.storage)
    if args.session:
        session_id = args.session
    else:
        sessions = store.list_sessions()
        if not sessions:
            raise DataError(f"no sessions stored under {args.storage}")
        session_id = sessions[-1]["session_id"]
    record = store.load(session_id)
    stats = posture_stats(record, window_from_ms=args.window_from,
                          window_to_ms=args.window_to)
    outputs = []
    csv_path = os.path.join(out, "stats.csv")
    with open(csv_path, "w") as fh:
        fh.write(stats_csv(stats))
    outputs.append(csv_path)
    if not args.no_figures and stats.durations_s:
        fig_path = os.path.join(out, "stats.png")
        figures.render_posture_stats(stats, fig_path)
        outputs.append(fig_path)
    print(f"session {session_id}: {stats.n_frames} frames, "
          f"{stats.total_s:.1f} s across {len(stats.durations_s)} postures")
    for label in sorted(stats.durations_s):
        print(f"  {label:<16} {stats.durations_s[label]:8.1f} s  "
              f"x{stats.repetitions.get(label, 0)}")
    return outputs, []


# ---------------------------------------------------------------------------
# parser / main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smartseat",
        description="Smart-seat toolkit: simulate, train, validate, serve.",
    )
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip PNG figure rendering")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a labeled dataset + replay stream")
    p.add_argument("--subjects", type=int)
    p.add_argument("--seconds", type=float, help="seconds per posture")
    p.add_argument("--rate", type=float, help="frame rate (Hz)")
    p.add_argument("--empty-gap", type=float, help="empty-seat gap seconds")
    p.add_argument("--masses", help="comma-separated subject masses (kg)")
    p.add_argument("--layout", help="cushion layout file")
    p.add_argument("--signatures", help="posture signature table")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-eval", help="train the four models and evaluate")
    p.add_argument("--dataset", help="dataset CSV (default <out>/dataset.csv)")
    p.add_argument("--models", default="dt,rf,svm,mlp")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.set_defaults(func=cmd_train_eval)

    p = sub.add_parser("embed", help="PCA / t-SNE coordinates for inspection")
    p.add_argument("--dataset", help="dataset CSV (default <out>/dataset.csv)")
    p.add_argument("--method", choices=("pca", "tsne"), default="pca")
    p.add_argument("--dims", type=int, choices=(2, 3), default=2)
    p.add_argument("--sample", type=int, default=2000,
                   help="subsample rows before embedding (0 = all)")
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iters", type=int, default=1000)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("ppg-validate", help="dual-pipeline heart-rate agreement")
    p.add_argument("--duration", type=float)
    p.add_argument("--fs", type=float)
    p.add_argument("--hr-base", type=float)
    p.add_argument("--hr-amp", type=float)
    p.add_argument("--hr-period", type=float)
    p.add_argument("--snr-db", type=float, default=12.0)
    p.add_argument("--clean", action="store_true", help="disable all noise")
    p.set_defaults(func=cmd_ppg_validate)

    p = sub.add_parser("export", help="convert a stored model artifact")
    p.add_argument("--model", required=True, help=".scm artifact path")
    p.add_argument("--format", choices=(FORMAT_BINARY, FORMAT_FIRMWARE),
                   default=FORMAT_FIRMWARE)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("replay", help="replay a recorded stream into a service")
    p.add_argument("--stream", required=True, help="session.wire file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7460)
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--no-wait", action="store_true",
                   help="stream without waiting for per-frame acks")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="run the live monitoring service")
    p.add_argument("--model", help="model artifact (.scm)")
    p.add_argument("--storage", help="session storage directory")
    p.add_argument("--ingest-port", type=int)
    p.add_argument("--http-port", type=int)
    p.add_argument("--host", default=None)
    p.add_argument("--debounce-k", type=int)
    p.add_argument("--static-dir", help="dashboard static files")
    p.add_argument("--layout", help="cushion layout served to clients")
    p.add_argument("--duration", type=float, default=0.0,
                   help="stop after N seconds (0 = run until interrupted)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("stats", help="posture statistics for a stored session")
    p.add_argument("--storage", required=True)
    p.add_argument("--session", help="session id (default: most recent)")
    p.add_argument("--window-from", type=int, dest="window_from")
    p.add_argument("--window-to", type=int, dest="window_to")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config) if args.config else {}
        outputs, inputs = args.func(args, cfg)
        if outputs or args.command not in ("serve",):
            _write_manifest(_out_dir(args), args.command, args, args.seed,
                            inputs, outputs, t0)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (SmartSeatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
