"""Command-line front end.

Subcommands cover the whole toolchain: corpus generation, training,
hyperparameter search, file-to-file echo cancellation, corpus evaluation,
latency benchmarking, and weight-file inspection.

Exit codes: 0 success, 1 usage error, 2 runtime error.  A ``--config``
file supplies ``key = value`` defaults for engine and optimizer fields;
explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, datagen, dsp, features, metrics, netio, stream, train, unet, wavio
from .errors import FormatError, InvalidArgumentError, ProcessingError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


_CONFIG_KEYS = frozenset((
    "engine", "weights_path", "precision", "mu",
    "kind", "learning_rate", "beta1", "beta2", "momentum",
))


def _read_config(path) -> dict:
    conf = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config file: {exc}") from exc
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{path}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise InvalidArgumentError(
                f"{path}: unknown config key {key!r} "
                f"(known: {', '.join(sorted(_CONFIG_KEYS))})")
        conf[key] = value.strip()
    return conf


def _effective(args, conf, key, cast, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in conf:
        return cast(conf[key])
    return default


def _engine_config(args, conf) -> stream.EngineConfig:
    return stream.EngineConfig(
        engine=_effective(args, conf, "engine", str, "passthrough"),
        weights_path=_effective(args, conf, "weights_path", str, None),
        precision=_effective(args, conf, "precision", str, "fp32"),
        mu=_effective(args, conf, "mu", float, 1e-4))


def _optimizer_config(args, conf) -> train.OptimizerConfig:
    return train.OptimizerConfig(
        kind=_effective(args, conf, "kind", str, "nadam"),
        learning_rate=_effective(args, conf, "learning_rate", float, 1e-4),
        beta1=_effective(args, conf, "beta1", float, 0.9),
        beta2=_effective(args, conf, "beta2", float, 0.999),
        momentum=_effective(args, conf, "momentum", float, 0.0))


def _load_training_set(manifest_path, max_samples=None):
    """One TrainSample per corpus row, from the final full analysis frame."""
    rows = datagen.read_manifest(manifest_path)
    if max_samples is not None:
        rows = rows[:max_samples]
    base = Path(manifest_path).parent
    dataset = []
    for row in rows:
        far = wavio.read_wav(base / row["far_path"])
        mic = wavio.read_wav(base / row["mic_path"])
        near = wavio.read_wav(base / row["near_path"])
        if mic.size < dsp.FRAME_SIZE:
            raise InvalidArgumentError(
                f"sample {row['index']} is shorter than one {dsp.FRAME_SIZE}-sample frame")
        sl = slice(mic.size - dsp.FRAME_SIZE, mic.size)
        mag_y, _ = dsp.magnitude_phase(dsp.stft(mic[sl]))
        mag_x, _ = dsp.magnitude_phase(dsp.stft(far[sl]))
        mag_s, _ = dsp.magnitude_phase(dsp.stft(near[sl]))
        norm_y = features.normalize(mag_y)
        norm_x = features.normalize(mag_x)
        dataset.append(train.TrainSample(x_grid=norm_x.grid, y_grid=norm_y.grid,
                                         target=mag_s / norm_y.scale))
    if not dataset:
        raise InvalidArgumentError(f"{manifest_path}: corpus is empty")
    return dataset


def _parse_layout(text):
    try:
        enc, dec = (int(part) for part in text.split("-"))
    except ValueError:
        raise InvalidArgumentError(f"layout must look like '4-3', got {text!r}")
    return enc, dec


# ---------------------------------------------------------------- commands

def _cmd_gen(args, conf):
    scenarios = tuple(args.scenarios.split(",")) if args.scenarios else datagen.SCENARIOS
    manifest = datagen.gen_corpus(args.num, args.out, seed=args.seed,
                                  source_speech_dir=args.speech_dir,
                                  duration_s=args.duration,
                                  scenarios=scenarios, clean=args.clean)
    print(manifest)
    return 0


def _cmd_train(args, conf):
    enc, dec = _parse_layout(args.layout)
    topology = unet.NetTopology(num_encoders=enc, num_decoders=dec,
                                base_filters=args.base_filters,
                                residual_config=args.residual,
                                residual_depth=args.residual_depth)
    dataset = _load_training_set(args.manifest, args.max_samples)
    result = train.train(dataset, topology, _optimizer_config(args, conf),
                         epochs=args.epochs, batch=args.batch, seed=args.seed)
    netio.save_weights(args.out, result.weights)
    print(f"trained {unet.param_count(topology)} parameters on "
          f"{len(dataset)} samples")
    for epoch, value in enumerate(result.curve):
        label = "initial" if epoch == 0 else f"epoch {epoch}"
        print(f"{label}\tloss {value:.6f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_search(args, conf):
    dataset = _load_training_set(args.manifest, args.max_samples)
    results = train.random_search(train.SearchSpace(), args.budget, dataset,
                                  seed=args.seed, epochs=args.epochs,
                                  batch=args.batch)
    print(train.format_search_report(results))
    return 0


def _cmd_cancel(args, conf):
    config = _engine_config(args, conf)
    _, breakdown = stream.stream_process(args.far, args.mic, args.out, config,
                                         collect_timing=args.timing)
    if args.timing:
        print(stream.format_breakdown(breakdown))
    print(f"wrote {args.out}")
    return 0


def _cmd_eval(args, conf):
    config = _engine_config(args, conf)
    weights = stream.load_engine_weights(config) if config.engine == "unet" else None

    def engine(far, mic):
        out, _ = stream.run_arrays(far, mic, config, weights=weights)
        return out

    report = metrics.evaluate_corpus(engine, args.manifest, method=config.engine)
    print(metrics.format_report(report))
    return 0


def _cmd_bench(args, conf):
    if args.compare_backends:
        print(bench.compare_backends(seed=args.seed))
        return 0
    if args.compare_precisions:
        print(bench.compare_precisions(duration_s=args.duration, seed=args.seed))
        return 0
    config = _engine_config(args, conf)
    weights = None
    if config.engine == "unet" and config.weights_path is None:
        weights = unet.init_weights(unet.NetTopology(), seed=args.seed)
        if config.precision == "fp16":
            weights = unet.quantize_fp16(weights).weights
    breakdown = bench.bench_engine(config, duration_s=args.duration,
                                   repetitions=args.reps, seed=args.seed,
                                   weights=weights)
    print(bench.format_bench_report(breakdown, config))
    return 0


def _cmd_inspect(args, conf):
    weights = netio.load_weights(args.weights_file)
    topo = weights.topology
    print(f"encoders\t{topo.num_encoders}")
    print(f"decoders\t{topo.num_decoders}")
    print(f"base_filters\t{topo.base_filters}")
    print(f"residual_config\t{topo.residual_config}")
    print(f"residual_depth\t{topo.residual_depth}")
    print(f"freq_bins\t{topo.freq_bins}")
    print(f"time_frames\t{topo.time_frames}")
    print(f"precision\t{weights.precision}")
    print(f"parameters\t{unet.param_count(topo)}")
    return 0


# ------------------------------------------------------------------ wiring

def _add_engine_flags(sub):
    sub.add_argument("--engine", choices=stream.ENGINES, default=None)
    sub.add_argument("--weights", dest="weights_path", default=None,
                     help="network weight file (unet engine)")
    sub.add_argument("--precision", choices=stream.PRECISIONS, default=None)
    sub.add_argument("--mu", type=float, default=None,
                     help="adaptive step size (pfblms engine)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="unetaec",
                     description="Streaming acoustic echo cancellation toolkit")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)

    sub = commands.add_parser("gen", help="generate a synthetic corpus")
    sub.add_argument("--out", required=True)
    sub.add_argument("--num", type=int, default=10)
    sub.add_argument("--duration", type=float, default=4.0)
    sub.add_argument("--scenarios", default=None,
                     help="comma-separated subset of: " + ",".join(datagen.SCENARIOS))
    sub.add_argument("--clean", action="store_true",
                     help="no noise, no clipping: purely linear echo paths")
    sub.add_argument("--speech-dir", default=None,
                     help="directory of source WAVs (default: synthetic speech)")
    sub.set_defaults(func=_cmd_gen)

    sub = commands.add_parser("train", help="train a network on a corpus")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--out", required=True, help="weight file to write")
    sub.add_argument("--epochs", type=int, default=5)
    sub.add_argument("--batch", type=int, default=1)
    sub.add_argument("--max-samples", type=int, default=None)
    sub.add_argument("--optimizer", dest="kind", choices=train.OPTIMIZERS, default=None)
    sub.add_argument("--lr", dest="learning_rate", type=float, default=None)
    sub.add_argument("--beta1", type=float, default=None)
    sub.add_argument("--beta2", type=float, default=None)
    sub.add_argument("--momentum", type=float, default=None)
    sub.add_argument("--layout", default="4-3", help="encoders-decoders, e.g. 4-3")
    sub.add_argument("--base-filters", type=int, default=16)
    sub.add_argument("--residual", choices=(unet.CONF1, unet.CONF2), default=unet.CONF1)
    sub.add_argument("--residual-depth", type=int, default=2)
    sub.set_defaults(func=_cmd_train)

    sub = commands.add_parser("search", help="random hyperparameter search")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--budget", type=int, default=6)
    sub.add_argument("--epochs", type=int, default=2)
    sub.add_argument("--batch", type=int, default=1)
    sub.add_argument("--max-samples", type=int, default=2)
    sub.set_defaults(func=_cmd_search)

    sub = commands.add_parser("cancel", help="cancel echo in a WAV pair")
    sub.add_argument("--far", required=True)
    sub.add_argument("--mic", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--timing", action="store_true",
                     help="print the per-stride latency breakdown")
    _add_engine_flags(sub)
    sub.set_defaults(func=_cmd_cancel)

    sub = commands.add_parser("eval", help="run metrics over a corpus")
    sub.add_argument("--manifest", required=True)
    _add_engine_flags(sub)
    sub.set_defaults(func=_cmd_eval)

    sub = commands.add_parser("bench", help="latency benchmark")
    sub.add_argument("--duration", type=float, default=2.0)
    sub.add_argument("--reps", type=int, default=3)
    sub.add_argument("--compare-precisions", action="store_true",
                     help="fp16 vs fp32 full-topology comparison")
    sub.add_argument("--compare-backends", action="store_true",
                     help="compiled vs fallback kernel comparison")
    _add_engine_flags(sub)
    sub.set_defaults(func=_cmd_bench)

    sub = commands.add_parser("inspect-weights", help="describe a weight file")
    sub.add_argument("weights_file")
    sub.set_defaults(func=_cmd_inspect)

    for name, command in commands.choices.items():
        command.add_argument("--seed", type=int, default=0)
        command.add_argument("--config", default=None,
                             help="key = value defaults for engine/optimizer fields")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise _UsageError(parser.format_usage() + "unetaec: error: no command given")
        conf = _read_config(args.config) if args.config else {}
        return args.func(args, conf)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except InvalidArgumentError as exc:
        print(f"unetaec: invalid argument: {exc}", file=sys.stderr)
        return 1
    except (FormatError, ProcessingError, OSError) as exc:
        print(f"unetaec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
