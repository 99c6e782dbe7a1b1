"""Command line entry point.

One binary, four subcommands covering the pipeline end to end:

    cryptogram ingest  data/quotes_fixture.txt --out-dir out/corpus
    cryptogram train   --config train.toml --out-dir out/run
    cryptogram decrypt --checkpoint out/run/ckpt_001000.ckpt --text "..."
    cryptogram analyze --checkpoint ... --task eval --data ... --out-dir out/eval

Config files are TOML or JSON; command line flags override config values.
Exit codes: 0 success, 2 configuration/usage errors, 1 runtime errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import subprocess
import sys
import time

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    """Bad configuration or usage; maps to exit code 2."""


def _load_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        if path.endswith(".toml"):
            import tomllib
            return tomllib.load(fh)
        if path.endswith(".json"):
            return json.load(fh)
    raise ConfigError(f"config must be .toml or .json, got {path!r}")


def write_manifest(out_dir: str, config: dict, seeds: dict, outputs: dict) -> str:
    """Drop a manifest.json capturing everything needed to re-run."""
    from . import __version__
    from .analysis import hardware_string

    try:
        rev = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=5).stdout.strip() or None
    except (OSError, subprocess.SubprocessError):
        rev = None
    manifest = {
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "argv": sys.argv[1:],
        "package_version": __version__,
        "git_revision": rev,
        "config": config,
        "seeds": seeds,
        "hardware": hardware_string(),
        "outputs": outputs,
    }
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return path


# ---------------------------------------------------------------------------
# subcommands

def cmd_ingest(args) -> int:
    from .corpus import ingest

    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    all_records = []
    reports = []
    mode = "segments" if args.segments else args.mode
    for path in args.inputs:
        if not os.path.exists(path):
            raise ConfigError(f"input file not found: {path}")
        records, report = ingest(path, mode=mode,
                                 target_len=args.segments or 256,
                                 min_len=args.min_len, max_len=args.max_len)
        all_records.extend(records)
        reports.append(report)

    records_path = os.path.join(out_dir, "records.jsonl")
    with open(records_path, "w", encoding="utf-8") as fh:
        for r in all_records:
            fh.write(json.dumps({"text": r.text, "lang": r.language}) + "\n")
    report_path = os.path.join(out_dir, "ingest_report.json")
    with open(report_path, "w") as fh:
        json.dump({"files": reports, "total_records": len(all_records)}, fh,
                  indent=1)
    write_manifest(out_dir, {"mode": mode, "min_len": args.min_len,
                             "max_len": args.max_len},
                   seeds={}, outputs={"records": "records.jsonl",
                                      "report": "ingest_report.json"})
    print(f"{len(all_records)} records -> {records_path}")
    return EXIT_OK


def _load_records(path: str, split_seed: int, mode: str = "quotes"):
    from .corpus import ingest, split_records

    if not os.path.exists(path):
        raise ConfigError(f"data file not found: {path}")
    records, _ = ingest(path, mode=mode)
    return split_records(records, seed=split_seed)


def _build_train_config(args) -> "object":
    from .model.backbone import ModelConfig, PRESETS
    from .training import TrainConfig

    raw = _load_config_file(args.config) if args.config else {}
    model_raw = raw.pop("model", None)
    overrides = {
        "steps": args.steps, "batch_size": args.batch_size, "lr": args.lr,
        "seed": args.seed, "cipher_pool_size": args.pool_size,
        "head": args.head, "precision": args.precision,
        "batching": args.batching,
    }
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    if args.model_size is not None:
        model_raw = args.model_size
    if model_raw is None:
        model_raw = "0.5M"
    if isinstance(model_raw, str):
        if model_raw not in PRESETS:
            raise ConfigError(f"unknown model size {model_raw!r}; "
                              f"choose from {sorted(PRESETS)}")
        model_cfg = PRESETS[model_raw]
    else:
        try:
            model_cfg = ModelConfig.from_dict(model_raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad model config: {e}") from None
    try:
        return TrainConfig(model=model_cfg, **raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad training config: {e}") from None


def cmd_train(args) -> int:
    from .training import Trainer

    cfg = _build_train_config(args)
    train_recs, val_recs = _load_records(args.data, args.split_seed)
    trainer = Trainer(cfg, train_recs, val_recs, out_dir=args.out_dir)
    if args.resume:
        latest = trainer.latest_checkpoint()
        if latest:
            trainer.resume(latest)
            print(f"resumed from step {trainer.step}")
    write_manifest(args.out_dir, cfg.to_dict(),
                   seeds={"seed": cfg.seed, "split_seed": args.split_seed},
                   outputs={"metrics": "metrics.csv",
                            "checkpoints": "ckpt_*.ckpt"})
    final = trainer.train(log_every=args.log_every)
    print(f"final checkpoint: {final}")
    return EXIT_OK


def cmd_decrypt(args) -> int:
    from .checkpoint import load_model
    from .analysis import decode_strings, recover_key
    from .model.heads import BijectiveHead

    if not os.path.exists(args.checkpoint):
        raise ConfigError(f"checkpoint not found: {args.checkpoint}")
    if args.text is not None:
        texts = [args.text]
    elif args.file is not None:
        if not os.path.exists(args.file):
            raise ConfigError(f"input file not found: {args.file}")
        with open(args.file, encoding="utf-8") as fh:
            texts = [ln.rstrip("\n") for ln in fh if ln.strip()]
    else:
        raise ConfigError("decrypt needs --text or --file")
    if not texts or any(not t.strip() for t in texts):
        raise ConfigError("empty input")

    model, _ = load_model(args.checkpoint)
    upper = [t.upper() for t in texts]
    if any(u != t for u, t in zip(upper, texts)):
        print("note: input uppercased", file=sys.stderr)
    decoded = decode_strings(model, upper)
    for text, plain in zip(upper, decoded):
        print(plain)
        if isinstance(model.head, BijectiveHead) and args.key:
            rec = recover_key(model, text)
            print(f"key (cipher->plain): {rec['key'].to_string()}",
                  file=sys.stderr)
            if rec["unconstrained"]:
                print("unconstrained letters: "
                      + "".join(rec["unconstrained"]), file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args) -> int:
    from . import analysis
    from .checkpoint import load_model

    if not os.path.exists(args.checkpoint):
        raise ConfigError(f"checkpoint not found: {args.checkpoint}")
    model, meta = load_model(args.checkpoint)
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    outputs = {}

    if args.task in ("eval", "early-exit", "probe", "letter-profile"):
        _, test_recs = _load_records(args.data, args.split_seed)
    else:
        test_recs = []

    if args.task == "eval":
        report = analysis.evaluate(model, test_recs, cipher_seed=args.cipher_seed)
        with open(os.path.join(out_dir, "eval_report.json"), "w") as fh:
            fh.write(report.to_json())
        outputs["report"] = "eval_report.json"
        if args.plot_data:
            report.write_rows_csv(os.path.join(out_dir, "eval_rows.csv"))
            outputs["rows"] = "eval_rows.csv"
        print(report.to_json())

    elif args.task == "early-exit":
        rows = analysis.early_exit_report(model, test_recs,
                                          cipher_seed=args.cipher_seed)
        path = os.path.join(out_dir, "early_exit_ser.csv")
        with open(path, "w", newline="") as fh:
            import csv as _csv
            w = _csv.DictWriter(fh, fieldnames=["layer", "mean_ser"])
            w.writeheader()
            w.writerows(rows)
        outputs["per_layer_ser"] = "early_exit_ser.csv"
        for r in rows:
            print(f"layer {r['layer']}: mean SER {r['mean_ser']:.4f}")

    elif args.task == "probe":
        layers = (list(range(model.cfg.n_layers + 1)) if args.layers == "all"
                  else [int(x) for x in args.layers.split(",")])
        probes = {}
        for layer in layers:
            spec = analysis.ProbeSpec(kind=args.kind, layer_index=layer,
                                      steps=args.probe_steps)
            probes[layer] = analysis.train_probe(model, spec, test_recs,
                                                 seed=args.seed)
        result = analysis.probe_similarity_matrix(
            model, probes, test_recs, cipher_seed=args.cipher_seed,
            n_range=range(1, args.n_max + 1))
        path = os.path.join(out_dir, "probe_similarity.csv")
        analysis.write_similarity_csv(result, path)
        outputs["similarity"] = "probe_similarity.csv"
        print(f"similarity matrix -> {path}")

    elif args.task == "attn":
        text = args.text or "THE QUICK BROWN FOX JUMPS OVER THE LAZY DOG."
        maps = analysis.export_attention(model, text.upper())
        paths = analysis.write_attention(maps, os.path.join(out_dir, "attention"),
                                         as_csv=args.plot_data)
        outputs["maps"] = [os.path.basename(p) for p in paths]
        print(f"{maps.shape[0] * maps.shape[1]} maps -> {paths[0]}")

    elif args.task == "letter-profile":
        freq = (analysis.load_letter_frequencies(args.freq_table)
                if args.freq_table else None)
        result = analysis.letter_error_profile_for_model(
            model, test_recs, cipher_seed=args.cipher_seed, freq=freq)
        path = os.path.join(out_dir, "letter_profile.csv")
        analysis.write_profile_csv(result, path)
        outputs["profile"] = "letter_profile.csv"
        if result["degenerate"]:
            print("perfect decode: profile degenerate, zeros written")
        print(f"letter profile -> {path}")

    elif args.task == "bench":
        result = analysis.throughput_bench(
            model, n_sequences=args.n, length=args.len, repeats=args.repeats,
            batch_size=args.batch_size)
        path = os.path.join(out_dir, "throughput.json")
        with open(path, "w") as fh:
            json.dump(result, fh, indent=1)
        outputs["throughput"] = "throughput.json"
        print(json.dumps(result, indent=1))

    else:
        raise ConfigError(f"unknown analyze task {args.task!r}")

    write_manifest(out_dir, {"task": args.task, "checkpoint": args.checkpoint},
                   seeds={"cipher_seed": args.cipher_seed,
                          "split_seed": args.split_seed},
                   outputs=outputs)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cryptogram", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("ingest", help="clean a corpus file into records")
    pi.add_argument("inputs", nargs="+", help=".txt or .jsonl corpus files")
    pi.add_argument("--out-dir", default="out/corpus")
    pi.add_argument("--mode", choices=("quotes", "segments"), default="quotes")
    pi.add_argument("--segments", type=int, metavar="TARGET_LEN",
                    help="segment mode with this target length")
    pi.add_argument("--min-len", type=int, default=15)
    pi.add_argument("--max-len", type=int, default=300)
    pi.set_defaults(func=cmd_ingest)

    pt = sub.add_parser("train", help="train a model")
    pt.add_argument("--config", help="TOML/JSON training config")
    pt.add_argument("--out-dir", default="out/run")
    pt.add_argument("--data", default="data/quotes_fixture.txt")
    pt.add_argument("--split-seed", type=int, default=0)
    pt.add_argument("--model-size", help="preset tag, e.g. 0.5M or 3.4M")
    pt.add_argument("--head", choices=("standard", "bijective"))
    pt.add_argument("--steps", type=int)
    pt.add_argument("--batch-size", type=int)
    pt.add_argument("--lr", type=float)
    pt.add_argument("--seed", type=int)
    pt.add_argument("--pool-size", type=int)
    pt.add_argument("--precision", choices=("fp32", "bf16"))
    pt.add_argument("--batching", choices=("uniform", "bucketed"))
    pt.add_argument("--resume", action="store_true")
    pt.add_argument("--log-every", type=int, default=100)
    pt.set_defaults(func=cmd_train)

    pd = sub.add_parser("decrypt", help="decode ciphertext with a checkpoint")
    pd.add_argument("--checkpoint", required=True)
    pd.add_argument("--text")
    pd.add_argument("--file")
    pd.add_argument("--key", action="store_true",
                    help="print the recovered key (bijective head only)")
    pd.set_defaults(func=cmd_decrypt)

    pa = sub.add_parser("analyze", help="run an analysis task")
    pa.add_argument("--checkpoint", required=True)
    pa.add_argument("--task", required=True,
                    choices=("eval", "early-exit", "probe", "attn",
                             "letter-profile", "bench"))
    pa.add_argument("--data", default="data/quotes_fixture.txt")
    pa.add_argument("--out-dir", default="out/analysis")
    pa.add_argument("--split-seed", type=int, default=0)
    pa.add_argument("--cipher-seed", type=int, default=0)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--plot-data", action="store_true",
                    help="also write tidy long-format tables")
    pa.add_argument("--kind", choices=("linear", "mlp"), default="linear")
    pa.add_argument("--layers", default="all",
                    help="comma-separated layer indices, or 'all'")
    pa.add_argument("--probe-steps", type=int, default=5000)
    pa.add_argument("--n-max", type=int, default=8, help="largest n-gram order")
    pa.add_argument("--text", help="input for the attn task")
    pa.add_argument("--freq-table", help="override letter-frequency CSV")
    pa.add_argument("--n", type=int, default=1000, help="bench sequences")
    pa.add_argument("--len", type=int, default=300, help="bench length")
    pa.add_argument("--repeats", type=int, default=50)
    pa.add_argument("--batch-size", type=int,
                    help="bench batched mode (default single-stream)")
    pa.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
