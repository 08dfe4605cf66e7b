"""Bridge commands: finetune on a corpus, generate for test prompts.

Exit codes: 0 success, 1 input error, 2 internal failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import BridgeConfig
from .corpus import BridgeError

USAGE_ERROR = 1
INTERNAL_ERROR = 2


def cmd_finetune(args) -> int:
    from .training import finetune

    config = BridgeConfig(
        base_model=args.base_model,
        lora=not args.no_lora,
        lora_rank=args.lora_rank,
        lora_alpha=args.lora_alpha,
        lora_dropout=args.lora_dropout,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        max_source_length=args.max_source_length,
        seed=args.seed,
    )
    manifest = finetune(args.corpus, args.out_dir, config)
    final = manifest["loss_history"][-1]["train_loss"] if manifest["loss_history"] else None
    print(
        f"saved adapter to {args.out_dir} "
        f"(trainable parameters: {manifest['trainable_parameters']}, "
        f"final train loss: {final})"
    )
    return 0


def cmd_generate(args) -> int:
    from .generation import generate

    overrides = {}
    for key in ("max_new_tokens", "num_beams", "num_beam_groups", "batch_size", "seed"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    count = generate(args.prompts, args.model_dir, args.out, overrides)
    print(f"wrote {args.out}: {count} records")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forest2text-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("finetune", help="train on a corpus JSONL")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--base-model", default="google/flan-t5-base")
    p.add_argument("--no-lora", action="store_true", help="full fine-tune instead of adapters")
    p.add_argument("--lora-rank", type=int, default=32)
    p.add_argument("--lora-alpha", type=float, default=32.0)
    p.add_argument("--lora-dropout", type=float, default=0.05)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--max-source-length", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("generate", help="generate outputs for a prompts JSONL")
    p.add_argument("--prompts", required=True)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-new-tokens", type=int, default=None)
    p.add_argument("--num-beams", type=int, default=None)
    p.add_argument("--num-beam-groups", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_generate)

    return parser


def main(argv=None) -> int:
    try:
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as exc:
            return 0 if not exc.code else USAGE_ERROR
        return args.func(args)
    except (BridgeError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # anything unexpected is an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
