#!/usr/bin/env python3
"""Stand-in for the fine-tuning trainer used by the CLI tests.

It checks the argument contract, validates the gold split files and answers
each test post with its gold label, so the resulting scores are perfect.
"""
import argparse
import json
import os
import sys


def read_gold(path):
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            row = json.loads(line)
            if set(row) != {"post_id", "text", "label"}:
                sys.exit(f"bad gold keys in {path}: {sorted(row)}")
            if not isinstance(row["label"], bool) or not row["text"]:
                sys.exit(f"bad gold row in {path}")
            rows.append(row)
    return rows


def record(directory, name):
    with open(os.path.join(directory, f"argv_{name}.json"), "w") as f:
        json.dump(sys.argv[1:], f)


def main():
    parser = argparse.ArgumentParser()
    sub = parser.add_subparsers(dest="cmd", required=True)
    train = sub.add_parser("train")
    train.add_argument("--gold-dir", required=True)
    train.add_argument("--output-dir", required=True)
    train.add_argument("--base-model", required=True)
    train.add_argument("--learning-rate", type=float, required=True)
    train.add_argument("--epochs", type=int, required=True)
    train.add_argument("--batch-size", type=int, required=True)
    train.add_argument("--seed", type=int, required=True)
    predict = sub.add_parser("predict")
    predict.add_argument("--model-dir", required=True)
    predict.add_argument("--gold-dir", required=True)
    predict.add_argument("--split", required=True, choices=["train", "validation", "test"])
    predict.add_argument("--output", required=True)
    predict.add_argument("--model-name", required=True)
    args = parser.parse_args()

    if args.cmd == "train":
        for split in ("train", "validation", "test"):
            read_gold(os.path.join(args.gold_dir, f"{split}.jsonl"))
        record(args.output_dir, "train")
        with open(os.path.join(args.output_dir, "model.json"), "w") as f:
            json.dump({"base_model": args.base_model}, f)
        return

    if not os.path.exists(os.path.join(args.model_dir, "model.json")):
        sys.exit("predict before train")
    record(args.model_dir, "predict")
    with open(args.output, "w", encoding="utf-8") as out:
        for row in read_gold(os.path.join(args.gold_dir, f"{args.split}.jsonl")):
            verdict = {
                "post_id": row["post_id"],
                "model_name": args.model_name,
                "modality": "finetuned",
                "raw_response": "true" if row["label"] else "false",
                "parsed": "positive" if row["label"] else "negative",
                "latency_ms": 3,
                "attempt_count": 1,
                "error": None,
            }
            out.write(json.dumps(verdict) + "\n")


if __name__ == "__main__":
    main()
