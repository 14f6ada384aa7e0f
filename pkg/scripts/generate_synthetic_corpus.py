#!/usr/bin/env python3
"""
Script to write a synthetic trigger-word corpus and matching word vectors.
Useful for smoke-testing the cv, sweep, ablate and baseline commands.
"""

import argparse
import os
import sys
from pathlib import Path

# Add the parent directory to sys.path
sys.path.append(str(Path(__file__).parent.parent))

from relex.corpus import build_instances, corpus_statistics, serialize_corpus
from relex.synthetic import generate_trigger_corpus, write_word_vectors


def parse_args():
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(description="Generate a synthetic relation corpus")

    parser.add_argument("--instances", type=int, default=2500, help="Number of relation instances (default: 2500)")
    parser.add_argument(
        "--entities",
        type=int,
        choices=[2, 3],
        default=2,
        help="Entities per sentence; with 3 the outer pair is NoRelation (default: 2)"
    )
    parser.add_argument("--no-distractors", action="store_true", help="Do not insert off-span trigger words")
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")

    # Output options
    parser.add_argument("--output", default="synthetic.jsonl", help="Corpus output path (default: synthetic.jsonl)")
    parser.add_argument("--vectors", help="Also write word vectors to this path")
    parser.add_argument("--dim", type=int, default=50, help="Word vector dimension (default: 50)")

    return parser.parse_args()


def main():
    args = parse_args()
    corpus = generate_trigger_corpus(
        args.instances, args.seed, entities_per_sentence=args.entities, distractors=not args.no_distractors
    )

    os.makedirs(os.path.dirname(os.path.abspath(args.output)), exist_ok=True)
    with open(args.output, "w", encoding="utf-8", newline="\n") as f:
        serialize_corpus(corpus, f)
    print(f"Corpus saved to {args.output}")
    counts = corpus_statistics(instance for _, instance in build_instances(corpus))
    print("Instances per label: " + ", ".join(f"{label}={count}" for label, count in counts.items()))

    if args.vectors:
        write_word_vectors(args.vectors, dim=args.dim, seed=args.seed)
        print(f"Word vectors saved to {args.vectors}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
