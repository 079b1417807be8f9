#!/usr/bin/env python3
"""Materialize the constructed retrieval testbed on disk.

The corpus is engineered, not sampled: relevance margins are exact so the
stage-by-stage quality jumps are stable under reruns.  Same seed, same bytes.
"""

import argparse
from pathlib import Path

from rankcascade.synthetic import build_dataset


def main() -> None:
    parser = argparse.ArgumentParser(
        description="build the synthetic corpus, queries, qrels and "
                    "embedding stores")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    ds = build_dataset(Path(args.out), seed=args.seed)
    for label, path in [
        ("corpus", ds.corpus),
        ("queries", ds.queries),
        ("expansions", ds.expansions),
        ("qrels", ds.qrels),
        ("passage embeddings", ds.passage_embeddings),
        ("query embeddings", ds.query_embeddings),
    ]:
        print(f"{label:>20}: {path}")


if __name__ == "__main__":
    main()
