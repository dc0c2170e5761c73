"""Start a rating service with three seeded items, for frontend integration tests."""

import argparse
import sys
from pathlib import Path

import uvicorn

from topictag.rating import RatingItem, RatingStore, create_app


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--dir", required=True)
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--scale", type=int, default=3)
    args = parser.parse_args()

    root = Path(args.dir)
    root.mkdir(parents=True, exist_ok=True)
    store = RatingStore(root / "items.jsonl", root / "ratings.jsonl", scale=args.scale)
    if not store.items:
        store.seed_items(
            [
                RatingItem(
                    item_id=f"item-{i:02d}",
                    trial_id=0,
                    topic_id=i,
                    candidate_label=f"candidate label {i}",
                    feature_summary={
                        "top_words": ["graph", "node", "edge"],
                        "titles": [f"title {i}"],
                    },
                    metrics={"bertscore_f": 0.5 + 0.1 * i},
                    model_id="fixture-model",
                )
                for i in range(3)
            ]
        )
    app = create_app(store)
    print(f"fixture ready on port {args.port}", flush=True)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="error")
    return 0


if __name__ == "__main__":
    sys.exit(main())
