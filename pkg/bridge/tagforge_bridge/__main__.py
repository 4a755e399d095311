import argparse
import sys

from .models import load_model
from .server import serve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m tagforge_bridge",
        description="NER bridge over stdio (tagforge-bridge protocol v1).")
    parser.add_argument("--model", required=True,
                        help="spaCy pipeline name or rules:<lexicon.json>")
    args = parser.parse_args(argv)
    return serve(load_model(args.model))


if __name__ == "__main__":
    sys.exit(main())
