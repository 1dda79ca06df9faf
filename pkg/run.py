"""
Entrypoint: run the betweenness engine CLI.
Usage: python run.py <init|apply|verify|top|gn|bench> ...
"""

import sys
from pathlib import Path

BACKEND_DIR = Path(__file__).resolve().parent / "backend"


def main():
    sys.path.insert(0, str(BACKEND_DIR))
    from cli import main as cli_main

    try:
        sys.exit(cli_main(sys.argv[1:]))
    except KeyboardInterrupt:
        print("\nInterrupted.")
        sys.exit(130)


if __name__ == "__main__":
    main()
