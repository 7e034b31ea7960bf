"""
Entry point: `python app.py <command> ...`.

Commands are documented in readme.md and by `python app.py --help`.
"""
import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
