"""Entry point for python -m nearly_kahler."""

from nearly_kahler.cli import main

raise SystemExit(main())
