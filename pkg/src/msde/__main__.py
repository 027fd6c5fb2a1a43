"""Entry point for ``python -m msde``."""
import sys

from .cli import main

sys.exit(main())
