"""Module entry point: python -m prsamp behaves like the prsamp script."""

import sys

from .cli import main

sys.exit(main())
