"""Entry point for ``python -m likelihood_lab``."""

import sys

from .cli import main

sys.exit(main())
