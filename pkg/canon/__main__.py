"""Entry point for python -m canon."""

import sys

from canon.cli import main

sys.exit(main())
