"""Allow ``python -m mxm_frontlab``."""

from mxm_frontlab.cli import main

raise SystemExit(main())
