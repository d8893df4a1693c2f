import sys

from rollupcheck.cli import main

sys.exit(main())
