import sys

from lossgap.cli import main

sys.exit(main())
