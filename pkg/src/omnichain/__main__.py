import sys

from omnichain.cli import main

sys.exit(main())
