import sys

from eprsim.cli import main

sys.exit(main())
