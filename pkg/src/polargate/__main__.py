import sys

from polargate.cli import main

sys.exit(main())
