import sys

from ahns.cli import main

sys.exit(main())
