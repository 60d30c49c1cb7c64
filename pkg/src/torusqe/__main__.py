import sys

from torusqe.cli import main

sys.exit(main())
