import sys

from queueing_chain.cli import main

sys.exit(main())
