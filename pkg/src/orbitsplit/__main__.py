import sys

from orbitsplit.cli import main

sys.exit(main())
