import sys

from rnest.cli import main

sys.exit(main())
