import sys

from capflow.cli import main

sys.exit(main())
