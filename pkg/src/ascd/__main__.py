import sys

from ascd.cli import main

sys.exit(main())
