import sys

from aernoc.cli import main

sys.exit(main())
