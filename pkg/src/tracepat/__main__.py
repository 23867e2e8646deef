import sys

from tracepat.cli import main

sys.exit(main())
