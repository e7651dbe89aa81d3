import sys

from pxem.cli import main

sys.exit(main())
