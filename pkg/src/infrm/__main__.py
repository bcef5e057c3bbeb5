import sys

from infrm.cli import main

sys.exit(main())
