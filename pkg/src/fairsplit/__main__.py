import sys

from fairsplit.cli import main

sys.exit(main())
