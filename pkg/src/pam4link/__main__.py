import sys

from pam4link.cli import main

sys.exit(main())
