import sys

from deepagent.cli import main

sys.exit(main())
