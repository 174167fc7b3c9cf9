import sys

from archetype.cli import main

sys.exit(main())
