import sys

from rfegb.cli import main

sys.exit(main())
