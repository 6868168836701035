import sys

from bregsaddle.cli import main

sys.exit(main())
