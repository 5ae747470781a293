import sys

from fermiflux.cli.main import main

sys.exit(main())
