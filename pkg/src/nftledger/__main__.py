import sys

from nftledger.cli import main

sys.exit(main())
