"""Run the smd command line without installing the package."""
import sys

from smdlab.cli import main

if __name__ == "__main__":
    sys.exit(main())
