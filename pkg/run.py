import sys

from basiskit.cli import main


if __name__ == "__main__":
    # python run.py run configs/bl1_a1a.json
    # python run.py verify bl2
    # python run.py plot out/bl1.csv out/gd.csv -o out/a1a.svg
    sys.exit(main())
