"""Allow `python -m depmark` as an alias of the `depmark` script."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
