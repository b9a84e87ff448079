# Entrypoint for running the workbench CLI
# This file simply imports and runs main() from app/main.py

import sys

from app.main import main

# This allows: python main.py search --ground int:1..12 --template schur
if __name__ == "__main__":
    sys.exit(main())
