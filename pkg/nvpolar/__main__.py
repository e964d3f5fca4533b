from __future__ import annotations

from nvpolar.cli import main

if __name__ == "__main__":
    main()
