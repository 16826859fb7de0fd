#!/usr/bin/env python3
"""Write the canonical schema dictionaries to schemas/<version>/*.json."""

import json
from pathlib import Path

from geodlab.schemas import ALL_SCHEMAS, SCHEMA_VERSION


def main():
    root = Path(__file__).resolve().parents[1] / "schemas" / SCHEMA_VERSION
    root.mkdir(parents=True, exist_ok=True)
    for name, schema in ALL_SCHEMAS.items():
        path = root / f"{name}.schema.json"
        path.write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
