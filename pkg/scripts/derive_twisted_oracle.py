"""Regenerate the frozen reference moments for the banana-shaped toy model.

Writes src/abcrecal/models/twisted_oracle.json. Run from the repository
root after any change to the density definition:

    python3 scripts/derive_twisted_oracle.py
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from abcrecal.models.twisted import posterior_moments  # noqa: E402

OUT = pathlib.Path(__file__).resolve().parents[1] / "src/abcrecal/models/twisted_oracle.json"


def main():
    moments = posterior_moments(1.0)
    OUT.write_text(json.dumps(moments, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")
    for key, value in sorted(moments.items()):
        print(f"  {key} = {value!r}")


if __name__ == "__main__":
    main()
