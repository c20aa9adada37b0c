#!/usr/bin/env python3
"""Rewrite the bundled scenario JSON files from the in-code builders."""

from pathlib import Path

from stabsim.device import (
    default_bell_pump2, default_bell_scenario, default_bell_single_channel,
    default_w_scenario, serialize_scenario,
)


def main():
    out = Path(__file__).resolve().parent.parent / "src" / "stabsim" / "data"
    for cfg in (default_bell_scenario(), default_bell_single_channel(),
                default_bell_pump2(), default_w_scenario()):
        path = out / f"{cfg.name}.json"
        path.write_text(serialize_scenario(cfg))
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
