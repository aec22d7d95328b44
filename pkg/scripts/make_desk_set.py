"""Write the 20-instance desk set as .dcm files."""

import argparse
from pathlib import Path

from dcmndp.bench import desk_set
from dcmndp.instance import serialize_instance


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", nargs="?", default="data/desk")
    args = parser.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for inst in desk_set():
        (out / f"{inst.name}.dcm").write_text(serialize_instance(inst))
        print(f"{inst.name}: n={inst.n} m={inst.m} K={inst.k}")


if __name__ == "__main__":
    main()
