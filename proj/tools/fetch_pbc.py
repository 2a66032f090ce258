#!/usr/bin/env python3
"""Write the Mayo Clinic PBC data (R survival::pbc, 418 rows) as data/pbc.csv.

The data come from the `rdatasets` Python package (pip install rdatasets),
which ships the R dataset collection; the Rdatasets CSV mirror is tried when
the package is unavailable. Columns written:

    time,event,age,edema,albumin,bili,protime,log_albumin,log_bili,log_protime

event is 1 for death (status == 2); transplant and censoring are 0. age is in
years. Missing values are written as NA.
"""

import argparse
import csv
import io
import math
import pathlib
import sys
import urllib.request

MIRROR = "https://vincentarelbundock.github.io/Rdatasets/csv/survival/pbc.csv"


def load_rows():
    try:
        import rdatasets  # type: ignore

        frame = rdatasets.data("survival", "pbc")
        return frame.to_dict(orient="records")
    except ImportError:
        with urllib.request.urlopen(MIRROR, timeout=60) as resp:
            text = resp.read().decode("utf-8")
        return list(csv.DictReader(io.StringIO(text)))


def number(value):
    if value is None:
        return None
    try:
        v = float(value)
    except (TypeError, ValueError):
        return None
    return None if math.isnan(v) else v


def fmt(v):
    return "NA" if v is None else repr(v)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "pbc.csv"))
    args = parser.parse_args()

    rows = load_rows()
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as f:
        f.write("time,event,age,edema,albumin,bili,protime,log_albumin,log_bili,log_protime\n")
        for r in rows:
            time = number(r["time"])
            status = number(r["status"])
            albumin, bili, protime = number(r["albumin"]), number(r["bili"]), number(r["protime"])
            logs = [None if v is None else math.log(v) for v in (albumin, bili, protime)]
            event = None if status is None else (1 if status == 2 else 0)
            values = [time, event, number(r["age"]), number(r["edema"]), albumin, bili, protime, *logs]
            f.write(",".join(fmt(v) if i != 1 or v is None else str(v) for i, v in enumerate(values)) + "\n")
    print(f"wrote {len(rows)} rows to {out}", file=sys.stderr)


if __name__ == "__main__":
    main()
