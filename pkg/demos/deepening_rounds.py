"""Watch the window grow when the first length bound is too short.

With the bound forced to 3, every length-3 repeat might continue, so their
positions are re-examined with a bound twice as long.

    python demos/deepening_rounds.py
"""

import tempfile
from pathlib import Path

from ex2sm import PipelineConfig, catalog_from_strings, load_report, read_results, run_ex2sm

TEXTS = ["CATTATTAGGA", "CATTCA"]


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        catalog = catalog_from_strings(TEXTS, tmp / "catalog")
        out = tmp / "store"
        run_ex2sm(catalog, PipelineConfig(lerp=3, factor=2, level=0, keep_intermediate=True), out)
        report = load_report(out)
        for state in report["rounds"]:
            r = state["index"]
            print(f"round {r}: window {state['lerp']}, lengths above {state['spl']}, "
                  f"{state['records']} records, {state['ceiling_positions']} positions at the bound")
            for path in sorted((out / "rounds" / f"r{r}").glob("*.arpad")):
                for res in read_results(path):
                    mark = "  <- at the bound" if len(res.pattern) == state["lerp"] else ""
                    print(f"    {res.pattern:<6} {','.join(map(str, res.positions))}{mark}")


if __name__ == "__main__":
    main()
