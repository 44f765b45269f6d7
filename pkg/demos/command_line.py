"""A command-line session: ingest FASTA, plan, run, then ask the store questions.

    python demos/command_line.py
"""

import tempfile
from pathlib import Path

from ex2sm.cli import run_command

FASTA = """>seq_a sample one
CATTATTAGGA
>seq_b sample two
cattca
"""


def run(*argv):
    print("$ ex2sm", " ".join(argv))
    code = run_command(list(argv))
    if code:
        print(f"(exit {code})")
    print()


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "pair.fa").write_text(FASTA)
        run("ingest", str(tmp / "pair.fa"), "--out", str(tmp / "catalog"))
        run("plan", "--n", "17", "--alphabet", "ACGT", "--prob", "0.01")
        run("pipeline", "--catalog", str(tmp / "catalog"), "--out", str(tmp / "store"), "--cl", "1", "--quiet")
        store = str(tmp / "store")
        run("stats", "--store", store)
        run("query", "--store", store, "--pattern", "ATTA")
        run("query", "--store", store, "--pattern", "GATTACA")
        run("top", "--store", store, "--length", "2", "--k", "3")
        run("cross", "--store", store, "--count", "2")


if __name__ == "__main__":
    main()
