import os
import webbrowser
from pathlib import Path

import pytest
from invoke import task

ROOT_FOLDER = Path(__file__).resolve().parent
SOURCES = "src/pymixbf tests tasks.py"


@task
def isort(c):
    c.run(f"isort -m 3 -tc -fgw 0 -up -w 88 -rc {SOURCES}")


@task
def black(c):
    c.run(f"black {SOURCES}")


@task
def flake(c):
    c.run(
        "flake8 --max-line-length=80 --select=C,E,F,W,B,B950 "
        f"--ignore=B305,E203,E501,E731,W503 {SOURCES}"
    )


@task(pre=[isort, black, flake])
def check(c):
    pass


@task(help={"ci": "run every hypothesis example, as on the build server"})
def test(c, ci=False):
    if ci:
        os.environ["CI"] = "1"
    pytest.main(["-rsx", "tests/"])


@task(help={"out": "scene directory", "seed": "scene seed", "rmnr": "ratio in dB"})
def simulate(c, out="scene", seed=0, rmnr=20.0):
    c.run(f"pymixbf -v simulate --out {out} --seed {seed} --rmnr {rmnr}")


@task(help={"out": "benchmark JSON"})
def benchmark(c, out="benchmark.json"):
    c.run(f"pymixbf -v benchmark --out {out}")


@task
def docs(c, open=False):
    docs_folder = ROOT_FOLDER / "docs"
    with c.cd(str(docs_folder)):
        c.run("make html")
    if open:
        html_path = docs_folder / "_build" / "html" / "index.html"
        webbrowser.open(html_path)
