import time

import pytest

from qspir.demo import run_demo


@pytest.fixture(scope="session")
def demo_session(tmp_path_factory):
    """One full end-to-end demo run, shared by every test that audits it."""
    workdir = str(tmp_path_factory.mktemp("demo-e2e"))
    start = time.perf_counter()
    report = run_demo(workdir, seed="0", index=421)
    elapsed = time.perf_counter() - start
    return {"report": report, "elapsed": elapsed, "workdir": workdir}
