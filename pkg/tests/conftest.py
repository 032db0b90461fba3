import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from torflowid.synth import PaddingConfig, PaddingMode, build_labeled_corpus, load_archetypes  # noqa: E402


@pytest.fixture(scope="session")
def small_corpora(tmp_path_factory):
    """Six classes x 5 sessions x 40 s, once per padding mode."""
    root = tmp_path_factory.mktemp("corpora")
    specs = load_archetypes()
    return {
        mode: build_labeled_corpus(specs, 5, 40.0, PaddingConfig(PaddingMode(mode)), 11, root / mode)
        for mode in ("reduced", "full")
    }


def pytest_terminal_summary(terminalreporter):
    from verdicts import VERDICTS
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
