import pytest


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line to the real terminal, then assert."""

    def _verdict(num: int, name: str, ok: bool, detail: str) -> None:
        line = "ACCEPTANCE %02d %s %s (%s)" % (
            num, name, "PASS" if ok else "FAIL", detail)
        with capsys.disabled():
            print(line, flush=True)
        assert ok, "%s: %s" % (name, detail)

    return _verdict
