from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(results, key=lambda k: int(k[1:])):
        ok, detail = results[c]
        terminalreporter.write_line(f"{c:4s} {'PASS' if ok else 'FAIL'}  {detail}")
