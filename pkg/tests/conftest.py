def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, result in test_acceptance.RESULTS.items():
        terminalreporter.write_line(result.line())
