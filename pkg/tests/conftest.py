from hypothesis import settings

settings.register_profile("ftkl", max_examples=40, deadline=None)
settings.load_profile("ftkl")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_ftkl_acceptance", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
