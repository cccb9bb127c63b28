import pytest

# Example pairs with their printed (cosine, BLEU, Jaccard) columns.
REFERENCE_PAIRS = [
    ("He's denied them protection.",
     "They're not allowed to do that in a protective shield.", 0.630, 1.7, 0.0),
    ("voter representation cannot be guaranteed.",
     "It is not possible to guarantee the right to vote.", 0.917, 2.0, 0.0),
    ("It is therefore necessary to compensate for business tax failures in the coming years.",
     "Therefore, the trade tax losses would have to be compensated in the next few years.", 0.796, 6.9, 0.273),
    ("Therefore, unavoidable waiting times may occur.",
     "For this reason, there may be inevitable waiting times.", 0.866, 10.7, 0.250),
    ("Maintenance-free batteries are supposed to prevent this from happening.",
     "Maintenance-free batteries should actually prevent that.", 0.921, 16.9, 0.308),
    ("Do taxes need to be raised to finance the stimulus package?",
     "Do taxes have to be increased to finance the economic stimulus package?", 0.949, 21.0, 0.615),
    ("Small successes for the first time with tested Corona vaccine (9.45 o'clock)",
     "Small successes with tested Corona vaccine (9.45 am)", 0.959, 38.6, 0.533),
    ("Everything is now clear for the construction of a new ice channel at Barenberg.",
     "Now everything is clear for the start of construction of a new ice channel on Barenberg.", 0.994, 43.6, 0.812),
]


@pytest.fixture
def reference_pairs():
    return REFERENCE_PAIRS


ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{status:4}  {name}")
