import re

from modules.dilemmas.domain import Decision

_MARKER = re.compile(r"decision\s*:", re.IGNORECASE)
_OPTION = re.compile(r"\boption\s+([ab])\b", re.IGNORECASE)


def parse_decision(raw):
    """Read the choice after the last ``Decision:`` marker.

    Lines after the marker are read in order until one names an option;
    naming both options on that line is ambiguous.
    """
    markers = list(_MARKER.finditer(raw or ""))
    if not markers:
        return Decision.invalid("no decision marker")

    for line in raw[markers[-1].end() :].splitlines():
        options = {match.group(1).lower() for match in _OPTION.finditer(line)}
        if len(options) > 1:
            return Decision.invalid("ambiguous decision")
        if options:
            return Decision.option_a() if options == {"a"} else Decision.option_b()
    return Decision.invalid("no option after decision marker")
