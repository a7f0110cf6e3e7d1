"""Hand-computed truth tables for filter acceptance, domination and pruning (xi = 0.1)."""

from ftrcontact.filter import Filter, FilterEntry, add_entry, dominates, is_acceptable

XI = 0.1


def _filter(*pairs):
    f = Filter(XI)
    for J, th in pairs:
        f.add(J, th)
    return f


def _entries(f):
    return sorted((e.J, e.theta) for e in f.entries)


def _raises_on_feasible_insert():
    try:
        add_entry(Filter(XI), 1.0, 0.0)
    except ValueError:
        return True
    return False


# (name, thunk, expected)
CASES = [
    # acceptance: J < J_i - xi*theta  or  theta < (1 - xi)*theta_i against every entry
    ("accept: 0.9 < 1.0 - 0.06", lambda: is_acceptable(_filter((1.0, 0.5)), 0.9, 0.6), True),
    ("reject: 1.2 !< 0.95 and 0.5 !< 0.45", lambda: is_acceptable(_filter((1.0, 0.5)), 1.2, 0.5), False),
    ("accept: 0.1 < 0.45", lambda: is_acceptable(_filter((1.0, 0.5)), 2.0, 0.1), True),
    ("accept: empty filter", lambda: is_acceptable(Filter(XI), 5.0, 3.0), True),
    ("accept: energy vs first, theta vs second", lambda: is_acceptable(_filter((1.0, 0.5), (0.5, 1.0)), 0.8, 0.7),
     True),
    ("reject: fails against first entry", lambda: is_acceptable(_filter((1.0, 0.5), (0.5, 1.0)), 0.95, 0.95),
     False),
    ("reject: energy margin is strict", lambda: is_acceptable(_filter((1.0, 0.5)), 0.95, 0.5), False),
    ("accept: 0.44 < 0.45", lambda: is_acceptable(_filter((1.0, 0.5)), 3.0, 0.44), True),
    ("reject: theta margin is strict", lambda: is_acceptable(_filter((1.0, 0.5)), 3.0, 0.45), False),
    # domination: J_a < J_b - xi*theta_a  and  theta_a < (1 - xi)*theta_b
    ("dominates: (0.5,0.2) over (1.0,0.5)", lambda: dominates(FilterEntry(0.5, 0.2), FilterEntry(1.0, 0.5), XI),
     True),
    ("not dominates: reversed", lambda: dominates(FilterEntry(1.0, 0.5), FilterEntry(0.5, 0.2), XI), False),
    ("not dominates: larger theta", lambda: dominates(FilterEntry(0.4, 0.9), FilterEntry(0.5, 0.2), XI), False),
    ("dominates: 0.9 < 0.96 and 0.4 < 0.45", lambda: dominates(FilterEntry(0.9, 0.4), FilterEntry(1.0, 0.5), XI),
     True),
    ("not dominates: 0.97 !< 0.96", lambda: dominates(FilterEntry(0.97, 0.4), FilterEntry(1.0, 0.5), XI), False),
    # insertion and pruning
    ("insert into empty", lambda: _entries(_filter((1.0, 0.5))), [(1.0, 0.5)]),
    ("insert dominating pair prunes", lambda: _entries(_filter((1.0, 0.5), (0.5, 0.2))), [(0.5, 0.2)]),
    ("insert incomparable pair keeps both", lambda: _entries(_filter((1.0, 0.5), (0.5, 0.2), (0.4, 0.9))),
     [(0.4, 0.9), (0.5, 0.2)]),
    ("insert feasible pair is refused", _raises_on_feasible_insert, True),
]
