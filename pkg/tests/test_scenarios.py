import pytest

from speckernel.commands import replay
from speckernel.report import dumps, loads
from speckernel.scenarios import SCENARIOS, run_scenario


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_scenario_outcome_and_replay(name):
    res, problems = run_scenario(name)
    assert problems == []
    assert res.exit_code == SCENARIOS[name].expected_exit
    r = replay(loads(dumps(res.report)))
    assert r["reproduced"], r["differences"]
    assert r["witness_reexecuted"] is not False
