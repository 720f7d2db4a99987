"""Smoke test for the objnav_py extension.

Build first, e.g. `maturin develop --release` from crates/py, then run
`python python/smoke_test.py`.
"""

import json

import objnav_py as on


def main():
    house = on.generate_house(7)
    assert house.width > 0 and house.object_count() > 0
    again = on.House.from_json(house.to_json())
    assert again.to_json() == house.to_json()

    episodes = json.loads(on.sample_episodes(house, 3, 1))
    assert len(episodes) == 3
    ep = episodes[0]
    start = ep["initial_pose"]

    # planner agrees with the stored demonstration
    goal = ep["recommended_cell"]
    cells, cost = on.plan_path(
        house,
        (start["cell"][0], start["cell"][1], start["rotation"]),
        (goal[0], goal[1]),
    )
    assert [list(c) for c in cells] == ep["path"]["cells"]
    assert cost >= len(cells) - 1

    # replaying the demonstration succeeds
    sim = on.Simulator(house, start["cell"][0], start["cell"][1], start["rotation"])
    for action in ep["actions"]["actions"]:
        json.loads(sim.step(action))
    assert sim.terminated
    assert sim.is_success(ep["target_object_id"])

    steps = json.loads(on.build_traces(house, json.dumps(episodes)))
    assert steps and all(s["response"].splitlines()[-1].startswith("3) ") for s in steps)

    report = json.loads(on.evaluate("oracle", [house], json.dumps(episodes)))
    assert report["overall"]["sr"] == 1.0

    assert on.rouge_l("a b c", "a b c") == 1.0
    print(f"ok: {house!r}, {len(episodes)} episodes, {len(steps)} trace steps")


if __name__ == "__main__":
    main()
