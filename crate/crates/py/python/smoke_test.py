"""Smoke test for the Python extension.

Build and place the module next to this file first:

    cargo build -p morai-py --release
    cp target/release/libmorai.so crates/py/python/morai.so
    python3 crates/py/python/smoke_test.py
"""

import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import morai  # noqa: E402


def event(t, actor, kind, **payload):
    return json.dumps({"timestamp_ms": t, "actor": actor, "kind": kind, **payload})


def ranked_log(rank):
    header = json.dumps({
        "v": 1, "session_id": "s1", "participant_id": "p1", "agent_name": "markov",
        "task": "above_ground", "level_width": 40,
    })
    lines = [
        header,
        event(0, "human", "session_start"),
        event(1, "human", "place", place={"x": 0, "y": 14, "sprite": 0}),
        event(2, "human", "end_turn", camera_x=0),
        event(3, "ai", "place", place={"x": 1, "y": 14, "sprite": 0}),
        event(4, "ai", "place", place={"x": 2, "y": 14, "sprite": 0}),
        event(5, "human", "delete", delete={"x": 2, "y": 14, "deleted_actor": "ai"}),
        event(6, "human", "end_turn", camera_x=0),
        event(7, "ai", "place", place={"x": 3, "y": 14, "sprite": 0}),
        event(8, "human", "session_end"),
        event(9, "human", "rank", rank={"reuse_rank": rank}),
    ]
    return "\n".join(lines) + "\n"


def main():
    names = morai.sprite_names()
    assert len(names) == 32 and names[0] == "ground"

    level = morai.synth_level(60, seed=1)
    assert level == morai.synth_level(60, seed=1)
    tiles = morai.level_tiles(level)
    assert tiles and all(0 <= x < 60 and 0 <= y < 15 for x, y, _ in tiles)

    log = ranked_log(1)
    morai.validate_log(log)
    credit = morai.assign_credit(log)
    rewards = [round(c[4], 12) for c in credit]
    assert rewards == [0.1, round(0.1 - 0.1, 12), 1.0], rewards
    assert [c[5] for c in credit] == [False, True, False]
    assert morai.assign_credit(ranked_log(2))[2][4] == -1.0

    try:
        morai.validate_log("not json\n")
    except ValueError:
        pass
    else:
        raise AssertionError("bad log accepted")

    samples = morai.build_smb_samples([level])
    assert samples.count("\n") > 0
    dataset = morai.build_log_dataset([log])
    assert len(dataset.splitlines()) == 2

    agent = morai.Agent.load("random")
    adds = agent.propose(level, camera_x=30, seed=3)
    occupied = {(x, y) for x, y, _ in tiles}
    assert len(adds) <= 30 and not any((x, y) in occupied for x, y, _ in adds)
    avg, rows = agent.evaluate(dataset)
    assert rows[0][0] == "p1" and rows[0][2] > 0
    print(f"ok: {len(tiles)} tiles, {len(credit)} credited additions, "
          f"{len(adds)} proposed, random Avg % {avg:.1f}")


if __name__ == "__main__":
    main()
