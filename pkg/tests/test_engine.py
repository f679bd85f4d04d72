import itertools
import random

import pytest

from axsim.engine import Engine, Port, SchedulingError


def collect(engine, log):
    def action(tag):
        log.append((engine.now, tag))
    return action


def test_event_at_zero_dispatches_first():
    eng = Engine()
    log = []
    eng.schedule(0, collect(eng, log), "a")
    eng.schedule(10, collect(eng, log), "b")
    eng.run()
    assert log[0] == (0, "a")


def test_equal_fire_times_keep_scheduling_order():
    eng = Engine()
    log = []
    for tag in "abcde":
        eng.schedule(7, collect(eng, log), tag)
    eng.run()
    assert [tag for _, tag in log] == list("abcde")


def test_out_of_order_scheduling_dispatches_by_time():
    eng = Engine()
    log = []
    eng.schedule(5, collect(eng, log), "late")
    eng.schedule(3, collect(eng, log), "early")
    eng.run()
    assert [t for t, _ in log] == [3, 5]


def test_dispatch_order_matches_sorted_key_oracle():
    # ordering oracle over permutations of <= 6 events
    times = [4, 1, 4, 9, 1, 3]
    for perm in itertools.permutations(range(len(times))):
        eng = Engine()
        log = []
        keys = []
        for seq, idx in enumerate(perm):
            eng.schedule(times[idx], collect(eng, log), idx)
            keys.append((times[idx], seq, idx))
        eng.run()
        expected = [idx for _, _, idx in sorted(keys)]
        assert [tag for _, tag in log] == expected


def test_run_until_empty_queue_returns_deadline():
    assert Engine().run_until(100) == 100


def test_run_until_returns_last_processed_time():
    eng = Engine()
    eng.schedule(7, lambda _: None)
    assert eng.run_until(100) == 7


def test_run_until_processes_only_up_to_deadline():
    eng = Engine()
    log = []
    eng.schedule(5, collect(eng, log), "in")
    eng.schedule(50, collect(eng, log), "out")
    eng.run_until(10)
    assert [tag for _, tag in log] == ["in"]
    eng.run()
    assert [tag for _, tag in log] == ["in", "out"]


def test_replay_is_deterministic():
    def build_and_run(seed):
        rng = random.Random(seed)
        eng = Engine()
        log = []
        for i in range(200):
            eng.schedule(rng.randrange(0, 50), collect(eng, log), i)
        eng.run()
        return log

    assert build_and_run(11) == build_and_run(11)


def test_scheduling_in_the_past_is_a_hard_fault():
    eng = Engine()
    eng.schedule(10, lambda _: None)
    eng.run()
    with pytest.raises(SchedulingError):
        eng.schedule(5, lambda _: None)


def test_conservation_every_event_dispatched_once():
    eng = Engine()
    hits = []
    for i in range(64):
        eng.schedule(i % 7, hits.append, i)
    eng.run()
    assert sorted(hits) == sorted(range(64))
    assert eng.dispatched == 64


def test_port_delivers_fifo_with_fixed_delay():
    eng = Engine()
    port = Port("dma", "accel", fixed_delay=5)
    log = []
    eng.schedule(0, lambda _: [eng.send(port, collect(eng, log), i) for i in range(3)])
    eng.run()
    assert log == [(5, 0), (5, 1), (5, 2)]


def test_port_rejects_negative_delay():
    with pytest.raises(ValueError):
        Port("a", "b", fixed_delay=-1)
