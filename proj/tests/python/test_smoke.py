"""End-to-end checks of the python package against published numbers."""

import pytest

import pvsim

COUNTER_NAMES = {
    "syscalls",
    "shadow_faults",
    "second_stage_faults",
    "world_switches",
    "pt_switches",
    "gate_switches",
    "pager_calls",
    "hypercalls",
    "pt_write_emulations",
    "tlb_flushes",
    "virq_deferred",
    "virq_delivered",
    "policy_violations",
}


def test_version_and_schema():
    assert pvsim.__version__ == "0.1.0"
    assert pvsim.report_schema == "pvsim-report/1"


def test_syscall_latency_table():
    assert pvsim.syscall_latency_table() == {
        "paracell": 107,
        "paracell_no_depriv": 256,
        "pvm": 320,
        "runv": 96,
        "runc": 404,
    }


def test_builtin_profiles():
    assert set(pvsim.builtin_profiles()) == {
        "paracell",
        "paracell_no_depriv",
        "pvm",
        "runv",
        "runc",
    }


def test_generate_replay_roundtrip():
    text = pvsim.generate_trace("mixed:ops=200,spaces_max=3", seed=11)
    lines = text.splitlines()
    assert lines[0] == '{"v":1}'

    rep = pvsim.replay(text, backend="shadow", test_mode=True)
    assert rep["schema"] == pvsim.report_schema
    assert rep["backend"] == "shadow"
    assert rep["ops_replayed"] == len(lines) - 1
    assert rep["latency_ns"] > 0
    assert set(rep["counters"]) == COUNTER_NAMES
    assert rep["config"]["seed"] == 0  # replay seed, not the generator's

    # byte-for-byte deterministic
    assert pvsim.replay(text, backend="shadow", test_mode=True) == rep


def test_fresh_fault_counts():
    text = pvsim.generate_trace("fault-intensive:n=100,aliases=1", seed=1)
    shadow = pvsim.replay(text, backend="shadow")["counters"]
    assert shadow["shadow_faults"] == 200

    ept = pvsim.replay(text, backend="ept")["counters"]
    assert ept["second_stage_faults"] == 100

    pager = pvsim.replay(text, backend="pager")["counters"]
    assert pager["shadow_faults"] == 0
    assert pager["second_stage_faults"] == 0
    assert pager["pager_calls"] >= 100


def test_nested_pricing_is_dearer():
    text = pvsim.generate_trace("fault-intensive:n=50", seed=2)
    flat = pvsim.replay(text, backend="ept")
    nested = pvsim.replay(text, backend="ept", nested=True)
    assert nested["latency_ns"] > flat["latency_ns"]
    assert nested["counters"] == flat["counters"]  # pricing, not behaviour


def test_compare_equivalence():
    text = pvsim.generate_trace("mixed:ops=300,spaces_max=3", seed=4)
    cmp = pvsim.compare(text, backends=["pager", "shadow", "ept"])
    assert cmp["equivalent"] is True
    assert [r["backend"] for r in cmp["reports"]] == ["pager", "shadow", "ept"]
    assert {r["final_state_hash"] for r in cmp["reports"]} == {
        cmp["reference_final_state_hash"]
    }


def test_fault_breakdown():
    b = pvsim.fault_breakdown("paracell")
    assert b["total_ns"] == 3991
    assert b["other_ns"] == 682
    parts = {p["name"]: p["ns"] for p in b["parts"]}
    assert parts["metadata_user_pte"] == 771
    assert parts["metadata_dm_pte"] == 466
    assert parts["set_pte"] == 275
    assert parts["amortized_bind"] == 175
    assert sum(parts.values()) + b["other_ns"] == b["total_ns"]


def test_waste_at_granularity():
    touched = [0, 5000, 12345]
    assert pvsim.waste_at_granularity(touched, "4k") == 0
    assert pvsim.waste_at_granularity(touched, "2m") == 3 * 512 - 3
    assert pvsim.waste_at_granularity([], "2m") == 0
    with pytest.raises(pvsim.SimError):
        pvsim.waste_at_granularity(touched, "1g")


def test_reclamation_ops():
    assert pvsim.reclamation_ops("balloon", [1, 2, 3, 3]) == (3, 3)
    assert pvsim.reclamation_ops("pager_free_path", [1, 2, 3]) == (0, 3)
    with pytest.raises(pvsim.SimError):
        pvsim.reclamation_ops("warp", [1])


def test_overhead_stats():
    s = pvsim.overhead_stats([(0, 100, 150), (1, 0, 7), (2, 100, 120)])
    assert s["counted"] == 2
    assert s["zero_in_use_excluded"] == 1
    assert s["mean"] == pytest.approx(0.35)
    assert s["median"] == pytest.approx(0.35)
    assert s["max"] == pytest.approx(0.5)
    assert s["fraction_above"] == pytest.approx(1.0)


def test_error_mapping():
    with pytest.raises(pvsim.SimError):
        pvsim.generate_trace("warp:ops=1")

    bad = (
        '{"v":1}\n'
        '{"op":"mmap","space":0,"start":0,"len":8}\n'
        '{"op":"touch","space":0,"gva":5000,"access":"w","tag":1}\n'
    )
    with pytest.raises(pvsim.TraceError, match="op 1"):
        pvsim.replay(bad, backend="shadow")

    with pytest.raises(pvsim.SimError):
        pvsim.replay("not a trace")
