import json

import pytest

import irqsym


def test_fixture_corpus_is_listed():
    names = irqsym.fixture_names()
    assert "delay-boot" in names and "uart-isr" in names


def test_assemble_encodes_add():
    out = irqsym.assemble(".sp 0x20010000\n.reset start\nstart:\n ADD r1, r1, r2\n HALT\n")
    assert 0x04112000 in out["words"]
    assert out["symbols"]["start"] == out["words"][1]


def test_assembler_errors_raise():
    with pytest.raises(irqsym.Error, match="line 4"):
        irqsym.assemble(".sp 0x20010000\n.reset start\nstart:\n J nowhere\n")


def test_delay_boot_needs_five_ticks():
    report, trend = irqsym.analyze("fixture:delay-boot", steps=200_000)
    assert report["schema"].startswith("irqsym.analysis/")
    assert report["sequences"]["len"]["max"] == 5
    assert report["coverage"]["covered"] == report["coverage"]["total_blocks"]
    rows = trend.strip().splitlines()
    assert rows[0] == "step,covered"
    assert int(rows[-1].split(",")[1]) == report["coverage"]["covered"]


def test_no_int_stays_in_the_delay_loop():
    aim, _ = irqsym.analyze("fixture:delay-boot", steps=100_000)
    none, _ = irqsym.analyze("fixture:delay-boot", mode="no_int", steps=100_000)
    assert none["coverage"]["covered"] < aim["coverage"]["covered"]


def test_imt_dump_shape():
    table = irqsym.imt_dump("fixture:uart-isr", steps=50_000)
    assert table
    rec = table[0]["records"][0]
    assert set(rec) == {"line", "sr_value", "pattern", "formula", "side_effects"}
    assert table[0]["var_addr"].startswith("0x")


def test_concrete_fault_and_cli_exit_codes(tmp_path):
    out = irqsym.run("fixture:oob-write", dr=[1, 0xBEEF])
    assert out["fault"]["kind"] == "write"
    code, _, _ = irqsym.cli(["analyze", "fixture:oob-write", "--deterministic", "--out", str(tmp_path / "r.json")])
    assert code == 2
    assert json.loads((tmp_path / "r.json").read_text())["faults"]
    code, _, err = irqsym.cli(["analyze", str(tmp_path / "missing.s")])
    assert code == 1 and "cannot read" in err


def test_compare_orders_modes():
    rows = {r["mode"]: r["covered"] for r in irqsym.compare("fixture:interrupt-chain", ["no_int", "fixed", "aim"], 200_000)}
    assert rows["aim"] > rows["fixed:1000"] >= rows["no_int"]


def test_cfg_dot():
    assert irqsym.cfg_dot("fixture:delay-boot").startswith("digraph")
