"""Smoke test for the foampilot extension module.

Build and install first:

    pip install --no-build-isolation -e crates/py
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

import foampilot

ROOT = Path(__file__).resolve().parent.parent
POOL_FIRE = ROOT / "crates" / "core" / "tests" / "fixtures" / "cases" / "poolFire"

SINFO = "cpu* 16 32\ngpu 2 64\n"


def fenced(payload):
    return "```json\n" + json.dumps(payload) + "\n```"


def check_dict():
    d = foampilot.FoamDict.parse("a 1;\nsub { b (0 0 1); c uniform 300; }\n")
    assert d.get("sub.b") == "(0 0 1)", d.get("sub.b")
    e = d.set("sub.c", "uniform 600")
    assert e.get("sub.c") == "uniform 600"
    assert d.get("sub.c") == "uniform 300"
    assert foampilot.FoamDict.parse(e.serialize()) == e
    f = e.insert("sub.d", "yes")
    assert f.get("sub.d") == "yes"
    try:
        d.set("sub.missing", "1")
    except ValueError:
        pass
    else:
        raise AssertionError("set on a missing key should raise")


def check_case(tmp):
    flat = foampilot.flatten_case(str(POOL_FIRE))
    assert flat, "empty snapshot"
    prompt = foampilot.build_config_prompt(str(POOL_FIRE), "double the burner size")
    assert "double the burner size" in prompt
    assert "system/topoSetDict" in prompt

    copy = tmp / "poolFire"
    shutil.copytree(POOL_FIRE, copy)
    topo = copy / "system" / "topoSetDict"
    topo.write_text(topo.read_text().replace("(-0.15 -0.15 -0.001)", "(-0.3 -0.3 -0.001)"))
    changes = foampilot.diff_cases(str(POOL_FIRE), str(copy))
    files = sorted({c["rel_path"] for c in changes})
    assert files == ["system/topoSetDict"], changes


def check_index(tmp):
    src = tmp / "src"
    (src / "combustion").mkdir(parents=True)
    (src / "combustion" / "eddyDissipation.C").write_text("void eddyDissipation::correct() { Cmix; }\n")
    (src / "pyrolysis.C").write_text("void pyrolysisModel::evolve() {}\n")
    index = foampilot.CodeIndex.build(str(src))
    assert len(index) == 2
    assert index.dimension == 256
    assert index.truncated_count == 0
    path = tmp / "code.fpix"
    index.save(str(path))
    loaded = foampilot.CodeIndex.load(str(path))
    hits = loaded.search("eddyDissipation", k=1)
    assert hits[0][0] == "combustion/eddyDissipation.C", hits
    assert loaded.document(hits[0][0]).startswith("// File: combustion/eddyDissipation.C\n")
    try:
        foampilot.CodeIndex.load(str(tmp / "absent.fpix"))
    except OSError:
        pass
    else:
        raise AssertionError("loading a missing index should raise")
    return loaded


def check_hpc():
    assert foampilot.parse_cell_count("Mesh stats\n    cells:            1600000\n") == 1600000
    resources = foampilot.parse_resources(SINFO)
    assert resources, resources
    layout = foampilot.choose_layout(1_600_000, SINFO)
    assert layout["ntasks"] == 32 and layout["nodes"] == 1, layout
    script = foampilot.render_slurm_script(
        layout["partition"], layout["nodes"], layout["ntasks"], layout["cores_per_node"],
        "/opt/fire/bashrc", "/scratch/poolFire",
    )
    assert "#SBATCH --ntasks=32" in script, script
    assert "fireFoam" in script


def check_agent(tmp, index):
    assert foampilot.estimate_tokens("abcde") == 2
    assert foampilot.truncate_for_embedding("x" * 100, 5) == "x" * 20
    action = foampilot.parse_action(fenced({"action": "shell", "action_input": "ls"}))
    assert action["kind"] == "tool_call" and action["tool_name"] == "shell", action

    outcome = foampilot.run_scripted_session(
        "say hi",
        [
            fenced({"action": "shell", "action_input": "echo smoke > out.txt"}),
            fenced({"action": "retrieve", "action_input": "pyrolysis"}),
            fenced({"action": "Final Answer", "action_input": "done"}),
        ],
        str(tmp),
        index=index,
    )
    assert outcome["status"] == "completed", outcome["status"]
    assert outcome["final_text"] == "done"
    assert outcome["loop_count"] == 2
    assert (tmp / "out.txt").read_text() == "smoke\n"

    denied = foampilot.run_scripted_session(
        "touch it",
        [
            fenced({"action": "shell", "action_input": "touch never.txt"}),
            fenced({"action": "Final Answer", "action_input": "skipped"}),
        ],
        str(tmp),
        approval="interactive",
    )
    assert denied["status"] == "completed"
    assert not (tmp / "never.txt").exists()


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        check_dict()
        check_case(tmp)
        index = check_index(tmp)
        check_hpc()
        check_agent(tmp, index)
    print("foampilot smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
