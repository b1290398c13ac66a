"""Renders the prompt goldens with the reference Jinja2 engine.

Run from the repository root: python3 tests/golden/make_goldens.py
The judge goldens are also rendered with the original loop-index turn arithmetic
and must agree with it whenever the transcript has no greeting.
"""
import json
import pathlib

import jinja2
import yaml

ROOT = pathlib.Path(__file__).resolve().parents[2]
OUT = ROOT / "tests" / "golden"
ENV = jinja2.Environment(trim_blocks=True, lstrip_blocks=True, undefined=jinja2.StrictUndefined,
                         keep_trailing_newline=False)

ORIGINAL_JUDGE_LOOP = """{% for m in messages %}
{% if loop.index % 2 == 1 %}
Turn {{(loop.index + 1) // 2}}:
{% endif %}{{m.role}}: {{m.content.strip()}}
{% endfor %}"""


def template(name):
    return ENV.from_string((ROOT / "templates" / f"{name}.jinja").read_text())


def card(cid):
    d = yaml.safe_load((ROOT / "fixtures" / "suite" / "characters" / f"{cid}.yaml").read_text())
    d = {k: (v.strip() if isinstance(v, str) else v) for k, v in d.items()}
    for optional in ("example_prompt", "initial_message"):
        d.setdefault(optional, None)
    return d


def situation(sid):
    d = yaml.safe_load((ROOT / "fixtures" / "suite" / "situations" / f"{sid}.yaml").read_text())
    return d["text"].strip()


def judge_messages(messages):
    greeting = messages[0]["role"] == "assistant"
    out, turn = [], 0
    for i, m in enumerate(messages):
        opens = False
        if m["role"] == "user":
            turn += 1
            opens = not (greeting and turn == 1)
        elif greeting and i == 0:
            opens = True
        role = "player" if m["role"] == "assistant" else m["role"]
        out.append({"role": role, "content": m["content"], "turn": 1 if greeting and i == 0 else turn,
                    "opens_turn": opens})
    return out


TRANSCRIPTS = json.loads((OUT / "transcripts.json").read_text())


def write(name, text):
    (OUT / name).write_text(text)


def main():
    player = template("player")
    for cid in ["ada_brennan", "brother_tomas", "captain_vey", "dr_okafor"]:
        write(f"player_{cid}.txt", player.render(character=card(cid)))

    inter = template("interrogator")
    for name, t in TRANSCRIPTS.items():
        c = card(t["character"])
        write(f"interrogator_{name}.txt",
              inter.render(char_summary=c["char_summary"], situation=situation(t["situation"]), messages=t["messages"]))

    judge = template("judge")
    original = ENV.from_string((ROOT / "templates" / "judge.jinja").read_text().split("{% for m in messages %}")[0]
                               + ORIGINAL_JUDGE_LOOP + "\nThe correct JSON:")
    for name, t in TRANSCRIPTS.items():
        if not any(m["role"] == "assistant" for m in t["messages"][1:]):
            continue
        c = card(t["character"])
        msgs = judge_messages(t["messages"])
        text = judge.render(char_description=c["system_prompt"], messages=msgs)
        if t["messages"][0]["role"] == "user":
            assert text == original.render(char_description=c["system_prompt"], messages=msgs), name
        write(f"judge_{name}.txt", text)


if __name__ == "__main__":
    main()
