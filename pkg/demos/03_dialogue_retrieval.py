"""Selecting past dialogue turns for a new question.

Retrieval emits a constrained reply -- ``delta=<0|1>;selected=<ids>`` --
whether it comes from a model or from the built-in lexical fallback.  delta=1
means the question is about the dialogue itself (what did I ask...), in
which case the visual stream is dropped entirely downstream.
"""

from streamctx import (
    DialogueHistory,
    HistoryItem,
    lexical_fallback,
    parse_constrained,
    render_constrained,
    score_retrieval,
)

history = DialogueHistory((
    HistoryItem(1, "what color is the kettle on the stove", "the kettle is red", 10.0),
    HistoryItem(2, "is the window open", "yes, halfway", 20.0),
    HistoryItem(3, "did you see what i put in the basket", "you put apples in the basket", 30.0),
))

print("history:")
for item in history:
    print(f"  [{item.ask_time:.0f}s] Q{item.qa_id}: {item.question} -> {item.answer}")

questions = (
    "has the kettle on the stove changed color",   # leans on turn 1
    "you said i put apples in the basket",         # dialogue recall of turn 3
    "how many chairs are at the table",            # fresh topic
)

for question in questions:
    out = lexical_fallback(history, question)
    print(f"\nQ: {question}")
    print(f"  constrained reply: {render_constrained(out)}")
    if out.delta:
        print("  delta=1 -> this asks about the dialogue; visuals will be dropped")

print("\n--- the same grammar guards model replies ---")
for reply in ("delta=0;selected=1,3", " delta = 1 ; selected = 3 ", "sure, I'd pick turn 3!"):
    try:
        out = parse_constrained(reply, valid_ids=history.ids)
        print(f"{reply!r:45} -> selected={sorted(out.selected_ids)} delta={out.delta}")
    except Exception as exc:
        print(f"{reply!r:45} -> rejected ({type(exc).__name__})")

print("\n--- scoring a retrieval decision ---")
metrics = score_retrieval(predicted=[1, 2], gold=[1, 3], history_ids=history.ids)
print(
    f"predicted {{1,2}} vs gold {{1,3}} over 3 turns: "
    f"precision {metrics.precision:.2f}, recall {metrics.recall:.2f}, f1 {metrics.f1:.2f}"
)
