"""
Scoring completions
===================

Exact match, edit similarity, token recall and F1, and the same measures
over identifiers only.
"""

from grepctx.metrics import evaluate

pairs = [
    ("card = self.deck.draw()", "card = self.deck.draw()"),
    ("card = self.deck.draw( )", "card = self.deck.draw()"),
    ("card = self.deck.pop()", "card = self.deck.draw()"),
    ("hand.append(card)", "card = self.deck.draw()"),
]

for pred, ref in pairs:
    m = evaluate(pred, ref, "python")
    print(f"{pred!r:30} EM={m.code_em:5.1f} ES={m.code_es:5.1f} F1={m.code_f1:5.1f} idEM={m.id_em:5.1f} idF1={m.id_f1:5.1f}")
