#!/usr/bin/env python3
# The review service: blinded equivalence annotation by three synthetic
# annotators over HTTP, with live agreement statistics that match an
# offline recomputation on the exported label matrix.

import json
import threading
import urllib.request

from veribench import AnnotationMatrix, fleiss_kappa
from veribench.service import ReviewService, make_server

# Stored items carry strata and script verdicts; the service must never
# serve those fields to an annotator.
items = [
    {
        "item": f"col{i:02d}",
        "gt_values": ["4.41", "-16.73", "28.20"],
        "pred_values": ["0.0441", "-0.1673", "0.2820"],
        "description": f"growth rate variant {i}",
        "stratum": "B" if i % 2 else "A",
        "original_verdict": False,
        "patched_verdict": True,
    }
    for i in range(10)
]

service = ReviewService(annotation_items=items)
server = make_server(service)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://127.0.0.1:{server.server_address[1]}"
print(f"review service listening on {base}")


def call(method, path, body=None):
    data = json.dumps(body).encode() if body is not None else None
    request = urllib.request.Request(f"{base}{path}", data=data, method=method)
    request.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(request) as response:
        return json.loads(response.read())


session = call("POST", "/session", {"kind": "equivalence"})["session"]
print(f"created blinded session {session}")

first = call("GET", f"/queue/{session}?annotator=a1")
print(f"first card payload keys: {sorted(k for k in first if k != 'labels')}")
assert "stratum" not in first and "original_verdict" not in first

# Three annotators label every card; annotator a3 disagrees on two items.
for annotator in ("a1", "a2", "a3"):
    while True:
        card = call("GET", f"/queue/{session}?annotator={annotator}")
        if card.get("done"):
            break
        disagrees = annotator == "a3" and card["item"] in ("col03", "col07")
        call("POST", "/label", {
            "session": session,
            "item": card["item"],
            "annotator": annotator,
            "label": "not_equivalent" if disagrees else "equivalent",
        })

live = call("GET", f"/agreement/{session}")
print(f"\nlive agreement: kappa={live['kappa']:.3f} "
      f"percent={live['percent_agreement']:.1f} over {live['items_complete']} items")

export = call("GET", f"/labels/{session}")
matrix = AnnotationMatrix(
    items=tuple(export["items"]),
    raters=tuple(export["raters"]),
    labels=tuple(tuple(row) for row in export["labels"]),
)
offline = fleiss_kappa(matrix)
print(f"offline recomputation:   kappa={offline.kappa:.3f} "
      f"percent={offline.percent_agreement:.1f}")
assert abs(offline.kappa - live["kappa"]) < 1e-12

server.shutdown()
print("\nlive and offline agreement match; blinding held")
