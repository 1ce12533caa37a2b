"""Walk one live session end to end over the HTTP interface.

Uses the in-process test client so the script is self-contained; point
an httpx/requests client at `prefline serve` for the real thing.  The
scripted subject likes actions close to (0.7, 0.3) and never learns
that the last six trials are validation, which is the point.
"""
import json

from fastapi.testclient import TestClient

from prefline.service import create_app

client = TestClient(create_app())

created = client.post("/sessions", json={
    "space": {"lower": [0.0, 0.0], "upper": [1.0, 1.0],
              "names": ["stride", "cadence"]},
    "config": {"granularity": 10, "learning_trials": 12},
    "seed": 42,
}).json()
sid = created["id"]
print("created session", sid)
print("first trial payload:", json.dumps(created["trial"]))


def liking(action):
    return -(action[0] - 0.7) ** 2 - (action[1] - 0.3) ** 2


trial = created["trial"]
while True:
    if trial["previous"] is None:
        preference = "none"
    elif liking(trial["action"]) > liking(trial["previous"]):
        preference = "first"
    else:
        preference = "second"

    # the trial token makes duplicate submissions detectable (409)
    reply = client.post(f"/sessions/{sid}/feedback",
                        json={"preference": preference,
                              "trial": trial["index"]}).json()
    if "summary" in reply:
        break
    trial = reply["trial"]

summary = reply["summary"]
print(f"\nfinished after {summary['trials_completed']} trials")
print(f"validation: a_max preferred in {summary['validation']['preferred']}"
      f"/{summary['validation']['scored']} comparisons")
print("believed best action:", [round(v, 3) for v in summary["a_max"]])

report = client.get(f"/sessions/{sid}/report").json()
row = report["correlation"][0]
print(f"\nper-dimension report, {row['name']}: visits by decile "
      f"{row['visits']}, Pearson r {row['r']:.3f}")
