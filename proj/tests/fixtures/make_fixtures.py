#!/usr/bin/env python3
"""Regenerates the exam bundles and replay cassettes under tests/fixtures.

Prompts and digests are computed here independently of the C++ code, so a
replay hit in the C++ tests also checks template rendering and hashing.

    python3 tests/fixtures/make_fixtures.py
"""
import csv
import hashlib
import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
MODEL = "gpt-3.5-turbo"
TEMPERATURE = 0.0

QUALITY = "Extremely good., Very good., Good., Ok., Bad., Very bad., Extremely bad."
SIMILARITY = "Very close., Close., Somewhat close., Somewhat distant., Distant., Very distant.."


def educator_prompt(q, a):
    return (f"Here is a question: {q} . Here is an answer: {a}. How good is the answer to the question? "
            f"Start the reply with one of the following: {QUALITY} Explain the choice. Explain also what is missing.")


def student_prompt(q, a):
    return (f"Here is a question: {q} . Here is an answer: {a}. How good is the answer to the question? "
            f"Start the reply with one of the following: {QUALITY} Explain the choice.")


def comparison_prompt(a, e):
    return (f"Here is an answer: {a} . Here is the optimal answer: {e}. How close is the answer to the optimal "
            f"answer? Start the reply with one of the following: {SIMILARITY} Explain the choice.")


def shortest(x):
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def digest(prompt):
    canonical = f"{MODEL}\n{shortest(TEMPERATURE)}\n{prompt}"
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def entry(prompt, reply=None, failure=None):
    e = {"digest": digest(prompt), "model": MODEL, "temperature": TEMPERATURE, "prompt": prompt,
         "reply": reply or ""}
    if failure:
        e["failure"] = failure
    return e


def write_json(name, doc):
    with open(os.path.join(HERE, name), "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, indent=2)
        f.write("\n")


def write_cassette(name, entries):
    with open(os.path.join(HERE, name), "w", encoding="utf-8") as f:
        for e in entries:
            f.write(json.dumps(e, ensure_ascii=False) + "\n")


LINKAGE_Q = ("What is the difference between single linkage and average linkage (hierarchical) clustering?")
LINKAGE_EDU = ("The two differ in distance metric used to cluster. Single linkage: Merge two clusters based on "
               "minimum distance between any two points; Tendency to form long chains; Average linkage: merge two "
               "clusters based on average distance between any two points; tendency to “ball” like "
               "clusters;")
LINKAGE_ALT = ("Single linkage merges the clusters whose closest pair of points is nearest, average linkage merges "
               "the clusters with the smallest mean pairwise distance.")
STUDENT_22 = ("In single linkage, we compare the two closest data points (the ones with minimal distance) from two "
              "separate clusters. In average linkage, we compare all the data points from a cluster with all the "
              "datapoints from another cluster and get an average distance.")
STUDENT_24 = ("When using single linkage in hierarchical clustering, the clusters are made with the shortest distance "
              "between the data point the closest cluster. Average linkage on the other hand takes the maximum "
              "distance and the minimum distance to each cluster, evaluates the average and then builds the "
              "clusters upon these average distances.")


def linkage_exam():
    questions = [
        {"id": "Q1", "text": LINKAGE_Q, "max_points": 10, "language_tag": "en",
         "educator_answers": [{"label": "primary", "text": LINKAGE_EDU}, {"label": "alt", "text": LINKAGE_ALT}]},
        {"id": "Q2", "text": "What is overfitting?", "max_points": 5, "language_tag": "en",
         "educator_answers": [{"text": "The model fits noise in the training data and generalizes poorly to "
                                       "unseen data."}]},
        {"id": "Q3", "text": "Was ist ein Informationssystem?", "max_points": 10, "language_tag": "de",
         "educator_answers": [{"text": "Ein Informationssystem ist ein soziotechnisches System, das Informationen "
                                       "erfasst, verarbeitet, speichert und bereitstellt."}]},
    ]
    # (student, question, text, points, replies-per-reference or failure)
    plan = [
        ("s1", "Q1", STUDENT_24, 9, ["Very distant. The answer confuses average linkage with a mix of maximum and "
                                     "minimum distances.",
                                     "Very distant. The answer does not describe the mean pairwise distance."]),
        ("s1", "Q2", "It memorises the training set and does badly on new data.", 5,
         ["Close. The answer captures poor generalization but does not mention noise."]),
        ("s1", "Q3", "Ein System aus Menschen und Technik, das Informationen verarbeitet und bereitstellt.", 8,
         ["Somewhat close. Die Antwort nennt Verarbeitung, aber nicht Erfassung und Speicherung."]),
        ("s2", "Q1", STUDENT_22, 4, ["Somewhat close. The answer explains both linkages but omits the cluster "
                                     "shapes.",
                                     "Close. The answer matches the closest-pair and mean-distance definitions."]),
        ("s2", "Q2", "When the model is too big.", 2.5, ["I cannot assess this answer without more context."]),
        ("s2", "Q3", "Ein soziotechnisches System, das Informationen erfasst, verarbeitet, speichert und "
                     "bereitstellt.", 10, ["Very close. Die Antwort entspricht der optimalen Antwort."]),
        ("s3", "Q1", "", 0, ["Very distant. The answer is empty.", "Very distant. The answer is empty."]),
        ("s3", "Q2", "Overfitting means the model learns the training data too well.", 3, None),
        ("s3", "Q3", "Ein Computer mit Datenbank.", 6, ["Distant. Die Antwort beschreibt nur Technik."]),
        ("s4", "Q1", "Single linkage uses the minimum distance, average linkage the average distance.", 7,
         ["Close. The answer states both distance rules briefly.",
          "Close. The answer matches the alternative definition."]),
        ("s4", "Q2", "A model that is complicated.", 1,
         ["Overall I would say: Somewhat distant. The answer names complexity but not generalization."]),
        ("s4", "Q3", "Software für Unternehmen, die Daten speichert.", 5,
         ["Somewhat distant. Die Antwort erwähnt nur Speicherung."]),
    ]
    refs = {q["id"]: [e["text"] for e in q["educator_answers"]] for q in questions}
    submissions = {}
    cassette = []
    for sid, qid, text, pts, replies in plan:
        submissions.setdefault(sid, []).append({"question_id": qid, "text": text, "human_points": pts})
        for k, ref in enumerate(refs[qid]):
            prompt = comparison_prompt(text, ref)
            if replies is None:
                cassette.append(entry(prompt, failure="HTTP 503 after 4 attempts (scripted)"))
            else:
                cassette.append(entry(prompt, replies[k]))
    bundle = {"exam_id": "ds-linkage", "questions": questions,
              "submissions": [{"student_id": s, "answers": a} for s, a in submissions.items()]}
    write_json("linkage_exam.json", bundle)
    write_cassette("linkage_exam.cassette.jsonl", cassette)


def probe_exam():
    bundle = {"exam_id": "linkage-probe",
              "questions": [{"id": "Q1", "text": LINKAGE_Q, "max_points": 10, "language_tag": "en",
                             "educator_answers": [{"text": LINKAGE_EDU}]}],
              "submissions": [{"student_id": "s1", "answers": [{"question_id": "Q1", "text": STUDENT_22,
                                                                "human_points": 8}]}]}
    write_json("probe_exam.json", bundle)
    base_reply = ("Good. The answer provides a clear and concise explanation of the difference between single "
                  "linkage and average linkage clustering.")
    variants = [
        (STUDENT_22, base_reply),
        (STUDENT_22 + ", 3*5=7", "Good. The answer explains both linkage methods clearly."),
        (STUDENT_22 + ", the cat sits on the mattress",
         "Good. The answer explains both methods, although it contains irrelevant information."),
        (STUDENT_22 + ", 3*5=7, the cat sits on the mattress",
         "Very bad. The answer contains incorrect arithmetic and irrelevant information."),
    ]
    write_cassette("probe_exam.cassette.jsonl", [entry(student_prompt(LINKAGE_Q, a), r) for a, r in variants])


def ds16_exam():
    points = [4, 4, 5, 5, 5, 5, 5, 5, 6, 6, 6, 6, 6, 7, 7, 8]
    assert sum(points) == 90 and len(points) == 16
    verdicts = ["Good.", "Very good.", "Good.", "Ok.", "Good.", "Very good.", "Good.", "Good.",
                "Extremely good.", "Good.", "Ok.", "Very good.", "Good.", "Bad.", "Good.", "Very good."]
    questions, cassette, answers = [], [], []
    for i, pts in enumerate(points, start=1):
        q = {"id": f"DS{i:02d}", "text": f"Data science question {i}: explain concept {i}.", "max_points": pts,
             "language_tag": "en", "educator_answers": [{"text": f"Reference explanation of concept {i}."}]}
        questions.append(q)
        cassette.append(entry(educator_prompt(q["text"], q["educator_answers"][0]["text"]),
                              f"{verdicts[i - 1]} The answer covers concept {i}. Missing: an example."))
        answers.append({"question_id": q["id"], "text": f"Concept {i} is about something.",
                        "human_points": pts // 2})
    write_json("ds16_exam.json", {"exam_id": "ds-master", "questions": questions,
                                  "submissions": [{"student_id": "m01", "answers": answers}]})
    write_cassette("ds16_exam.cassette.jsonl", cassette)


def is_de_exam():
    d = os.path.join(HERE, "is-bachelor")
    os.makedirs(d, exist_ok=True)
    qs = [
        ("IS1", "Was ist ein Informationssystem?", "10", "de",
         "Ein soziotechnisches System, das Informationen erfasst, verarbeitet, speichert und bereitstellt."),
        ("IS2", "Nennen Sie Vor- und Nachteile von ERP-Systemen.", "10", "de",
         "Vorteile: integrierte Daten, einheitliche Prozesse.\nNachteile: hohe Kosten, \"Lock-in\"."),
        ("IS3", "Erklären Sie den Begriff Digitalisierung.", "10", "de",
         "Die Überführung analoger Informationen und Prozesse in digitale Form, samt veränderter "
         "Geschäftsmodelle."),
    ]
    with open(os.path.join(d, "questions.csv"), "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "text", "max_points", "language_tag", "educator_answer"])
        w.writerows(qs)
    subs = [
        ("b01", "IS1", "Ein System, das Daten verarbeitet.", "6"),
        ("b01", "IS2", "Vorteil: alles in einem System, Nachteil: teuer", "7.5"),
        ("b01", "IS3", "", "0"),
        ("b02", "IS1", "Menschen, Aufgaben und Technik, die zusammen Informationen bereitstellen.", "9"),
        ("b02", "IS2", "Integration; aber Abhängigkeit vom Hersteller, und hohe Kosten.", "8"),
        ("b02", "IS3", "Digitalisierung ist,  wenn man   Papier scannt.", "3.25"),
    ]
    with open(os.path.join(d, "submissions.csv"), "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["student_id", "question_id", "text", "human_points"])
        w.writerows(subs)


if __name__ == "__main__":
    linkage_exam()
    probe_exam()
    ds16_exam()
    is_de_exam()
