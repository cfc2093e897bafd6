#!/usr/bin/env python3
"""Writes the bundled test fixtures.

    python3 tools/make_fixtures.py [--out fixtures] [--seed 20240611]

corpus_200.jsonl  200 synthetic enterprise documents
patterns.json     pattern table enumerating metadata field combinations
gold.jsonl        judged pairs with human, llm and slm score columns
pipeline.json     config used by the end-to-end tests
"""

import argparse
import itertools
import json
import random
from pathlib import Path

FIRST = ["lisa", "omar", "priya", "daniel", "mei", "carlos", "anna", "kwame", "sofia", "ivan", "grace", "tomas"]
LAST = ["morrison", "haddad", "raman", "okafor", "chen", "silva", "kowalski", "mensah", "rossi", "petrov",
        "walsh", "novak"]
FOLDERS = ["word tutorial", "quarterly finance", "hiring pipeline", "product roadmap", "security audit",
           "customer escalations", "travel planning", "design reviews", "legal contracts", "onboarding guides",
           "marketing launch", "data platform"]
TYPES = ["docx", "xlsx", "pptx", "pdf", "txt"]

# Topic vocabulary. Each document draws its title and leading sentences
# from one topic; shared words give BM25 something to find across topics.
TOPICS = {
    "budget": ["budget", "forecast", "spend", "variance", "ledger", "invoice", "capex", "revenue"],
    "travel": ["travel", "itinerary", "flight", "hotel", "visa", "expense", "booking", "per-diem"],
    "hiring": ["hiring", "candidate", "interview", "offer", "recruiter", "headcount", "referral", "rubric"],
    "roadmap": ["roadmap", "milestone", "feature", "release", "backlog", "epic", "sprint", "launch"],
    "security": ["security", "vulnerability", "patch", "firewall", "incident", "audit", "phishing", "access"],
    "tutorial": ["tutorial", "page", "word", "insert", "layout", "template", "margin", "header"],
    "contract": ["contract", "clause", "renewal", "vendor", "liability", "signature", "amendment", "term"],
    "onboarding": ["onboarding", "laptop", "badge", "orientation", "mentor", "benefits", "checklist", "policy"],
    "marketing": ["campaign", "audience", "brand", "webinar", "newsletter", "funnel", "persona", "launch"],
    "data": ["pipeline", "warehouse", "schema", "dashboard", "ingestion", "latency", "query", "partition"],
}
SHARED = ["team", "review", "plan", "update", "draft", "notes", "summary", "meeting", "owner", "deadline",
          "project", "status", "q3", "q4", "report", "weekly"]
TAIL = ["appendix", "revision", "history", "archived", "reference", "internal", "distribution", "retention",
        "storage", "migration", "index", "glossary", "footnote", "attachment", "workspace", "sharepoint"]


SYLLABLES = ["ar", "bel", "cor", "dan", "el", "fen", "gal", "hex", "ix", "jor", "kal", "lum", "mar", "nov",
             "or", "pel", "quin", "ros", "sol", "tar", "ul", "vex", "wyn", "zel"]

DEFAULT_KNOBS = {
    "cluster_size": 5,       # versions and drafts of one piece of work
    "same_author": 0.8,      # chance a cluster member keeps the cluster author
    "same_folder": 0.8,
    "head_term_prob": 0.2,   # chance the opening sentence names a project term
    "program_size": 4,       # clusters sharing one program codename
    "program_reps": 2,       # program mentions per body sentence
}
VARIANTS = ["draft", "final", "v2", "v3", "notes", "summary", "review", "update", "archive", "copy"]


def codename(rng, used):
    while True:
        w = "".join(rng.sample(SYLLABLES, 2)) + rng.choice(["a", "o", "is", "en", "ix"])
        if w not in used:
            used.add(w)
            return w


def make_corpus(rng, knobs=None):
    """Clusters of near-duplicate documents (drafts and versions of one piece
    of work) grouped under programs. Project and program codenames live in
    the body, past the short opening the labeler sees, so deep BM25 hits
    often match on text the labeler never reads."""
    k = dict(DEFAULT_KNOBS, **(knobs or {}))
    topics = list(TOPICS)
    used = set()
    n_clusters = (200 + k["cluster_size"] - 1) // k["cluster_size"]
    programs = [codename(rng, used) for _ in range((n_clusters + k["program_size"] - 1) // k["program_size"])]
    clusters = []
    for c in range(n_clusters):
        vocab = TOPICS[topics[c % len(topics)]]
        clusters.append({
            "vocab": vocab,
            "author": f"{rng.choice(FIRST)} {rng.choice(LAST)}",
            "folder": rng.choice(FOLDERS),
            "stem": [rng.choice(vocab), rng.choice(SHARED)],
            "terms": [codename(rng, used) for _ in range(4)],
            "program": programs[c // k["program_size"]],
        })
    order = list(range(200))
    rng.shuffle(order)
    cluster_of = {doc: pos // k["cluster_size"] for pos, doc in enumerate(order)}
    docs = []
    for i in range(200):
        c = clusters[cluster_of[i]]
        vocab, terms = c["vocab"], c["terms"]
        author = c["author"] if rng.random() < k["same_author"] else f"{rng.choice(FIRST)} {rng.choice(LAST)}"
        folder = c["folder"] if rng.random() < k["same_folder"] else rng.choice(FOLDERS)
        ftype = rng.choice(TYPES)
        t_words = c["stem"] + [rng.choice(VARIANTS)]
        head_words = rng.sample(vocab, 2)
        if rng.random() < k["head_term_prob"]:
            head_words.append(terms[0])
        body = [" ".join(head_words).capitalize() + "."]
        for s in range(rng.randint(3, 5)):
            words = [terms[0] if s % 2 == 0 else rng.choice(terms), rng.choice(terms)]
            words += [c["program"]] * k["program_reps"]
            words += rng.sample(TAIL, 2) + [rng.choice(SHARED)]
            rng.shuffle(words)
            body.append(" ".join(words).capitalize() + ".")
        docs.append({
            "id": f"d{i:03d}",
            "content": "" if i % 37 == 36 else " ".join(body),
            "file_name": "".join(w.capitalize() for w in t_words),
            "author": author,
            "title": " ".join(w.capitalize() for w in t_words),
            "file_type": ftype,
            "parent_folder": folder,
            "department": rng.choice(["finance", "engineering", "people", "legal", "sales"]),
        })
    return docs


def make_patterns(weights=None):
    """Ordered combinations of one or two metadata fields with zero to two
    keyword slots, plus keyword-only patterns. file_type is left out: a bare
    extension is a filter, not a search term."""
    fields = ["author", "file_name", "title", "parent_folder"]
    shapes = [((), 1), ((), 2)]
    for size in (1, 2):
        for combo in itertools.permutations(fields, size):
            shapes += [(combo, n_kw) for n_kw in (0, 1, 2)]
    patterns = []
    for combo, n_kw in shapes:
        slots = [{"kind": "metadata_field", "name": f} for f in combo] + [{"kind": "keyword"}] * n_kw
        pid = f"p{len(patterns):02d}"
        patterns.append({"id": pid, "slots": slots, "weight": (weights or {}).get(pid, 1.0)})
    return patterns


def make_gold(rng):
    rows = []
    for q in range(40):
        n_docs = rng.randint(1, 7)
        for d in range(n_docs):
            human = rng.choice([0, 0, 1, 2, 2, 3, 4])
            llm = min(4, max(0, human + rng.choice([-1, 0, 0, 0, 1])))
            slm = min(4, max(0, human + rng.choice([-1, 0, 0, 0, 0, 1])))
            rows.append({
                "query_id": f"g{q:03d}",
                "query": f"gold query {q}",
                "doc_id": f"d{(q * 7 + d * 13) % 200:03d}",
                "human_score": human,
                "llm_score": llm,
                "slm_score": slm,
            })
    return rows


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="fixtures")
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    write_jsonl(out / "corpus_200.jsonl", make_corpus(rng))
    (out / "patterns.json").write_text(json.dumps(make_patterns(), indent=2) + "\n", encoding="utf-8")
    write_jsonl(out / "gold.jsonl", make_gold(rng))
    config = {
        "corpus": "corpus_200.jsonl",
        "patterns": "patterns.json",
        "k": 4,
        "highlight_chars": 30,
        "client": {"mock": True},
    }
    (out / "pipeline.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
