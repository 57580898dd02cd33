#!/usr/bin/env python3
"""Regenerates the test fixtures under tests/fixtures.

Reference values for the golden evaluation fixture come from pytrec_eval
(trec_eval bindings); RBP has no trec_eval implementation and is computed
here directly. Porter stems come from NLTK's PorterStemmer in
MARTIN_EXTENSIONS mode, which follows the reference C implementation.

Usage: python3 scripts/make_fixtures.py [--out tests/fixtures]
"""

import argparse
import csv
import io
import json
import math
import random
import re
from pathlib import Path

SOURCES = ["biorxiv", "CZI", "Elsevier", "medrxiv", "PMC", "WHO"]

TOPICS = [
    (1, "coronavirus origin", "what is the origin of COVID-19",
     "seeking range of information about the SARS-CoV-2 virus's origin, including its evolution, "
     "animal source, and first transmission into humans"),
    (2, "coronavirus response to weather changes",
     "how does the coronavirus respond to changes in the weather",
     "seeking range of information about the SARS-CoV-2 virus viability in different weather and "
     "climate conditions as well as information related to transmission of the virus in different "
     "climate conditions"),
    (3, "coronavirus immunity", "will SARS-CoV-2 infected people develop immunity? Is cross protection possible?",
     "seeking studies of immunity developed due to infection with SARS-CoV-2 or cross protection gained "
     "due to infection with other coronavirus types"),
    (4, "how do people die from the coronavirus", "what causes death from Covid-19?",
     "studies looking at mechanisms of death from Covid-19 such as respiratory failure and organ damage"),
    (5, "animal models of COVID-19", "what drugs have been active against SARS-CoV-2 in animal studies?",
     "papers that describe the results of testing drugs that bind to spike proteins of the virus or any "
     "other drugs in any animal models"),
]

TOPIC_VOCAB = {
    1: ["origin", "bat", "bats", "pangolin", "zoonotic", "wuhan", "market", "spillover", "evolution",
        "phylogenetic", "genome", "recombination", "reservoir", "ancestor", "coronavirus"],
    2: ["weather", "temperature", "humidity", "climate", "seasonal", "heat", "cold", "viability",
        "surfaces", "transmission", "ultraviolet", "season", "coronavirus"],
    3: ["immunity", "antibody", "antibodies", "neutralizing", "reinfection", "cross", "protection",
        "serology", "memory", "cells", "immune", "response", "convalescent"],
    4: ["death", "mortality", "fatal", "respiratory", "failure", "organ", "damage", "cytokine", "storm",
        "autopsy", "ards", "thrombosis", "deceased"],
    5: ["animal", "models", "mice", "macaques", "hamsters", "ferrets", "drugs", "remdesivir", "antiviral",
        "spike", "binding", "efficacy", "treatment"],
}

FILLER = ["study", "patients", "data", "analysis", "clinical", "results", "method", "sample", "report",
          "hospital", "cohort", "observed", "significant", "model", "review", "public", "health", "risk",
          "factors", "case", "cases", "infection", "virus", "viral", "disease", "outbreak", "sars", "cov",
          "covid", "pandemic", "epidemic", "population", "china", "europe", "test", "testing", "protein",
          "cell", "gene", "expression", "measured", "increase", "decrease", "effect", "effects", "levels",
          "the", "of", "and", "in", "a", "with", "for", "was", "were", "is", "to", "on", "by", "this", "we"]

LEXICON = [
    ("covid-19", "covid-19", "disease"),
    ("covid 19", "covid-19", "disease"),
    ("sars-cov-2", "sars-cov-2", "virus"),
    ("coronavirus", "coronavirus", "virus"),
    ("pain", "pain", "condition"),
    ("stomach", "stomach", "anatomy"),
    ("immunity", "immunity", "biological process"),
    ("humidity", "humidity", "environmental factor"),
    ("temperature", "temperature", "environmental factor"),
    ("respiratory failure", "respiratory failure", "condition"),
    ("organ damage", "organ damage", "condition"),
    ("animal models", "animal model", "research method"),
    ("spike proteins", "spike protein", "protein"),
    ("drugs", "drug", "chemical"),
    ("bats", "bat", "organism"),
    ("wuhan", "wuhan", "location"),
]

ONTOLOGY = [
    {"label": "covid-19", "parents": ["coronavirus infection"], "synonyms": ["covid 19", "sars-cov-2 infection"]},
    {"label": "coronavirus infection", "parents": ["viral infectious disease"], "children": ["sars", "mers"]},
    {"label": "viral infectious disease", "parents": ["disease by infectious agent"]},
    {"label": "disease by infectious agent"},
    {"label": "sars", "synonyms": ["severe acute respiratory syndrome"]},
    {"label": "mers", "synonyms": ["middle east respiratory syndrome"]},
    {"label": "respiratory failure", "parents": ["respiratory system disease"]},
    {"label": "respiratory system disease"},
    {"label": "immunity", "children": ["acquired immunity", "innate immunity"]},
    {"label": "acquired immunity"},
    {"label": "innate immunity"},
    {"label": "pain", "parents": ["sensation"], "children": ["abdominal pain"]},
    {"label": "sensation"},
    {"label": "abdominal pain"},
    {"label": "stomach", "parents": ["digestive organ"]},
    {"label": "digestive organ"},
]


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def topics_xml(topics) -> str:
    out = ['<?xml version="1.0" encoding="UTF-8"?>', "<topics>"]
    esc = lambda s: s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    for num, q, qu, n in topics:
        out.append(f'<topic number="{num}">')
        out.append(f"  <query>{esc(q)}</query>")
        out.append(f"  <question>{esc(qu)}</question>")
        out.append(f"  <narrative>{esc(n)}</narrative>")
        out.append("</topic>")
    out.append("</topics>")
    return "\n".join(out) + "\n"


def doc_id(rng: random.Random, used: set) -> str:
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
    while True:
        s = "".join(rng.choice(alphabet) for _ in range(8))
        if s not in used:
            used.add(s)
            return s


def sentence(rng, topic, n, p_topic):
    words = []
    for _ in range(n):
        if topic and rng.random() < p_topic:
            words.append(rng.choice(TOPIC_VOCAB[topic]))
        else:
            words.append(rng.choice(FILLER))
    return " ".join(words)


# ---------------------------------------------------------------------------
# Toy corpus


def make_toy(out: Path, rng: random.Random) -> None:
    toy = out / "toy"
    used = set()
    docs = []
    for i in range(200):
        topic = (i % 5) + 1 if i < 150 else 0
        did = doc_id(rng, used)
        strength = rng.choice([0.15, 0.3, 0.45]) if topic else 0.0
        title = sentence(rng, topic, rng.randint(4, 9), strength + 0.1)
        abstract = sentence(rng, topic, rng.randint(25, 60), strength)
        n_par = 0 if i % 7 == 3 else rng.randint(1, 4)
        paragraphs = [sentence(rng, topic, rng.randint(15, 40), strength * rng.choice([0.3, 1.0, 1.5]))
                      for _ in range(n_par)]
        r = rng.random()
        if r < 0.4:
            ptime = f"2020-0{rng.randint(1, 4)}-{rng.randint(10, 28)}"
        elif r < 0.9:
            ptime = str(rng.randint(2003, 2019))
        else:
            ptime = ""
        docs.append({"id": did, "topic": topic, "strength": strength, "title": title, "abstract": abstract,
                     "paragraphs": paragraphs, "publish_time": ptime, "source": rng.choice(SOURCES)})

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cord_uid", "source_x", "title", "doi", "abstract", "publish_time", "journal"])
    for d in docs:
        w.writerow([d["id"], d["source"], d["title"], f"10.1000/{d['id']}", d["abstract"], d["publish_time"],
                    rng.choice(["Lancet", "Nature", "", "Virology Journal, Vol. 3"])])
    write_text(toy / "metadata.csv", buf.getvalue())
    write_text(toy / "fulltext.jsonl", "".join(
        json.dumps({"doc_id": d["id"], "paragraphs": d["paragraphs"]}) + "\n" for d in docs if d["paragraphs"]))
    write_text(toy / "topics.xml", topics_xml(TOPICS))
    write_text(toy / "lexicon.tsv", "# surface\tlabel\ttype\n" + "".join(f"{a}\t{b}\t{c}\n" for a, b, c in LEXICON))
    write_text(toy / "ontology.jsonl", "".join(json.dumps(c) + "\n" for c in ONTOLOGY))

    # qrels: every on-topic doc judged (grade by strength), plus off-topic zeros
    lines = []
    for t in range(1, 6):
        for d in docs:
            if d["topic"] == t:
                grade = 2 if d["strength"] >= 0.45 else 1 if d["strength"] >= 0.3 else 0
                lines.append((t, d["id"], grade))
            elif rng.random() < 0.12:
                lines.append((t, d["id"], 0))
    write_text(toy / "qrels.txt", "".join(f"{t} 0 {d} {g}\n" for t, d, g in lines))

    # vectors: topic direction + noise for every article and paragraph id
    dim = 16
    centres = {t: [rng.gauss(0, 1) for _ in range(dim)] for t in range(1, 6)}
    vec_lines = []
    for t in range(1, 6):
        vec_lines.append({"id": f"topic:{t}", "vector": [round(x, 6) for x in centres[t]]})

    def noisy(topic, weight):
        base = centres[topic] if topic else [0.0] * dim
        return [round(weight * b + rng.gauss(0, 1), 6) for b in base]

    for d in docs:
        vec_lines.append({"id": d["id"], "vector": noisy(d["topic"], 2 * d["strength"] + 0.2)})
        ids = [f"{d['id']}.{k}" for k in range(len(d["paragraphs"]))] or [f"{d['id']}.0"]
        for pid in ids:
            vec_lines.append({"id": pid, "vector": noisy(d["topic"], 2 * d["strength"] + 0.2)})
    write_text(toy / "vectors.jsonl", "".join(json.dumps(v) + "\n" for v in vec_lines))

    # 27 external runs of varying quality, 100 documents per topic
    for r in range(1, 28):
        quality = r / 27.0
        lines = []
        for t in range(1, 6):
            scored = []
            for d in docs:
                signal = d["strength"] * 4 if d["topic"] == t else 0.0
                scored.append((quality * signal + rng.gauss(0, 1), d["id"]))
            scored.sort(key=lambda x: (-x[0], x[1]))
            for rank, (s, did) in enumerate(scored[:100], 1):
                lines.append(f"{t} Q0 {did} {rank} {s:.6f} ext{r:02d}\n")
        write_text(toy / "external" / f"ext{r:02d}.run", "".join(lines))

    recipes = ["ku_run1", "ku_run2", "ku_run3", "fusionOfRuns", "fusionOfFusions", "allFiltering",
               "soboroffFiltering"]
    config = {
        "seed": 20200410,
        "output_dir": "out",
        "corpus": {"metadata": "metadata.csv", "format": "csv", "fulltext": "fulltext.jsonl"},
        "tokenizer": {"lowercase": True, "stem": True},
        "indices": ["title_abstract", "full_text", "paragraph"],
        "topics": "topics.xml",
        "qrels": "qrels.txt",
        "ontology": "ontology.jsonl",
        "lexicon": "lexicon.tsv",
        "vectors": "vectors.jsonl",
        "external_runs": [f"external/ext{r:02d}.run" for r in range(1, 28)],
        "bm25": {"k1": 1.2, "b": 0.75, "max_results": 1000},
        "rm3": {"fb_docs": 10, "fb_terms": 10, "original_weight": 0.5},
        "rrf": {"k": 60},
        "soboroff": {"pool_depth": 100, "sample_fraction": 0.1, "trials": 50, "select_middle": 9,
                     "measure": "map"},
        "rerank": {"top_n": 50, "boost_year": 2020},
        "recipes": recipes,
    }
    write_text(toy / "config.json", json.dumps(config, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Golden evaluation fixture


def rbp(ranking, qrel, p=0.5):
    return (1 - p) * sum(p ** i for i, d in enumerate(ranking) if qrel.get(d, 0) >= 1)


def make_golden(out: Path, rng: random.Random) -> None:
    import pytrec_eval

    g = out / "golden"
    used = set()
    pool = [doc_id(rng, used) for _ in range(80)]
    qrels, run = {}, {}
    for t in range(1, 6):
        judged = rng.sample(pool, 40)
        qrels[str(t)] = {d: rng.choice([0, 0, 0, 1, 1, 2]) for d in judged}
        if not any(v >= 1 for v in qrels[str(t)].values()):
            qrels[str(t)][judged[0]] = 2
        retrieved = rng.sample(pool, 35)
        scores = {}
        for d in retrieved:
            # coarse scores so that ties occur
            bonus = qrels[str(t)].get(d, 0)
            scores[d] = round(rng.random() * 3 + bonus, 1)
        run[str(t)] = scores

    run_lines = []
    for t in range(1, 6):
        ordered = sorted(run[str(t)].items(), key=lambda kv: (-kv[1], tuple(-ord(c) for c in kv[0])))
        for rank, (d, s) in enumerate(ordered, 1):
            run_lines.append(f"{t} Q0 {d} {rank} {s:.6f} golden\n")
    write_text(g / "run.txt", "".join(run_lines))
    write_text(g / "qrels.txt", "".join(f"{t} 0 {d} {v}\n" for t in sorted(qrels, key=int)
                                        for d, v in sorted(qrels[t].items())))

    cuts = [5, 10, 15, 20, 30]
    ev = pytrec_eval.RelevanceEvaluator(qrels, {"P", "ndcg_cut", "bpref", "map"})
    res = ev.evaluate(run)
    names = [f"P_{k}" for k in cuts] + [f"ndcg_cut_{k}" for k in cuts] + ["bpref", "map"]
    rows = []
    sums = {n: 0.0 for n in names + ["rbp_0.5"]}
    for t in sorted(res, key=int):
        ordered = [l.split()[2] for l in run_lines if l.split()[0] == t]
        vals = {n: res[t][n] for n in names}
        vals["rbp_0.5"] = rbp(ordered, qrels[t])
        for n, v in vals.items():
            rows.append(f"{n}\t{t}\t{v:.6f}\n")
            sums[n] += v
    for n in names + ["rbp_0.5"]:
        rows.append(f"{n}\tall\t{sums[n] / len(res):.6f}\n")
    write_text(g / "expected.tsv", "# measure\ttopic\tvalue (pytrec_eval; rbp from closed form)\n" + "".join(rows))


# ---------------------------------------------------------------------------
# Assessor agreement fixture


def make_agreement(out: Path, rng: random.Random) -> None:
    a = out / "agreement"
    used = set()
    common = [(rng.randint(1, 30), doc_id(rng, used)) for _ in range(243)]
    only_ours = [(rng.randint(1, 30), doc_id(rng, used)) for _ in range(55)]
    only_nist = [(rng.randint(1, 30), doc_id(rng, used)) for _ in range(40)]
    nist, ours = {}, {}
    for i, key in enumerate(common):
        g = rng.choice([0, 1, 2])
        nist[key] = g
        if i < 127:
            ours[key] = g
        else:
            ours[key] = rng.choice([x for x in (0, 1, 2) if x != g])
    for key in only_ours:
        ours[key] = rng.choice([0, 1, 2])
    for key in only_nist:
        nist[key] = rng.choice([0, 1, 2])

    def dump(q):
        return "".join(f"{t} 0 {d} {g}\n" for (t, d), g in sorted(q.items()))

    write_text(a / "nist.qrels", dump(nist))
    write_text(a / "ours.qrels", dump(ours))


# ---------------------------------------------------------------------------
# Relevance-by-source fixture (round-1 composition)

TABLE2 = {  # source: (partially relevant docs, relevant docs, corpus docs)
    "biorxiv": (45, 62, 764),
    "CZI": (19, 17, 117),
    "Elsevier": (368, 374, 19457),
    "medrxiv": (178, 348, 1088),
    "PMC": (312, 183, 28648),
    "WHO": (44, 70, 1004),
}

# per-topic judgment counts (grade 0, 1, 2), round 1
TABLE1 = [(222, 45, 56), (237, 21, 26), (247, 66, 24), (298, 32, 27), (205, 35, 96), (158, 80, 83),
          (226, 247, 7), (284, 46, 30), (257, 25, 16), (106, 35, 50), (272, 67, 5), (122, 76, 126),
          (227, 97, 49), (193, 24, 5), (291, 45, 12), (287, 42, 11), (166, 32, 45), (156, 79, 32),
          (258, 27, 16), (181, 41, 25), (234, 15, 70), (212, 17, 30), (230, 4, 22), (216, 14, 19),
          (237, 9, 62), (187, 19, 106), (226, 30, 44), (142, 9, 29), (118, 42, 58), (144, 39, 16)]


def make_table2(out: Path, rng: random.Random) -> None:
    t2 = out / "table2"
    used = set()
    by_source = {s: [doc_id(rng, used) for _ in range(TABLE2[s][2])] for s in TABLE2}
    partial, relevant, rest = [], [], []
    for s, (p, r, n) in TABLE2.items():
        ids = by_source[s]
        partial += ids[:p]
        relevant += ids[p:p + r]
        rest += ids[p + r:]
    rng.shuffle(partial)
    rng.shuffle(relevant)
    rng.shuffle(rest)

    def spread(unique, slots_per_topic):
        """Assign every unique doc at least once, then reuse docs to fill the remaining slots."""
        slots = [t for t, n in enumerate(slots_per_topic, 1) for _ in range(n)]
        assert len(slots) >= len(unique)
        pairs = set()
        out = []
        queue = list(unique) + [rng.choice(unique) for _ in range(len(slots) - len(unique))]
        rng.shuffle(slots)
        for t, d in zip(slots, queue):
            while (t, d) in pairs:
                d = rng.choice(unique)
            pairs.add((t, d))
            out.append((t, d))
        return out

    judgments = []
    judgments += [(t, d, 1) for t, d in spread(partial, [c[1] for c in TABLE1])]
    judgments += [(t, d, 2) for t, d in spread(relevant, [c[2] for c in TABLE1])]
    taken = {(t, d) for t, d, _ in judgments}
    zeros = iter(rest)
    for t, (n0, _, _) in enumerate(TABLE1, 1):
        for _ in range(n0):
            d = next(zeros)
            taken.add((t, d))
            judgments.append((t, d, 0))
    judgments.sort(key=lambda x: (x[0], x[1]))
    write_text(t2 / "qrels-round1.txt", "".join(f"{t} 0 {d} {g}\n" for t, d, g in judgments))

    rows = [(d, s) for s in TABLE2 for d in by_source[s]]
    rng.shuffle(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cord_uid", "source_x", "title", "abstract"])
    for d, s in rows:
        w.writerow([d, s, "", ""])
    write_text(t2 / "metadata.csv", buf.getvalue())


# ---------------------------------------------------------------------------
# Topic files


def make_topic_files(out: Path, rng: random.Random) -> None:
    words = sorted({w for v in TOPIC_VOCAB.values() for w in v})
    topics = list(TOPICS)
    for n in range(6, 51):
        q = " ".join(rng.sample(words, 3))
        topics.append((n, q, f"what is known about {q}?", f"seeking studies on {q} & related outcomes"))
    write_text(out / "topics" / "round1.xml", topics_xml(topics[:30]))
    write_text(out / "topics" / "round5.xml", topics_xml(topics))


# ---------------------------------------------------------------------------
# Porter stemmer oracle


def porter_list(out: Path, root: Path) -> None:
    from nltk.stem.porter import PorterStemmer

    stemmer = PorterStemmer(mode=PorterStemmer.MARTIN_EXTENSIONS)
    text = ""
    for p in [root / "paper.md", root / "spec.md"] + sorted((root / "examples").rglob("*"))[:400]:
        if p.is_file():
            try:
                text += p.read_text(encoding="utf-8", errors="ignore").lower() + " "
            except OSError:
                pass
    words = sorted(set(re.findall(r"[a-z]+", text)))
    extra = ["caresses", "ponies", "ties", "caress", "cats", "feed", "agreed", "plastered", "bled", "motoring",
             "sing", "conflated", "troubled", "sized", "hopping", "tanned", "falling", "hissing", "fizzed",
             "failing", "filing", "happy", "sky", "relational", "conditional", "rational", "valenci",
             "hesitanci", "digitizer", "conformabli", "radicalli", "differentli", "vileli", "analogousli",
             "vietnamization", "predication", "operator", "feudalism", "decisiveness", "hopefulness",
             "callousness", "formaliti", "sensitiviti", "sensibiliti", "triplicate", "formative",
             "formalize", "electriciti", "electrical", "hopeful", "goodness", "revival", "allowance",
             "inference", "airliner", "gyroscopic", "adjustable", "defensible", "irritant", "replacement",
             "adjustment", "dependent", "adoption", "homologou", "communism", "activate", "angulariti",
             "homologous", "effective", "bowdlerize", "probate", "rate", "cease", "controll", "roll",
             "generalizations", "oscillators", "transmissions", "coronavirus", "immunity", "a", "is", "by"]
    words = sorted(set(words) | set(extra))
    write_text(out / "porter" / "vocabulary.tsv", "".join(f"{w}\t{stemmer.stem(w)}\n" for w in words))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    root = Path(__file__).resolve().parent.parent
    ap.add_argument("--out", type=Path, default=root / "tests" / "fixtures")
    args = ap.parse_args()
    make_toy(args.out, random.Random(11))
    make_golden(args.out, random.Random(23))
    make_agreement(args.out, random.Random(31))
    make_table2(args.out, random.Random(47))
    make_topic_files(args.out, random.Random(53))
    porter_list(args.out, root)


if __name__ == "__main__":
    main()
