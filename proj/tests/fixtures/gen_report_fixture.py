#!/usr/bin/env python3
"""Writes a 200-citation report corpus and a brute-force recount of its statistics.

corpus.jsonl    {"record": <citation record>, "label", "known", "new_doi"} per citation
expected.json   co-occurrence rows, class totals, page shares, per-class year histograms
                with window-4 centered smoothing, and the journal ranking
"""
import json
import random
import re
from collections import Counter, defaultdict
from pathlib import Path

HERE = Path(__file__).resolve().parent / "report"
N = 200
PAGES_TOTAL = 64  # includes pages that never cite anything
FIRST, LAST = 1500, 2020
KINDS = ["DOI", "ISBN", "PMC", "PMID", "ARXIV"]
OTHER = ["OCLC", "JSTOR", "ISSN"]
LABELS = ["BOOK", "JOURNAL_ARTICLE", "WEB_CONTENT"]
JOURNALS = ["Nature", "nature", "  Nature ", "Science", "The Lancet", "the lancet", "Cell", "PLOS ONE",
            "Plos One", "Journal of Zoology", "Annals  of Botany", "annals of botany", "Icarus"]
YEAR_RE = re.compile(r"(?<!\d)\d{4}(?!\d)")
UNIFORM_KEYS = ["type", "title", "authors", "periodical", "chapter", "publisher", "edition",
                "publication_place", "date", "year", "access_date", "archive_url", "archive_date",
                "volume", "issue", "pages", "url", "url_top_level_domain", "work", "website",
                "newspaper", "series", "language", "degree", "conference", "encyclopedia", "id_list",
                "quote", "trans_title"]


def ident(rng, kind, pool):
    if pool and rng.random() < 0.3:
        return rng.choice(pool)
    v = {"DOI": lambda: f"10.{rng.randint(1000, 1010)}/x{rng.randint(1, 60)}",
         "ISBN": lambda: f"978{rng.randint(10**9, 10**10 - 1)}",
         "PMC": lambda: f"PMC{rng.randint(1000, 9999)}",
         "PMID": lambda: str(rng.randint(10**6, 10**7)),
         "ARXIV": lambda: f"{rng.randint(1001, 2012)}.{rng.randint(1000, 9999)}",
         "OCLC": lambda: str(rng.randint(1000, 99999)),
         "JSTOR": lambda: str(rng.randint(1000, 99999)),
         "ISSN": lambda: f"{rng.randint(1000, 9999)}-{rng.randint(1000, 9999)}"}[kind]()
    pool.append(v)
    return v


def year_fields(rng):
    r = rng.random()
    if r < 0.12:
        return "", ""
    if r < 0.2:
        return "", rng.choice(["n.d.", "spring", "c. 12th century"])
    if r < 0.25:
        return str(rng.choice([1200, 1499, 2021, 2025, 999])), ""
    y = rng.choice([rng.randint(1500, 1510), rng.randint(1900, 2020), rng.randint(2010, 2020), 1500, 2020])
    if rng.random() < 0.5:
        return str(y), ""
    return "", rng.choice([f"{y}-03-14", f"March {y}", f"{rng.randint(1, 28)} May {y}"])


def build(seed=200):
    rng = random.Random(seed)
    pools = defaultdict(list)
    entries = []
    for i in range(N):
        label = rng.choices(LABELS, weights=[30, 45, 25])[0]
        cit = {k: "" for k in UNIFORM_KEYS}
        cit["authors"] = []
        cit["title"] = f"Work {i}"
        ids = {}
        for kind, p in zip(KINDS, [0.35, 0.3, 0.12, 0.18, 0.08]):
            if rng.random() < p:
                ids[kind] = ident(rng, kind, pools[kind])
        if not ids and rng.random() < 0.3:
            ids[rng.choice(OTHER)] = ident(rng, "OCLC", pools["OTHER"])
        cit["id_list"] = ids
        cit["year"], cit["date"] = year_fields(rng)
        if label == "JOURNAL_ARTICLE" and rng.random() < 0.85:
            cit["periodical"] = rng.choice(JOURNALS)
        elif rng.random() < 0.2:
            cit["periodical"] = rng.choice(JOURNALS)  # ignored outside journal articles
        page = rng.randint(1, 48)
        record = {"page_id": page, "page_title": f"Page {page}", "section_path": "LEAD", "order_index": i,
                  "preceding_words": [], "page_total_words": 100, "page_citation_count": 1,
                  "template_text": "", "citation": cit}
        known = rng.random() < 0.6
        new_doi = ""
        if not known and label == "JOURNAL_ARTICLE" and "DOI" not in ids and rng.random() < 0.5:
            new_doi = f"10.9999/new{rng.randint(1, 25)}"
        entries.append({"record": record, "label": label, "known": known, "new_doi": new_doi})
    return entries


def year_of(c):
    for field in (c["year"], c["date"]):
        for m in YEAR_RE.finditer(field):
            y = int(m.group())
            if 1000 <= y <= 2030:
                return y
    return None


def centered(series, w):
    out = []
    for i in range(len(series)):
        lo, hi = i - w // 2, i + w - 1 - w // 2
        vals = [series[j] for j in range(lo, hi + 1) if 0 <= j < len(series)]
        out.append(sum(vals) / len(vals))
    return out


def recount(entries):
    co = Counter()
    other_only = no_ids = 0
    id_counts = Counter()
    known, classified = Counter(), Counter()
    dois, isbns, new_dois = set(), set(), set()
    page_dois, isbn_pages = defaultdict(set), set()
    hist = {l: [0] * (LAST - FIRST + 1) for l in LABELS}
    missing, out_of_range = Counter(), Counter()
    spell = defaultdict(Counter)
    for e in entries:
        c = e["record"]["citation"]
        ids = c["id_list"]
        for k in ids:
            id_counts[k] += 1
        bits = "".join("1" if k in ids else "0" for k in KINDS)
        if "1" in bits:
            co[bits] += 1
        elif ids:
            other_only += 1
        else:
            no_ids += 1
        (known if e["known"] else classified)[e["label"]] += 1
        if "DOI" in ids:
            dois.add(ids["DOI"])
            page_dois[e["record"]["page_id"]].add(ids["DOI"])
        if "ISBN" in ids:
            isbns.add(ids["ISBN"])
            isbn_pages.add(e["record"]["page_id"])
        if e["new_doi"]:
            new_dois.add(e["new_doi"])
        y = year_of(c)
        if y is None:
            missing[e["label"]] += 1
        elif FIRST <= y <= LAST:
            hist[e["label"]][y - FIRST] += 1
        else:
            out_of_range[e["label"]] += 1
        if e["label"] == "JOURNAL_ARTICLE":
            s = " ".join(c["periodical"].split())
            if s:
                spell[s.lower()][s] += 1
    journals = []
    for key, sp in spell.items():
        total = sum(sp.values())
        name = sorted(sp.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        journals.append({"key": key, "name": name, "citations": total})
    journals.sort(key=lambda j: (-j["citations"], j["key"]))
    per_page = Counter(len(s) for s in page_dois.values())
    return {
        "pages_total": PAGES_TOTAL,
        "citations": len(entries),
        "cooccurrence": dict(sorted(co.items())),
        "other_ids_only": other_only,
        "no_ids": no_ids,
        "id_counts": dict(sorted(id_counts.items())),
        "known": {l: known[l] for l in LABELS},
        "classified": {l: classified[l] for l in LABELS},
        "unique_dois": len(dois),
        "unique_isbns": len(isbns),
        "unique_new_dois": len(new_dois),
        "new_doi_citations": sum(1 for e in entries if e["new_doi"]),
        "pages_with_doi": len(page_dois),
        "pages_with_doi_share": [len(page_dois), PAGES_TOTAL],
        "pages_with_isbn": len(isbn_pages),
        "dois_per_page": {str(k): v for k, v in sorted(per_page.items())},
        "years": {l: {"counts": {str(FIRST + i): n for i, n in enumerate(hist[l]) if n},
                      "smoothed": {str(FIRST + i): v for i, v in enumerate(centered(hist[l], 4)) if v},
                      "missing": missing[l], "out_of_range": out_of_range[l]} for l in LABELS},
        "journals": journals,
    }


def main():
    HERE.mkdir(parents=True, exist_ok=True)
    entries = build()
    with open(HERE / "corpus.jsonl", "w", encoding="utf-8") as f:
        for e in entries:
            f.write(json.dumps(e, sort_keys=False) + "\n")
    exp = recount(entries)
    (HERE / "expected.json").write_text(json.dumps(exp, indent=1) + "\n")
    print(exp["cooccurrence"], exp["journals"][:3], exp["pages_with_doi"])


if __name__ == "__main__":
    main()
