#!/usr/bin/env python3
"""Builds the committed fixtures under data/.

Documents are written here in inline markup, `[erroneous text]{CODE, CODE}`,
and converted to standoff JSON with code-point offsets. Expected statistics
and match counts are computed by small independent reimplementations so the
Rust pipeline can be checked against them.

Run from the repository root:  python3 data/tools/build_fixtures.py
"""

import itertools
import json
import re
from fractions import Fraction
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

MARK = re.compile(r"\[([^\]]+)\]\{([^}]+)\}")


def from_markup(doc_id, mt_system, source, marked):
    text, errors, pos, last = [], [], 0, 0
    for m in MARK.finditer(marked):
        before = marked[last:m.start()]
        text.append(before)
        pos += len(before)
        surface = m.group(1)
        labels = [c.strip() for c in m.group(2).split(",")]
        errors.append({"start": pos, "end": pos + len(surface), "labels": labels})
        text.append(surface)
        pos += len(surface)
        last = m.end()
    text.append(marked[last:])
    target = "".join(text)
    for e in errors:
        assert target[e["start"]:e["end"]]
    return {
        "doc_id": doc_id,
        "mt_system": mt_system,
        "source_text": source,
        "target_text": target,
        "errors": errors,
    }


# Sample corpus -------------------------------------------------------------

SAMPLE = [
    ("deepl", "deepl-01", "DeepL",
     "Machine translation systems are now widely used by professional translators. However, their output still "
     "requires careful post-editing. In specialised domains, terminology errors are the most frequent. This study "
     "focuses on the translation of medical leaflets.",
     "Les systèmes de [traduction machine]{LA-TL-INS} sont maintenant largement utilisés par les traducteurs "
     "professionnels. Cependant, leur [sortie]{LA-TL-ING, TR-SI-TL} nécessite toujours une post-édition soigneuse. "
     "Dans les domaines spécialisés, les erreurs de terminologie sont [les plus fréquents]{LA-SY-GNC}. Cette étude "
     "se [focalise]{LA-ST-AW} sur la traduction des [feuillets médicaux]{LA-TL-INS, TR-SI-UT}."),
    ("deepl", "deepl-02", "DeepL",
     "The patient should take two tablets per day. Do not exceed the recommended dose. If symptoms persist, "
     "consult your doctor.",
     "Le patient [devrait]{TR-SI-UT} prendre deux [tablettes]{LA-TL-INS, TR-SI-TL} par jour. Ne pas "
     "[excéder]{LA-ST-AW} la dose recommandée. Si les symptômes persistent, consultez [votre docteur]{LA-TL-ICS}."),
    ("deepl", "deepl-03", "DeepL",
     "The algorithm was trained on a large corpus of annotated sentences. Results show a significant improvement "
     "over the baseline. We release our code and data to the community.",
     "L'algorithme a été entraîné sur [un large corpus]{LA-TL-ING, TR-SI-TL} de phrases annotées. Les résultats "
     "montrent une amélioration significative [par rapport à la ligne de base]{LA-TL-INS, TR-SI-UT}. Nous "
     "[relâchons]{TR-SI-TL, TR-DI} notre code et nos données [à la communauté]{LA-SY-PR}."),
    ("chatgpt", "chatgpt-01", "ChatGPT",
     "Fairy tales have long attracted the attention of folklorists. Their structure is often described in terms "
     "of functions. Such analyses rely heavily on expert knowledge.",
     "Les contes de fées attirent depuis longtemps l’attention des folkloristes. Leur structure est souvent "
     "décrite [en termes de]{LA-TL-ING} fonctions. De telles analyses [reposent lourdement]{LA-TL-ING, LA-ST-AW} "
     "sur [la connaissance experte]{LA-TL-INS}."),
    ("chatgpt", "chatgpt-02", "ChatGPT",
     "The device must be stored at room temperature. Keep it away from direct sunlight. Clean the surface with a "
     "dry cloth. Never immerse the unit in water. The warranty covers manufacturing defects for two years.",
     "L’appareil doit être stocké à [température de la pièce]{LA-TL-ING, TR-SI-TL}. Gardez-le à l’abri de la "
     "lumière directe du soleil. Nettoyez la surface avec un [tissu]{LA-TL-INS} sec. N’immergez jamais "
     "[l’unité]{TR-SI-TL, LA-TL-INS} dans l’eau. La garantie couvre les [défauts de manufacture]{LA-TL-INS, "
     "LA-TL-ING} pendant deux ans."),
]

# Predictions the scripted model returns: (sentence number or None, surface, code, explanation).
LONG = {
    "deepl-01": [
        (1, "traduction machine", "LA-TL-INS", "le terme consacré est « traduction automatique »"),
        (2, "leur sortie", "TR-SI-TL", "calque de l'anglais output"),
        (3, "plus fréquents", "LA-SY-GNC", "accord avec « erreurs »"),
        (4, "feuillets médicaux", "LA-TL-ING", "on parle de notices"),
        (2, "post-édition soigneuse", "LA-ST-AW", "formulation lourde"),
    ],
    "deepl-02": [
        (1, "tablettes", "LA-TL-INS", "comprimés"),
        (3, "docteur", "LA-ST-AW", "registre familier"),
        (2, "Ne pas excéder", "LA-ST-AW", "dépasser est plus idiomatique"),
    ],
    "deepl-03": [
        (1, "large corpus", "TR-SI-TL", "faux ami : large"),
        (2, "ligne de base", "LA-TL-INS", "système de référence"),
        (3, "relâchons", "TR-SI-TL", "release au sens de publier"),
        (3, "Nous relâchons notre code", "TR-DI", "contresens"),
        (1, "L’algorithme", "TR-OM", "article manquant"),
    ],
    "chatgpt-01": [
        (2, "en termes de fonctions", "LA-TL-ING", "calque in terms of"),
        (3, "lourdement", "LA-ST-AW", "beaucoup"),
        (3, "connaissance experte", "LA-TL-ING", "expertise"),
        (1, "folkloristes", "LA-TL-INS", "terme rare"),
    ],
    "chatgpt-02": [
        (1, "température de la pièce", "LA-TL-ING", "température ambiante"),
        (2, "lumière directe du soleil", "LA-ST-AW", "redondant"),
        (3, "tissu", "LA-TL-INS", "chiffon"),
        (4, "l'unité", "TR-SI-TL", "l'appareil"),
        (5, "défauts de manufacture", "LA-TL-INS", "défauts de fabrication"),
        (5, "pendant deux ans", "LA-SY-PR", "préposition"),
        (None, "Gardez-le", "TR-OM", "sujet omis"),
    ],
}

SHORT = {
    "deepl-01": [
        (1, "traduction machine", "LA-TL-INS", "traduction automatique"),
        (2, "sortie", "LA-TL-ING", "calque"),
        (3, "les plus fréquents", "LA-ST-AW", "accord"),
        (4, "feuillets médicaux", "LA-TL-INS", "notices"),
    ],
    "deepl-02": [
        (1, "tablettes", "TR-SI-TL", "comprimés"),
        (3, "votre docteur", "LA-TL-ICS", "médecin"),
    ],
    "deepl-03": [
        (1, "un large corpus", "LA-TL-ING", "vaste corpus"),
        (2, "ligne de base", "LA-TL-INS", "référence"),
        (3, "relâchons", "TR-DI", "publions"),
        (3, "à la communauté", "LA-SY-PR", "avec la communauté"),
    ],
    "chatgpt-01": [
        (2, "en termes de", "LA-TL-ING", "calque"),
        (3, "reposent lourdement", "LA-ST-AW", "reposent largement"),
        (3, "la connaissance experte", "LA-TL-INS", "l'expertise"),
    ],
    "chatgpt-02": [
        (1, "température de la pièce", "TR-SI-TL", "ambiante"),
        (3, "tissu", "LA-TL-INS", "chiffon"),
        (4, "l’unité", "LA-TL-ING", "l'appareil"),
        (5, "défauts de manufacture", "LA-TL-ING", "fabrication"),
        (2, "à l’abri", "LA-SY-PR", "préposition"),
    ],
}

# Each document's table is laid out differently, as a chat model would.
LAYOUTS = {
    "deepl-01": ("| Phrase | Erreur | Code | Explication |", "plain"),
    "deepl-02": ("| N° | Segment erroné | Catégorie | Commentaire |", "described"),
    "deepl-03": ("| Phrase | Erreur | Code | Explication |", "merged"),
    "chatgpt-01": ("| # | Passage | Type d'erreur | Justification |", "bold"),
    "chatgpt-02": ("| Phrase | Erreur | Code | Explication |", "quoted"),
}

NAMES = {}


def load_names():
    tree = json.loads((ROOT.parent / "crates/core/data/typology.json").read_text())
    stack = list(tree["nodes"] if isinstance(tree, dict) else tree)
    while stack:
        n = stack.pop()
        if n.get("code"):
            NAMES[n["code"]] = n.get("name") or n["code"]
        stack.extend(n.get("children", []))


def table(doc_id, preds):
    header, style = LAYOUTS[doc_id]
    lines = ["Voici le tableau récapitulatif des erreurs relevées :", "", header, "|---|---|---|---|"]
    previous = object()
    for sentence, surface, code, why in preds:
        num = "-" if sentence is None else str(sentence)
        if style == "merged" and sentence == previous:
            num = ""
        previous = sentence
        cell = surface
        label = code
        if style == "described":
            label = f"{NAMES.get(code, code)} ({code})"
        elif style == "bold":
            cell = f"**{surface}**"
        elif style == "quoted":
            cell = f"« {surface} »"
        lines.append(f"| {num} | {cell} | {label} | {why} |")
    lines += ["", "N'hésite pas à me demander des précisions."]
    return "\n".join(lines)


def prose(preds):
    return "\n".join(
        f"{i}. « {s} » : {c}. {w}." for i, (_, s, c, w) in enumerate(preds, 1)
    )


def script(preds_by_doc, variant):
    docs = {}
    for doc_id, preds in preds_by_doc.items():
        docs[doc_id] = [
            "Compris. J'attends la typologie et le texte à annoter.",
            "J'ai pris connaissance de la typologie"
            + (" et de ses définitions." if variant == "long" else "."),
            "Voici les erreurs que je relève :\n" + prose(preds),
            table(doc_id, preds),
        ]
    return {"provider_id": "scripted", "model": f"fixture-{variant}", "documents": docs}


# Independent oracles --------------------------------------------------------

def norm_chars(text):
    """Normalized characters, each with the index of the original it came from."""
    out = []
    for i, ch in enumerate(text):
        ch = {"’": "'", "‘": "'", "«": '"', "»": '"', "“": '"', "”": '"',
              "–": "-", "—": "-", " ": " "}.get(ch, ch)
        for c in ch.casefold():
            if c.isspace():
                if out and out[-1][0] == " ":
                    continue
                c = " "
            out.append((c, i))
    return out


def norm_surface(s):
    t = "".join(c for c, _ in norm_chars(s)).strip()
    return t.rstrip(".,;:!?").rstrip()


def anchor(target, surface):
    i = target.find(surface)
    if i >= 0:
        assert target.find(surface, i + 1) < 0, f"ambiguous surface {surface!r}"
        return (i, i + len(surface)), "exact"
    chars = norm_chars(target)
    flat = "".join(c for c, _ in chars)
    needle = norm_surface(surface)
    j = flat.find(needle) if needle else -1
    if j < 0:
        return None, "unanchored"
    assert flat.find(needle, j + 1) < 0, f"ambiguous surface {surface!r}"
    return (chars[j][1], chars[j + len(needle) - 1][1] + 1), "normalized"


def overlap(a, b):
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def best_matching(refs, preds):
    """Exhaustive search: max cardinality, max overlap, smallest sorted span pairs."""
    best, best_key = [], None
    pred_ids = [p for p in range(len(preds)) if preds[p] is not None]
    for k in range(min(len(refs), len(pred_ids)), -1, -1):
        for rs in itertools.combinations(range(len(refs)), k):
            for ps in itertools.permutations(pred_ids, k):
                pairs = list(zip(rs, ps))
                if any(overlap(refs[r], preds[p]) == 0 for r, p in pairs):
                    continue
                total = sum(overlap(refs[r], preds[p]) for r, p in pairs)
                tie = sorted((refs[r], preds[p], r, p) for r, p in pairs)
                key = (-k, -total, tie)
                if best_key is None or key < best_key:
                    best, best_key = pairs, key
        if best_key is not None:
            return best
    return best


def expected_counts(docs, preds_by_doc):
    rows = {}
    for d in docs:
        preds = preds_by_doc.get(d["doc_id"], [])
        anchors = [anchor(d["target_text"], s)[0] for _, s, _, _ in preds]
        refs = [(e["start"], e["end"]) for e in sorted(d["errors"], key=lambda e: (e["start"], e["end"]))]
        labels = [e["labels"] for e in sorted(d["errors"], key=lambda e: (e["start"], e["end"]))]
        pairs = best_matching(refs, anchors)
        rows[d["doc_id"]] = {
            "n_gold": len(refs),
            "n_pred": len(preds),
            "n_matched": len(pairs),
            "n_label_correct": sum(preds[p][2] in labels[r] for r, p in pairs),
            "n_unanchored": sum(a is None for a in anchors),
        }
    return rows


def summary(rows):
    def ratio(a, b, empty):
        return Fraction(a, b) if b else Fraction(empty)

    p = [ratio(r["n_matched"], r["n_pred"], 1) for r in rows.values()]
    rc = [ratio(r["n_matched"], r["n_gold"], 1) for r in rows.values()]
    f = [Fraction(0) if a + b == 0 else 2 * a * b / (a + b) for a, b in zip(p, rc)]
    n = len(rows)
    matched = sum(r["n_matched"] for r in rows.values())
    correct = sum(r["n_label_correct"] for r in rows.values())
    pred = sum(r["n_pred"] for r in rows.values())
    false = [r["n_pred"] - r["n_matched"] for r in rows.values()]
    return {
        "n_docs": n,
        "macro_precision": str(sum(p) / n),
        "macro_recall": str(sum(rc) / n),
        "macro_f1": str(sum(f) / n),
        "total_pred": pred,
        "total_matched": matched,
        "total_label_correct": correct,
        "pct_correctly_labeled": str(Fraction(correct, matched)) if matched else None,
        "false_error_total": sum(false),
        "false_error_mean_per_doc": str(Fraction(sum(false), n)),
        "false_error_min": min(false),
        "false_error_max": max(false),
        "false_error_pct_of_pred": str(Fraction(sum(false), pred)) if pred else None,
    }


def stats(docs):
    lens = [e["end"] - e["start"] for d in docs for e in d["errors"]]
    labels = [len(e["labels"]) for d in docs for e in d["errors"]]
    mean = lambda v: sum(v) / len(v) if v else None
    return {
        "n_docs": len(docs),
        "n_errors": len(lens),
        "mean_errors_per_doc": len(lens) / len(docs),
        "span_len_min": min(lens, default=None),
        "span_len_max": max(lens, default=None),
        "span_len_mean": mean(lens),
        "labels_per_error_min": min(labels, default=None),
        "labels_per_error_max": max(labels, default=None),
        "labels_per_error_mean": mean(labels),
        "n_words": sum(len(d["target_text"].split()) for d in docs),
        "n_source_words": sum(len(d["source_text"].split()) for d in docs),
    }


def dump(path, value):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, ensure_ascii=False, indent=2) + "\n")


def tsv(path, preds_by_doc):
    lines = ["doc_id\tsentence_index\tsurface\tlabel\texplanation"]
    for doc_id, preds in preds_by_doc.items():
        for sentence, surface, code, why in preds:
            idx = "" if sentence is None else str(sentence - 1)
            lines.append(f"{doc_id}\t{idx}\t{surface}\t{code}\t{why}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


# Three-document metrics fixture ---------------------------------------------

THREE = [
    ("fixture-1", "Le rapport [adresse]{TR-SI-TL} les résultats de l’enquête. Les données ont été "
                  "[collectées en ligne]{LA-TL-ING}."),
    ("fixture-2", "Cette méthode est [très efficiente]{LA-TL-INS, LA-ST-AW} pour les petits corpus. Elle "
                  "[requiert]{LA-ST-AW} peu de ressources."),
    ("fixture-3", "Nous avons [implémenté]{LA-TL-ING} le système en Python. Il [tourne]{LA-ST-TA} sur un "
                  "ordinateur portable standard. Les temps de calcul restent [raisonnables]{LA-SY-GNC} pour "
                  "tous les jeux de données testés."),
]
THREE_PREDS = {
    "fixture-1": [(1, "adresse", "TR-SI-TL", "")],
    "fixture-2": [(1, "efficiente", "LA-TL-INS", ""), (2, "requiert", "TR-OM", "")],
    "fixture-3": [
        (1, "implémenté", "LA-TL-ING", ""),
        (2, "tourne sur", "TR-SI-TL", ""),
        (1, "système", "TR-OM", ""),
        (2, "ordinateur portable", "LA-TL-INS", ""),
        (3, "temps de calcul", "LA-TL-ING", ""),
        (3, "jeux de données", "LA-TL-INS", ""),
        (1, "Python", "OU-CC", ""),
        (None, "algorithme génétique", "TR-AD", ""),
    ],
}
# Worked by hand; see WORKED.md next to the fixture.
THREE_EXPECTED = {
    "documents": {
        "fixture-1": {"n_gold": 2, "n_pred": 1, "n_matched": 1, "n_label_correct": 1, "n_unanchored": 0,
                      "precision": "1", "recall": "1/2", "f1": "2/3"},
        "fixture-2": {"n_gold": 2, "n_pred": 2, "n_matched": 2, "n_label_correct": 1, "n_unanchored": 0,
                      "precision": "1", "recall": "1", "f1": "1"},
        "fixture-3": {"n_gold": 3, "n_pred": 8, "n_matched": 2, "n_label_correct": 1, "n_unanchored": 1,
                      "precision": "1/4", "recall": "2/3", "f1": "4/11"},
    },
    "macro_precision": "3/4",
    "macro_recall": "13/18",
    "macro_f1": "67/99",
    "pct_correctly_labeled": "3/5",
    "false_error_total": 6,
    "false_error_mean_per_doc": "2",
    "false_error_min": 0,
    "false_error_max": 6,
    "false_error_pct_of_pred": "6/11",
}

# Anchoring fixture: thirty surfaces, one of them absent from the text ---------

ANCHOR_TEXT = (
    "L’Institut a publié un [rapport détaillé]{LA-TL-INS} sur l’état des forêts. Selon l’étude, la "
    "[surface boisée]{LA-TL-ING} a augmenté de 3 % depuis l’an 2000. Les chercheurs d’Europe du Nord "
    "[soulignent]{LA-ST-AW} toutefois l’impact des sécheresses. « Nous devons agir vite », a déclaré la "
    "directrice. Aujourd’hui, l’industrie du bois emploie plus de 400 000 personnes. Le programme "
    "[s’appuie]{TR-SI-TL} sur des données satellitaires. Il n’existe pas encore de [consensus]{LA-TL-INS} "
    "sur les causes du dépérissement."
)
ANCHOR_SURFACES = [
    "L'Institut", "rapport détaillé", "l'état des forêts", "Selon l'étude", "surface boisée",
    "a augmenté", "Depuis l'an 2000", "Les chercheurs d'Europe", "Europe du Nord", "soulignent",
    "l'impact des sécheresses.", "NOUS DEVONS AGIR VITE", "a déclaré la directrice", "Aujourd'hui",
    "l'industrie du bois", "emploie", "400 000 personnes", "Le programme", "s'appuie",
    "données satellitaires.", "Il n'existe pas", "consensus", "les causes", "du dépérissement.",
    "UN RAPPORT", "sur l’état", "personnes.", "SÉCHERESSES", "la DIRECTRICE,", "reboisement massif",
]


def main():
    load_names()
    corpus_dir = ROOT / "sample-corpus"
    docs = []
    for sub, doc_id, system, source, marked in SAMPLE:
        d = from_markup(doc_id, system, source, marked)
        docs.append(d)
        dump(corpus_dir / sub / f"{doc_id}.json", d)
    by_system = {}
    for d in docs:
        by_system.setdefault(d["mt_system"], []).append(d)
    dump(ROOT / "sample-corpus.stats.json",
         {"all": stats(docs), "by_mt_system": {k: stats(v) for k, v in sorted(by_system.items())}})

    for variant, preds in (("long", LONG), ("short", SHORT)):
        dump(ROOT / "replay/scripts" / f"{variant}.json", script(preds, variant))
        dump(ROOT / "replay/scripts" / f"provider-{variant}.json",
             {"kind": "scripted", "script": f"{variant}.json", "max_parallel": 2})
        rows = expected_counts(docs, preds)
        dump(ROOT / "golden" / variant / "expected-summary.json", {"documents": rows, **summary(rows)})

    fx = [from_markup(i, "DeepL", f"Source of {i}.", m) for i, m in THREE]
    fixture = ROOT / "fixtures/three-docs"
    fixture.mkdir(parents=True, exist_ok=True)
    (fixture / "corpus.jsonl").write_text("".join(json.dumps(d, ensure_ascii=False) + "\n" for d in fx))
    tsv(fixture / "predictions.tsv", THREE_PREDS)
    dump(fixture / "expected.json", THREE_EXPECTED)
    rows = expected_counts(fx, THREE_PREDS)
    s = summary(rows)
    for k, v in THREE_EXPECTED.items():
        if k != "documents":
            assert s[k] == v, (k, s[k], v)
    for doc_id, row in rows.items():
        for k, v in row.items():
            assert THREE_EXPECTED["documents"][doc_id][k] == v, (doc_id, k)

    a = from_markup("anchoring-01", "DeepL", "Source text of the anchoring fixture.", ANCHOR_TEXT)
    anchors = [anchor(a["target_text"], s) for s in ANCHOR_SURFACES]
    assert len(ANCHOR_SURFACES) == 30
    assert sum(st != "unanchored" for _, st in anchors) == 29, anchors
    fixture = ROOT / "fixtures/anchoring"
    dump(fixture / "corpus.json", a)
    tsv(fixture / "predictions.tsv", {"anchoring-01": [(None, s, "TR-OM", "") for s in ANCHOR_SURFACES]})
    dump(fixture / "expected.json", {
        "anchors": [{"surface": s, "status": st, "span": list(sp) if sp else None}
                    for s, (sp, st) in zip(ANCHOR_SURFACES, anchors)],
    })


if __name__ == "__main__":
    main()
