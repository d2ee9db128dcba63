#!/usr/bin/env python3
"""Writes the canned model replies for the bundled lantern-keeper story.

Every file under fixtures/lantern-keeper/ is the reply to one request tag.
Run from the repository root after `ribbons ingest`:

    python3 scripts/make_fixtures.py

The tag and slug rules here mirror the Rust pipeline; if a tag drifts, the
fixture provider fails loudly with the missing tag.
"""

import json
import re
import shutil
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
STORY = "lantern-keeper"
OUT = ROOT / "fixtures" / STORY
CHAPTERS = ROOT / "data" / STORY / "chapters"


def slugify(s):
    out, dash = [], False
    for ch in s:
        if ch.isascii() and ch.isalnum():
            if dash and out:
                out.append("-")
            dash = False
            out.append(ch.lower())
        else:
            dash = True
    return "".join(out)


def short_slug(s, n):
    slug = slugify(s)[:n]
    return slug.rstrip("-")


def unique_slug(name, fallback, taken):
    base = slugify(name) or fallback
    cand, n = base, 2
    while cand in taken:
        cand = f"{base}-{n}"
        n += 1
    taken.add(cand)
    return cand


QUOTE_MAP = str.maketrans({
    "‘": "'", "’": "'", "‚": "'", "‛": "'", "′": "'", "`": "'",
    "“": '"', "”": '"', "„": '"', "‟": '"', "″": '"',
})


def norm(s):
    return re.sub(r"\s+", " ", s.translate(QUOTE_MAP)).strip()


def verifies(text, quote):
    return bool(quote and quote.strip()) and norm(quote) in norm(text)


TEXTS = [(CHAPTERS / f"{i}.txt").read_text() for i in range(3)]
LINES = [len(t.splitlines()) for t in TEXTS]

# name, importance, sentiment, emotion, quote
C = "characters"
T = "themes"

SCENES = [
    # chapter 0
    [
        dict(
            title="The crooked wick", start=1, end=20, location="lamp room",
            summary="Mara trims the lamp while her ailing father makes her promise the light will never go dark.",
            boundary="The chapter opens in the lamp room.",
            ratings=(0.7, 0.3, 0.1), why="The promise sets up the whole story.",
            characters=[
                ("Mara Quill", 0.9, 0.2, "resolute but afraid",
                 "It will not go dark. I promise."),
                ("Tobias Quill", 0.7, -0.2, "worried and frail",
                 'A crooked flame throws a crooked light, and a crooked light puts ships on the rocks.'),
            ],
            themes=[
                ("duty to the light", 0.9, 0.3, None, "the light is yours to keep"),
                ("family", 0.6, 0.4, None, None),
            ],
        ),
        dict(
            title="Weather warning at the market", start=21, end=37, location="Carrow Harbour",
            summary="Buying oil in Carrow Harbour, Mara is warned by the Widow Harrow that a storm is coming.",
            boundary="The next morning Mara crosses the channel to the harbour market.",
            ratings=(0.5, 0.4, -0.1), why="The widow's warning foreshadows the storm.",
            characters=[
                ("Mara", 0.7, 0.0, "guarded", "He is tired,” Mara said, which was not quite a lie."),
                ("Widow Harrow", 0.8, -0.3, "grim and protective", "There's weather coming"),
                ("Mrs. Harrow", 0.8, -0.3, "grim", "Tired men fall asleep"),
            ],
            themes=[
                ("foreboding", 0.8, -0.5, None, "My knees have never\nlied to me yet."),
                ("duty", 0.5, 0.1, None, "You watch that light yourself"),
            ],
        ),
        dict(
            title="Crossing on the ferry", start=38, end=LINES[0], location="the ferry",
            summary="Elias Venn ferries Mara home and tries to tempt her toward a life on the mainland.",
            boundary="The scene moves to the quay where Elias Venn offers her a ride home.",
            ratings=(0.6, 0.3, 0.3), why="Venn offers Mara a way out.",
            characters=[
                ("Miss Quill", 0.8, 0.2, "wry and steady", "Somebody has to feed\n  it"),
                ("Elias Venn", 0.8, 0.5, "hopeful", "There's work for a clever girl in Castlemouth."),
            ],
            themes=[
                ("the lure of elsewhere", 0.8, 0.2, None,
                 "the towns where the trains ran all night"),
                ("duty", 0.6, 0.2, None, "Ships don't stop coming because I am bored."),
            ],
        ),
    ],
    # chapter 1
    [
        dict(
            title="The keeper falls", start=1, end=19, location="Gull Point Light",
            summary="The storm hits, Tobias collapses on the stair, and Mara keeps the lamp alone through the night.",
            boundary="The chapter opens on the storm.",
            ratings=(0.9, 0.8, -0.5), why="Mara takes over the light for the first time.",
            characters=[
                ("Father", 0.6, -0.7, "weak and insistent", "Go up and keep it lit."),
                ("Mara", 1.0, -0.2, "exhausted determination",
                 "she counted each turn under her breath"),
            ],
            themes=[
                ("duty to the light", 1.0, 0.2, None, "So she went up alone."),
                ("family", 0.5, -0.3, None, None),
            ],
        ),
        dict(
            title="Venn in the channel", start=20, end=32, location="the channel",
            summary="Caught in the storm with the doctor's medicine, Venn steers his failing ferry by the lighthouse beam.",
            boundary="The narrative shifts to Venn fighting the storm out in the channel.",
            ratings=(0.9, 0.9, -0.4), why="The light saves a life.",
            characters=[
                # invented line; replaced by an explanation
                ("Venn", 0.9, -0.4, "terrified but steady", "I will never sail this channel again."),
            ],
            themes=[
                ("courage", 0.9, 0.3, None, "He steered by it."),
                ("guidance", 0.7, 0.4, None, "Keep it burning, Mara"),
            ],
        ),
        dict(
            title="Dawn at the cottage", start=33, end=LINES[1], location="keeper's cottage",
            summary="At dawn Venn arrives soaked with the medicine and tells Mara her light kept him off the rocks.",
            boundary="At dawn the storm has passed and Venn arrives at the cottage door.",
            ratings=(0.8, 0.2, 0.6), why="Both learn what the other risked.",
            characters=[
                ("Mara", 0.8, 0.5, "astonished", "You came out in that? For this?"),
                ("Venn", 0.8, 0.6, "shaken and grateful",
                 "I would have been on the rocks by midnight if not for that light."),
            ],
            themes=[
                ("love", 0.7, 0.6, None, "And because you said somebody has to."),
                ("gratitude", 0.6, 0.7, None, None),
            ],
        ),
    ],
    # chapter 2
    [
        dict(
            title="The harbour's thanks", start=1, end=17, location="Carrow Harbour",
            summary="The harbour honours Mara, and the Widow Harrow tells her the town remembers the nights the light stayed lit.",
            boundary="The chapter opens three days later.",
            ratings=(0.6, 0.1, 0.7), why="The community recognises Mara.",
            characters=[
                ("Mara Quill", 0.7, 0.4, "embarrassed", None),
                ("Widow Harrow", 0.8, 0.5, "proud and grieving",
                 "It remembers the nights it stayed lit as\nwell."),
            ],
            themes=[
                ("gratitude", 0.8, 0.8, None, "the chandler would not take her money"),
                ("memory", 0.6, 0.1, None, "My Thomas would be alive if a girl like you had kept the Point"),
            ],
        ),
        dict(
            title="On the breakwater", start=18, end=34, location="the quay",
            summary="On the breakwater Mara tells Venn she will take the keeper's post, and he promises to bring her oil.",
            boundary="Venn joins Mara and they walk to the breakwater.",
            ratings=(0.9, 0.3, 0.6), why="Mara makes her choice.",
            characters=[
                ("Venn", 0.7, 0.5, "accepting", "Then I'll bring your oil"),
                ("Mara Quill", 1.0, 0.6, "certain", "I am staying"),
            ],
            themes=[
                ("duty", 0.9, 0.6, None, "ask for the keeper's\nwarrant in my own name"),
                ("love", 0.6, 0.6, None, "Every Thursday, rain or calm."),
            ],
        ),
        dict(
            title="The letter", start=35, end=LINES[2], location="keeper's cottage",
            summary="Mara reads her letter to her recovering father, then climbs the tower and lights the lamp.",
            boundary="That evening Mara reads her letter to her father in the cottage.",
            ratings=(0.8, 0.0, 0.9), why="The promise from the first chapter is kept.",
            characters=[
                ("Tobias Quill", 0.6, 0.8, "proud", "It is a good letter"),
                ("Mara", 0.9, 0.7, "calm", "steady and white"),
            ],
            themes=[
                ("duty to the light", 0.9, 0.8, None, "as it would every night"),
                ("family", 0.7, 0.8, None, "Your mother would\nhave been proud. I am proud."),
            ],
        ),
    ],
]

CHAR_GROUPS = [["Mara Quill", "Mara", "Miss Quill"], ["Tobias Quill", "Father"],
               ["Widow Harrow", "Mrs. Harrow"], ["Elias Venn", "Venn"]]
LOC_GROUPS = [["Gull Point Light", "lamp room", "keeper's cottage"], ["Carrow Harbour", "the quay"],
              ["the ferry"], ["the channel"]]
# "family" and friends are omitted on purpose; omitted names stay singletons.
THEME_GROUPS = [["duty", "duty to the light"], ["the lure of elsewhere"], ["courage"], ["guidance"],
                ["foreboding"], ["love"], ["gratitude"], ["memory"]]

PROFILES = {
    "mara-quill": dict(quote="Somebody has to feed\nit", group="The Quill family", color="#1F77B4",
                       color_explanation="Deep sea blue for the keeper of the light."),
    "tobias-quill": dict(quote="Trim it square", group="Quill family", color="#1f77b4",
                         color_explanation="The same blue as his daughter; the light runs in the family."),
    "widow-harrow": dict(quote="The harbour remembers every night it went out.", group="Harbour folk",
                         color="#5D4037", color_explanation="Widow's brown, the colour of old nets."),
    "elias-venn": dict(quote="I'll never forget the sea that night.", group="Harbour townsfolk",
                       color="#2CA02C", color_explanation="Green for the ferry's paint and his hope."),
}
GROUP_DEDUP = [["The Quill family", "Quill family"], ["Harbour folk", "Harbour townsfolk"]]

LOC_PROFILES = {
    "gull-point-light": "light swung round and round over the black water",
    "carrow-harbour": "the fish\nmarket was already loud and the gulls were louder",
    "the-ferry": None,
    "the-channel": "Out in the channel",
}

THEME_COLORS = [
    ("duty to the light", "#F2C14E"), ("family", "#E07A5F"), ("foreboding", "#3D405B"),
    ("the lure of elsewhere", "#81B29A"), ("courage", "#D62828"), ("guidance", "#F2C14E"),
    ("love", "#C9184A"), ("memory", "not a color"),
]

CHAPTER_SUMMARIES = [
    ("Mara promises her ailing father the light will never go dark; the widow warns of a storm and Venn "
     "tempts her with the mainland.", 0.7, 0.4, 0.2),
    ("Through the storm Mara keeps the lamp alone while Venn steers the ferry home by its beam.", 1.0, 0.9, -0.1),
    ("The harbour thanks Mara, she chooses to stay as keeper, and she lights the lamp again.", 0.8, 0.2, 0.8),
]

INTERACTIONS = {
    (0, "mara-quill", "tobias-quill"): "Tobias makes Mara promise to keep the light burning.",
    (0, "mara-quill", "widow-harrow"): "The widow warns Mara about the storm and tells her to watch the light.",
    (0, "elias-venn", "mara-quill"): "Venn gives Mara a ride and invites her to leave for Castlemouth.",
    (1, "mara-quill", "tobias-quill"): "Mara puts her collapsed father to bed and takes over the lamp.",
    (1, "elias-venn", "mara-quill"): "Venn brings the medicine and thanks Mara for the light.",
    (2, "mara-quill", "widow-harrow"): "The widow honours Mara over tea.",
    (2, "elias-venn", "mara-quill"): "Mara tells Venn she is staying and he promises to bring her oil.",
    (2, "mara-quill", "tobias-quill"): "Tobias tells Mara he is proud of her letter.",
}

EMOTION_EXPLANATIONS = {
    "Venn": "Venn is terrified in the storm but steers steadily by the beam and calls Mara's name for courage.",
}


def canonical(group):
    return sorted(group, key=lambda n: (-len(n), n.encode()))[0]


def ids_for(groups):
    taken, out = set(), {}
    canon = sorted({canonical(g) for g in groups})
    for c in canon:
        out[c] = unique_slug(c, "x", taken)
    alias = {}
    for g in groups:
        for n in g:
            alias[n] = out[canonical(g)]
    return alias


CHAR_ID = ids_for(CHAR_GROUPS)


def write(tag, value):
    path = OUT / f"{tag}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, indent=2, ensure_ascii=False) + "\n")


def detail_entities(entries, kind):
    out = []
    for name, importance, sentiment, emotion, quote in entries:
        e = {"name": name, "importance": importance, "sentiment": sentiment}
        if emotion is not None:
            e["emotion"] = emotion
        if quote is not None:
            e["quote"] = quote
        out.append(e)
    return out


def main():
    if OUT.exists():
        shutil.rmtree(OUT)

    for ci, scenes in enumerate(SCENES):
        write(f"scene_split/ch{ci}", {"scenes": [
            {"title": s["title"], "summary": s["summary"], "start_line": s["start"], "end_line": s["end"],
             "location": s["location"], "boundary_explanation": s["boundary"]} for s in scenes]})
        for si, s in enumerate(scenes):
            imp, con, sen = s["ratings"]
            for kind in (C, T):
                write(f"scene_detail/ch{ci}/s{si}/{kind}", {
                    "importance": imp, "conflict": con, "sentiment": sen,
                    "importance_explanation": s["why"], "entities": detail_entities(s[kind], kind)})
            # fallback explanations for quotes that will not verify
            taken = set()
            for kind, singular in ((C, "character"), (T, "theme")):
                for name, _, _, emotion, quote in s[kind]:
                    if verifies(TEXTS[ci], quote):
                        continue
                    slug = unique_slug(f"{singular}-{name}", "entity", taken)
                    text = EMOTION_EXPLANATIONS.get(name) or (
                        f"The scene expresses {name} through what the characters do rather than a single line."
                        if singular == "theme" else f"{name} appears {emotion} throughout the scene.")
                    write(f"quote_explain/ch{ci}/s{si}/{slug}", {"explanation": text})

    write("dedup/characters", {"groups": CHAR_GROUPS})
    write("dedup/locations", {"groups": LOC_GROUPS})
    write("dedup/themes", {"groups": THEME_GROUPS})

    for ci, (summary, imp, con, sen) in enumerate(CHAPTER_SUMMARIES):
        write(f"chapter_summary/ch{ci}", {"summary": summary, "importance": imp, "conflict": con, "sentiment": sen})
    for (ci, a, b), text in INTERACTIONS.items():
        assert a < b
        write(f"interaction/ch{ci}/{a}+{b}", {"summary": text})

    for cid, p in PROFILES.items():
        write(f"character_profile/{cid}", p)
        if not any(verifies(t, p["quote"]) for t in TEXTS):
            write(f"quote_explain/character/{cid}", {"explanation": f"{cid} is restless and hopeful, torn between the sea and the shore."})
    for lid, q in LOC_PROFILES.items():
        write(f"location_profile/{lid}", {"quote": q} if q else {})
        if not (q and any(verifies(t, q) for t in TEXTS)):
            write(f"quote_explain/location/{lid}", {"explanation": "The ferry is Venn's small, battered link between the Point and the town."})
    write("theme_colors", {"themes": [{"name": n, "color": c} for n, c in THEME_COLORS]})
    write("dedup/groups", {"groups": GROUP_DEDUP})

    service_fixtures()
    print(f"wrote {sum(1 for _ in OUT.rglob('*.json'))} fixtures to {OUT.relative_to(ROOT)}")


def service_fixtures():
    # /ask, story scope
    q = "When does the storm reach the lighthouse?"
    write(f"ask/story/{short_slug(q, 80)}", {"chapter_index": 1, "explanation":
          "The storm arrives in the second chapter, the night Tobias collapses and Mara keeps the lamp alone."})
    q = "Where does Mara decide to stay?"
    tag = f"ask/story/{short_slug(q, 80)}"
    write(tag, {"chapter_index": 7, "explanation": "The ending."})
    write(f"{tag}/retry", {"chapter_index": 2, "explanation":
          "In the last chapter Mara tells Venn on the breakwater that she is staying to keep the light."})
    q = "Who brings the medicine?"
    write(f"ask/ch1/{short_slug(q, 80)}", {"answer": "Elias Venn brings the doctor's medicine across on the ferry."})
    q = "What does Venn promise?"
    write(f"ask/ch2/s1/{short_slug(q, 80)}", {"answer": "To bring her oil every Thursday, rain or calm."})

    # /rank-by-trait
    trait = "courage"
    names = {"mara-quill": "Mara Quill", "tobias-quill": "Tobias Quill",
             "widow-harrow": "Widow Harrow", "elias-venn": "Elias Venn"}
    for ci, scenes in enumerate(SCENES):
        for si, s in enumerate(scenes):
            ids = []
            for name, *_ in s[C]:
                cid = CHAR_ID[name]
                if cid not in ids:
                    ids.append(cid)
            ranked = [{"entity": names[i], "justification": f"{names[i]} shows courage in this scene."}
                      for i in sorted(ids, key=lambda i: (i != "mara-quill", i))]
            if (ci, si) == (0, 1):
                ranked = ranked[:1]  # leaves one out
            if (ci, si) == (1, 1):
                ranked.append({"entity": "The Harbourmaster", "justification": "Not in the story."})
            if (ci, si) == (2, 1):
                ranked.append(dict(ranked[0]))  # repeated
            write(f"rank/characters/{trait}/ch{ci}/s{si}", {"ranked": ranked})

    # /categorize-by-color
    attr = "social standing"
    write(f"categorize/characters/{short_slug(attr, 60)}", {
        "categories": [{"label": "keepers", "color": "#1F77B4"}, {"label": "townsfolk", "color": "#FF7F0E"}],
        "assignments": [
            {"entity": "Mara Quill", "label": "keepers", "explanation": "She keeps the light."},
            {"entity": "tobias-quill", "label": "keepers", "explanation": "The old keeper."},
            {"entity": "Widow Harrow", "label": "townsfolk", "explanation": "A harbour widow."},
        ],
    })
    attr = "mood"
    write(f"categorize/themes/{attr}", {
        "categories": [{"label": f"mood {i}", "color": "#444444"} for i in range(11)],
        "assignments": [{"entity": t, "label": f"mood {i}", "explanation": "Fits the mood."}
                        for i, (t, _) in enumerate(THEME_COLORS)],
    })


if __name__ == "__main__":
    main()
