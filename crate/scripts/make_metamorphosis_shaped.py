#!/usr/bin/env python3
"""Builds the `metamorphosis-shaped` story: a synthetic three-part novella
with the proportions of Kafka's Metamorphosis (1752 lines, 3 chapters,
24 scenes, 10 characters, 5 locations, 26 themes, 82 verified quotes).

Writes data/metamorphosis-shaped/{config.json,source.txt} and the model
replies under fixtures/metamorphosis-shaped/. Then run:

    ribbons ingest --config data/metamorphosis-shaped/config.json
    ribbons run --story metamorphosis-shaped --provider fixture

The prose is generated from word lists with a fixed seed.
"""

import json
import random
import shutil
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
from make_fixtures import canonical, unique_slug, verifies  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
STORY = "metamorphosis-shaped"
DATA = ROOT / "data" / STORY
OUT = ROOT / "fixtures" / STORY
rng = random.Random(1915)

CHAPTER_LINES = [583, 584, 583]  # plus a two-line preamble: 1752 in total
SCENES_PER_CHAPTER = 8

CHAR_GROUPS = [
    ["Anton Brell", "Anton"],
    ["Greta Brell", "Greta", "the sister"],
    ["Josef Brell", "the father"],
    ["Anna Brell", "the mother"],
    ["the chief clerk", "the clerk"],
    ["the charwoman", "the old woman"],
    ["the first lodger"],
    ["the second lodger"],
    ["the third lodger"],
    ["the maid"],
]
LOC_GROUPS = [
    ["Anton's room", "the bedroom"],
    ["the living room", "the parlour"],
    ["the kitchen"],
    ["the front hall", "the hallway"],
    ["the landing"],
]
THEMES = [
    "alienation", "duty", "guilt", "family obligation", "money", "work", "the body", "shame",
    "isolation", "sacrifice", "pity", "disgust", "hope", "resentment", "dependence", "memory",
    "music", "hunger", "silence", "authority", "freedom", "decline", "renewal", "routine",
    "compassion", "fear",
]
THEME_ALIASES = {"family obligation": "obligation", "isolation": "loneliness", "authority": "power"}
GROUPS = {
    "Anton Brell": "the Brell family", "Greta Brell": "the Brell family", "Josef Brell": "Brell family",
    "Anna Brell": "the Brell family", "the chief clerk": "the firm", "the charwoman": "household staff",
    "the maid": "the household staff", "the first lodger": "the lodgers", "the second lodger": "the lodgers",
    "the third lodger": "lodgers",
}
GROUP_DEDUP = [["the Brell family", "Brell family"], ["household staff", "the household staff"],
               ["the lodgers", "lodgers"], ["the firm"]]
COLORS = ["#2E4057", "#C44536", "#8E9AAF", "#F2A541", "#4F6D7A", "#7A9E7E", "#B5838D", "#6D597A",
          "#355070", "#E56B6F"]

# who is in each scene, by chapter (indices into CHAR_GROUPS; location index)
CAST = [
    [([0], 0), ([0, 3, 2], 0), ([0, 4], 3), ([4, 3, 2], 3), ([0, 2], 1), ([1, 0], 0), ([0, 9], 2), ([0, 2, 3], 1)],
    [([0], 0), ([1, 0], 0), ([1, 3], 2), ([0, 1], 0), ([1, 3, 0], 0), ([2, 3], 1), ([0, 2], 1), ([0, 3], 0)],
    [([0, 5], 0), ([6, 7, 8], 1), ([1, 6, 7], 1), ([6, 8, 2], 3), ([1, 2, 3], 1), ([0], 0), ([5, 2], 4), ([1, 2, 3], 4)],
]

SUBJECT_VERBS = [
    "listened at the door", "stared at the ceiling", "counted the hours", "pressed a hand to the wall",
    "said nothing for a long time", "looked away from the window", "set the dish down carefully",
    "turned the key twice", "spoke too loudly", "waited in the doorway", "folded the newspaper",
    "wiped the table again", "watched the rain", "held the lamp higher", "pulled the curtain shut",
    "sat on the edge of the chair", "thought of the office", "heard the clock strike", "stood very still",
    "sighed into the dark", "tried to remember the train times", "put the violin away",
    "gathered the crumbs", "leaned against the cupboard", "moved the chair closer",
]
DETAILS = [
    "while the stove ticked", "as the tram bell rang below", "without lifting their eyes",
    "with the morning only half begun", "as though nothing had happened", "until the light went grey",
    "before the others woke", "in the smell of old milk", "with a cough that would not settle",
    "as the rent came due", "beside the locked door", "with the sample case still packed",
    "under the picture of the lady in furs", "as the gaslight hissed", "after the doctor had gone",
    "while the coffee went cold", "at the hour the train left", "with both hands trembling",
    "as the lodgers ate in silence", "in the quiet of the flat",
]
FILLER = [
    "The flat was narrow and the walls were thin.",
    "Rain ran down the window in slow grey lines.",
    "Somewhere below a cart went by on the cobbles.",
    "Nobody spoke of the office any more.",
    "The clock in the living room was always a little fast.",
    "Dust gathered along the skirting boards.",
    "The hospital across the street showed its long row of windows.",
    "Dinner was eaten quickly and without appetite.",
    "A newspaper lay open at the advertisements.",
    "The smell of cooking drifted along the hall.",
]


def names_of(ci):
    return CHAR_GROUPS[ci]


def prose_line(subject, used):
    while True:
        line = f"{subject[0].upper()}{subject[1:]} {rng.choice(SUBJECT_VERBS)} {rng.choice(DETAILS)}."
        if line not in used:
            used.add(line)
            return line


def build():
    chapters = []  # list of lines per chapter
    scenes = []  # per chapter: list of scene dicts
    used = set()
    for c, total in enumerate(CHAPTER_LINES):
        heading = ["I", "II", "III"][c]
        lines = [heading, ""]
        bounds = [round(2 + k * (total - 2) / SCENES_PER_CHAPTER) for k in range(SCENES_PER_CHAPTER + 1)]
        ch_scenes = []
        for s in range(SCENES_PER_CHAPTER):
            length = bounds[s + 1] - bounds[s]
            cast, loc = CAST[c][s]
            body, named = [], {}
            # one line per character, spelled with each alias in turn
            for k, ci in enumerate(cast):
                for name in names_of(ci):
                    named.setdefault(ci, []).append(prose_line(name, used))
            for ci in cast:
                body.extend(named[ci])
            while len(body) < length - length // 5:
                body.append(rng.choice(FILLER) if rng.random() < 0.3 else prose_line(names_of(rng.choice(cast))[0], used))
            rng.shuffle(body)
            # paragraphs separated by blank lines, filled to the exact length
            out = []
            for i, l in enumerate(body):
                out.append(l)
                if i % 4 == 3:
                    out.append("")
            out = out[:length]
            while len(out) < length:
                out.append("")
            if s == SCENES_PER_CHAPTER - 1:
                out[-1] = ""
            start = len(lines)
            lines.extend(out)
            ch_scenes.append(dict(start=start + 1, end=len(lines), cast=cast, loc=loc, named=named,
                                  text="\n".join(out)))
        assert len(lines) == total, (len(lines), total)
        # scene lines must hold every quote we plan to use
        chapters.append(lines)
        scenes.append(ch_scenes)
    return chapters, scenes


def write(tag, value):
    path = OUT / f"{tag}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, indent=2, ensure_ascii=False) + "\n")


TITLES = [
    ["Waking late", "The family at the door", "The chief clerk calls", "Pleading in the hall",
     "Driven back", "Milk and bread", "The maid leaves", "The first evening"],
    ["Learning the room", "Greta brings food", "Moving the furniture", "The picture on the wall",
     "Mother faints", "Father comes home", "The apple", "Wounded"],
    ["The charwoman", "The lodgers arrive", "Greta plays", "Notice given", "The family decides",
     "The last night", "Morning", "The tram ride"],
]
BOUNDARIES = [
    "The next morning the household wakes to find the door still locked.",
    "The scene moves to the living room where the family gathers.",
    "The chief clerk arrives to demand an explanation.",
    "The conversation shifts to the family's debts.",
    "Greta decides to take charge of the room.",
    "Later that evening the father returns from the bank.",
    "The focus turns to the mother and her fears.",
    "Weeks later the routine of the flat has changed.",
    "The lodgers are introduced and take the best room.",
    "Anton tries to leave his room for the first time.",
    "The narrative shifts to Greta's thoughts about the future.",
]
EMOTIONS = ["anxious", "ashamed", "resigned", "angry", "tender", "afraid", "weary", "bewildered",
            "dutiful", "cold", "hopeful", "numb"]


def main():
    chapters, scenes = build()
    DATA.mkdir(parents=True, exist_ok=True)
    preamble = ["THE CHANGED CLERK", ""]
    source = preamble + [l for ch in chapters for l in ch]
    assert len(source) == 1752
    (DATA / "source.txt").write_text("\n".join(source) + "\n")
    (DATA / "config.json").write_text(json.dumps({
        "id": STORY, "title": "The Changed Clerk (Metamorphosis-shaped)", "author": "Ribbons fixture",
        "genre": "llm_generated", "source": "source.txt", "chapter_marker": "^(I|II|III)$",
        "strip_boilerplate": False,
    }, indent=2) + "\n")
    texts = ["\n".join(ch) + "\n" for ch in chapters]

    if OUT.exists():
        shutil.rmtree(OUT)

    char_id = {}
    taken = set()
    for canon in sorted(canonical(g) for g in CHAR_GROUPS):
        char_id[canon] = unique_slug(canon, "character", taken)
    loc_taken = set()
    loc_id = {canon: unique_slug(canon, "location", loc_taken) for canon in sorted(canonical(g) for g in LOC_GROUPS)}

    # theme appearances: two or three per scene, every theme used at least once
    order = THEMES[:]
    flat_scenes = [(c, s) for c in range(3) for s in range(SCENES_PER_CHAPTER)]
    theme_slots = {}
    k = 0
    for (c, s) in flat_scenes:
        n = 3 if (c * 8 + s) % 3 == 0 else 2
        picks = []
        while len(picks) < n:
            t = order[k % len(order)]
            k += 1
            if t not in picks:
                picks.append(t)
        theme_slots[(c, s)] = picks

    # quote plan: 67 stored appearance quotes, 15 merged duplicates, 3 fabricated
    primaries = []  # (c, s, kind, raw_name, char_index or theme)
    for (c, s) in flat_scenes:
        sc = scenes[c][s]
        for ci in sc["cast"]:
            primaries.append((c, s, "characters", names_of(ci)[0], ci))
        for j, t in enumerate(theme_slots[(c, s)]):
            raw = THEME_ALIASES.get(t) if (t in THEME_ALIASES and (c + s) % 2 == 1) else t
            primaries.append((c, s, "themes", raw, t))
    fabricated = {3, 40, 77}
    quoted = [i for i in range(len(primaries)) if i not in fabricated][:67]
    quoted = set(quoted)
    # duplicates: a second alias for a quoted character in 15 scenes
    dups = []
    for i in sorted(quoted):
        c, s, kind, raw, ci = primaries[i]
        if kind == "characters" and len(names_of(ci)) > 1 and len(dups) < 15 and all(d[0:2] != (c, s) for d in dups):
            dups.append((c, s, ci))
    assert len(dups) == 15, len(dups)

    appearances = {key: {"characters": [], "themes": []} for key in flat_scenes}
    for i, (c, s, kind, raw, ref) in enumerate(primaries):
        sc = scenes[c][s]
        if kind == "characters":
            quote = sc["named"][ref][0] if i in quoted else None
        else:
            quote = rng.choice([l for l in sc["text"].splitlines() if l and not l.startswith(tuple(FILLER))]) if i in quoted else None
        if i in fabricated:
            quote = f"{raw.capitalize()} swore never to speak of it again."
        emotion = EMOTIONS[i % len(EMOTIONS)] if kind == "characters" else None
        appearances[(c, s)][kind].append(dict(name=raw, importance=round(0.3 + (i % 7) / 10, 2),
                                              sentiment=round(((i * 37) % 21 - 10) / 10, 2),
                                              emotion=emotion, quote=quote))
    for (c, s, ci) in dups:
        sc = scenes[c][s]
        appearances[(c, s)]["characters"].append(dict(name=names_of(ci)[1], importance=0.5, sentiment=0.0,
                                                      emotion="unchanged", quote=sc["named"][ci][1]))

    # bookkeeping the pipeline will do
    checked = replaced = stored = 0
    for (c, s), apps in appearances.items():
        for kind in ("characters", "themes"):
            for a in apps[kind]:
                if a["quote"] is None:
                    continue
                checked += 1
                if verifies(texts[c], a["quote"]):
                    if not a["name"] in [names_of(ci)[1] for (cc, ss, ci) in dups if (cc, ss) == (c, s)]:
                        stored += 1
                else:
                    replaced += 1
    checked += 15  # entity-level quotes
    assert (checked, replaced, stored) == (100, 3, 67), (checked, replaced, stored)

    for c in range(3):
        split = []
        for s, sc in enumerate(scenes[c]):
            loc_names = LOC_GROUPS[sc["loc"]]
            split.append({
                "title": TITLES[c][s],
                "summary": f"{TITLES[c][s]}: {', '.join(names_of(ci)[0] for ci in sc['cast'])} in {loc_names[0]}.",
                "start_line": sc["start"], "end_line": sc["end"],
                "location": loc_names[s % len(loc_names)],
                "boundary_explanation": BOUNDARIES[(c * 8 + s) % len(BOUNDARIES)],
            })
        write(f"scene_split/ch{c}", {"scenes": split})
        for s, sc in enumerate(scenes[c]):
            apps = appearances[(c, s)]
            imp = round(0.4 + ((c * 8 + s) % 6) / 10, 2)
            for kind in ("characters", "themes"):
                ents = []
                for a in apps[kind]:
                    e = {"name": a["name"], "importance": a["importance"], "sentiment": a["sentiment"]}
                    if a["emotion"]:
                        e["emotion"] = a["emotion"]
                    if a["quote"]:
                        e["quote"] = a["quote"]
                    ents.append(e)
                write(f"scene_detail/ch{c}/s{s}/{kind}", {
                    "importance": imp, "conflict": round(((c + s) % 5) / 5, 2), "sentiment": round((s - 4) / 5, 2),
                    "importance_explanation": f"{TITLES[c][s]} moves the family's situation forward.",
                    "entities": ents})
            taken = set()
            for kind, singular in (("characters", "character"), ("themes", "theme")):
                for a in apps[kind]:
                    if a["quote"] and verifies(texts[c], a["quote"]):
                        continue
                    slug = unique_slug(f"{singular}-{a['name']}", "entity", taken)
                    write(f"quote_explain/ch{c}/s{s}/{slug}", {
                        "explanation": f"The scene shows {a['name']} through gesture rather than speech."})

    write("dedup/characters", {"groups": CHAR_GROUPS})
    write("dedup/locations", {"groups": LOC_GROUPS})
    theme_groups = [[t, THEME_ALIASES[t]] if t in THEME_ALIASES else [t] for t in THEMES]
    write("dedup/themes", {"groups": theme_groups})

    for c in range(3):
        write(f"chapter_summary/ch{c}", {
            "summary": ["Anton wakes transformed and the household learns of it.",
                        "The family adapts to Anton's condition; the father wounds him.",
                        "Lodgers come and go, the family gives up on Anton, and a new start is made."][c],
            "importance": [0.8, 0.9, 1.0][c], "conflict": [0.6, 0.9, 0.7][c], "sentiment": [-0.4, -0.6, -0.2][c]})
        pairs = set()
        for sc in scenes[c]:
            ids = sorted({char_id[canonical(names_of(ci))] for ci in sc["cast"]})
            for i in range(len(ids)):
                for j in range(i + 1, len(ids)):
                    pairs.add((ids[i], ids[j]))
        for a, b in sorted(pairs):
            write(f"interaction/ch{c}/{a}+{b}", {"summary": f"{a} and {b} share the cramped rooms of the flat."})

    for i, g in enumerate(CHAR_GROUPS):
        canon = canonical(g)
        cid = char_id[canon]
        quote = next(sc["named"][i][0] for ch in scenes for sc in ch if i in sc["named"])
        write(f"character_profile/{cid}", {"quote": quote, "group": GROUPS[canon], "color": COLORS[i],
                                           "color_explanation": f"A muted tone for {canon}."})
    for i, g in enumerate(LOC_GROUPS):
        lid = loc_id[canonical(g)]
        sc = next(sc for ch in scenes for sc in ch if sc["loc"] == i)
        quote = next(l for l in sc["text"].splitlines() if l)
        write(f"location_profile/{lid}", {"quote": quote})
    write("theme_colors", {"themes": [
        {"name": t, "color": "#{:02X}{:02X}{:02X}".format(*[int(v * 255) for v in hsl(i * 360 / 26)])}
        for i, t in enumerate(THEMES)]})
    write("dedup/groups", {"groups": GROUP_DEDUP})
    print(f"wrote {DATA.relative_to(ROOT)} and {sum(1 for _ in OUT.rglob('*.json'))} fixtures")


def hsl(h, s=0.55, l=0.5):
    import colorsys
    return colorsys.hls_to_rgb(h / 360, l, s)


if __name__ == "__main__":
    main()
