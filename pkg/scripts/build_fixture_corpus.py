"""Generate the fixture corpora shipped in data/.

Combines an original hand-written sentence bank into quote-like records of
15-300 characters (one per line, raw text the ingest pipeline then cleans),
plus a small accented multilingual JSONL for the segment-construction path.
Deterministic: rerunning reproduces the committed files byte for byte.

Usage: python scripts/build_fixture_corpus.py [out_dir]
"""

import json
import os
import sys

import numpy as np

SENTENCES = [
    "The river forgets no stone it has carried to the sea.",
    "A patient hand untangles what a hurried one tears apart.",
    "Morning fog settled over the harbor before the first bell rang.",
    "Nobody teaches the sparrow where to build; it simply begins.",
    "We measured the old oak twice and still did not believe it.",
    "Her workshop smelled of cedar shavings, linseed oil, and rain.",
    "If the ladder wobbles, blame the ground before you blame the sky.",
    "The lighthouse keeper wrote his letters by the turning light.",
    "Bread rises slowly in a cold kitchen, but it rises all the same.",
    "A borrowed map is better than a confident guess.",
    "The train left the valley just as the almond trees turned white.",
    "Every locked drawer in that house held another smaller drawer.",
    "You can't argue with the tide; you can only move your chair.",
    "The apprentice counted her mistakes the way misers count coins.",
    "Thunder walked across the hills like a landlord inspecting rent.",
    "What the winter takes in color it repays in quiet.",
    "He sharpened the axe so long that the forest grew back.",
    "Our cat supervises the garden with the gravity of a judge.",
    "A good question outlives a hundred confident answers.",
    "The ferry crossed in silence, carrying strangers and their bread.",
    "Dust on the piano is a kind of sheet music for regret.",
    "She fixed radios by listening to what the static was hiding.",
    "The mountain does not rehearse; it is always in performance.",
    "Any rope long enough will eventually teach you about knots.",
    "The bakery opened before dawn and argued with nobody.",
    "His umbrella had opinions about the wind and lost every debate.",
    "In the archive, even the dust is catalogued twice.",
    "A promise made at harvest is tested in the first frost.",
    "The chess club met on Tuesdays above the fish market.",
    "Old boots remember every road that tried to ruin them.",
    "Lanterns on the canal made the water look briefly trustworthy.",
    "Do not lend your ladder and your roof to the same neighbor.",
    "The violin survived the flood inside a case lined with maps.",
    "Some doors are closed only because nobody has leaned on them.",
    "The clerk stamped each page as if sealing a small treaty.",
    "Rain taught the valley more grammar than the schoolhouse did.",
    "A kite is a letter the ground writes to the wind.",
    "They planted rows of garlic where the argument used to be.",
    "The night shift nurse knew the hospital by its breathing.",
    "Without salt, the stew is a rumor of itself.",
    "He kept a drawer of spare hinges for doors he didn't own.",
    "The tide pools held the sky still long enough to study it.",
    "Grandmother's recipe begins with an apology to the onions.",
    "A slow answer is sometimes the fastest way through.",
    "The surveyor trusted her chains more than the county records.",
    "Pigeons audit the plaza every morning and file no reports.",
    "What you rehearse in anger you will perform in regret.",
    "The bookbinder pressed each spine flat like a settled dispute.",
    "Wind through the wheat sounds like the field changing its mind.",
    "The last bus home collects the day's unfinished sentences.",
    "Her telescope leaned out the window like a curious neighbor.",
    "An honest scale makes a quiet market.",
    "The blacksmith's dog slept through centuries of small thunder.",
    "We traded the broken clock for a sack of winter apples.",
    "A path worn by many feet asks no one for directions.",
    "The choir practiced in the stairwell to borrow its echo.",
    "Ice on the pond wrote its autobiography in white cracks.",
    "Never trust a fence that leans toward your side of the field.",
    "The cartographer left one island blank, for luck.",
    "Soup forgives almost everything except impatience.",
    "The attic kept its heat like a miser and its secrets like a friend.",
    "A nail straightened twice is a biography.",
    "The orchard ladder knows which branches are honest.",
    "Stars over the switchyard punched their own timecards.",
    "She taught arithmetic with buttons, and mercy with silence.",
    "The ship's cook rationed jokes the way he rationed sugar.",
    "A roof is a treaty between the house and the weather.",
    "The printer's error became the town's favorite street name.",
    "Every well in that county had a different opinion about depth.",
    "He whittled spoons until the argument in his hands went quiet.",
    "The glacier files its paperwork one century at a time.",
    "Bees conduct the clover field like a seasoned orchestra.",
    "Borrowed tools work harder out of embarrassment.",
    "The station clock ran early, out of loyalty to the baker.",
    "A crooked row still feeds a straight appetite.",
    "The librarian shelved the storm under weather, then under music.",
    "Fresh paint makes the old fence confess its age.",
    "The ferryman counted passengers, clouds, and his own gray hairs.",
    "You cannot iron a river, but the bridge tries anyway.",
    "The seed catalog arrived like a letter from the future.",
    "His handwriting improved whenever he wrote the word perhaps.",
    "The quarry swallows echoes and pays them back with interest.",
    "A shared umbrella negotiates its own weather.",
    "The night market sold lamps, plums, and alibis.",
    "What the moth knows about the lamp, it learned too late.",
    "The carpenter's level never flatters the shelf.",
    "Rumors travel fastest on streets with the worst lighting.",
    "She kept bees and promises, and lost track of neither.",
    "The tugboat apologized to no wave and argued with every dock.",
    "An empty stable still smells like the idea of horses.",
    "The junk drawer is the house's honest autobiography.",
    "Frost edits the garden down to its strongest sentences.",
    "The retired captain salted his porch against imaginary storms.",
    "A ladder in the orchard is a question aimed at the sky.",
    "The typesetter dreamed in mirrored alphabets.",
    "Low tide is the sea thinking it over.",
    "The drummer kept time; the kettle kept grudges.",
    "Hay in the loft insures the winter against its own opinions.",
    "The watchmaker's sneeze cost him an entire Tuesday.",
    "A border drawn in berry juice outlasted the treaty ink.",
    "The lighthouse and the moon divided the night between them.",
    "His ledger balanced, but his conscience carried a remainder.",
    "The skating pond posted its rules in thin ice and thick rumor.",
    "A patched sail tells the storm's side of the story.",
    "The beekeeper's veil made the garden look like a memory.",
    "Chalk dust settled on the lecture like early snow.",
    "The innkeeper kept one room ready for the weather itself.",
    "What the hammer misses, the thumb remembers.",
    "The telegraph operator retired with an alphabet of calluses.",
    "Moss votes for the north side and campaigns nowhere else.",
    "The ropewalk stretched the length of three honest lies.",
    "Her garden gate squeaked in a minor key all summer.",
    "The mill wheel memorized the river and recited it daily.",
    "A spare button in the tin is a small standing army.",
    "The fog horn graded every ship's arrival as incomplete.",
    "He folded the letter until it was the size of his courage.",
    "The almanac promised rain and delivered a lesson in humility.",
    "Sawdust on the floor kept score of the day's arguments.",
    "The canal froze politely, from the edges inward.",
    "A wheelbarrow full of apples settles most neighborhood debates.",
    "The seamstress measured twice and forgave once.",
    "Night trains sew the provinces together with bright thread.",
    "The anvil has heard every excuse and flattened most of them.",
    "A dry well teaches geometry; a flooded one teaches prayer.",
    "The postmistress knew the village by its return addresses.",
    "Icicles audit the gutters and publish their findings at noon.",
    "The farrier hummed to the horses and billed their owners.",
    "One lantern in the pass is worth two arguments in the valley.",
    "The net mender worked with the patience of shallow water.",
    "Every smokehouse keeps a diary written in salt.",
    "The schoolyard oak held court through four generations of marbles.",
    "A loose stair announces the hour better than any clock.",
    "The brine barrel never lies about the summer.",
    "Two ladders and one roof make either a friendship or a feud.",
    "The weather vane resigned during the equinox and was reelected.",
    "Her knitting counted the sermon in honest rows.",
    "The quarryman's lunch pail rang like a dull bell at noon.",
    "A parade needs less practice than an apology.",
    "The orchard ledger listed every frost by its first name.",
    "Sparrows hold their parliament in the thorn hedge.",
    "The cider press taught the apples about consequences.",
    "His compass was honest; the map had ambitions.",
    "The washhouse steam erased the week from every collar.",
    "A gate left open invites the whole horizon in.",
    "The bell rope wore smooth where doubt had gripped it.",
    "Winterfeed and kindness are both cut in October.",
    "The tannery and the rose garden argued over the same wind.",
    "She numbered her jars of preserves like minor planets.",
    "The dockhands spoke three languages, all of them rope.",
    "A shy knock at dusk outranks a loud one at noon.",
    "The granary mouse kept better books than the steward.",
    "Fence posts march uphill without complaint and stop at the stone.",
    "The lamplighter's ladder knew the town by its shoulders.",
    "What are you waiting for, a letter from the rain?",
    "Is there a quieter argument than a sundial's?",
    "Who taught the crow to count the hunters, and who paid for it?",
    "Can a borrowed coat keep a secret warm?",
    "Why does the first pancake always volunteer for failure?",
    "Would the harbor miss one boat, or does it count only storms?",
    "Where does the echo sleep when the quarry closes?",
    "Mind the step; the cellar keeps its own calendar.",
    "Hold the ladder, and I'll hold my tongue!",
    "What a racket the geese made over one dropped glove!",
    "Stack the wood high; the almanac owes us nothing!",
    "Don't feed the rooster's vanity before breakfast!",
    "The recipe says: wait, stir, wait again, and trust the pot.",
    "Her list was short: twine, nails, patience, and a better hat.",
    "The verdict of the garden: more rain, fewer speeches.",
    "Remember this: a shortcut is a story you tell your shoes.",
    "The rule at sea is simple: tie it down or say goodbye.",
    "Three things fill a barn: hay, swallows, and rumor.",
    "The sign read \"closed for weather\" on the sunniest day of June.",
    "\"Measure the door before you buy the piano,\" she said.",
    "\"The sea keeps no receipts,\" said the old purser.",
    "He called the storm \"a committee of winds with no chairman.\"",
    "\"Feed the stove first,\" said grandfather, \"and opinions second.\"",
    "The well-digger's motto - begin where the willow nods - held true.",
    "Cold-frame lettuce outranks hothouse pride in late March.",
    "The half-moon gate swung on a hand-forged hinge older than the lane.",
    "A well-worn path and a well-read book forgive your returning.",
    "The long-haul barge traded coal for gossip at every lock.",
    "Market day began with frost-silvered stalls and ended in songs.",
    "Their one-eyed tomcat patrolled the pier with retired dignity.",
    "The north-facing window grew the boldest geraniums; nobody knows why.",
    "Rain-heavy branches bowed to the woodshed as if to an old teacher.",
    "The grindstone hums a work-song older than the farm itself.",
    "Patchwork fields quilt the hills; the crows inspect every seam.",
    "Lame verses, honest bread; the village forgave the baker his poetry.",
    "The skipper logged it plainly: wind rising, courage steady, tea gone.",
    "By lamplight the ledger confessed; by daylight it kept accounts.",
    "Sell the clock, keep the compass; mornings will find you anyway.",
    "First the thaw loosens the fence; then the gossip loosens the town.",
    "The pantry shelf sagged under quinces, pickles, and one shy violin.",
    "A whetstone, a rainy afternoon, and an old knife make a parliament.",
    "Swallows stitched the dusk shut over the fairground's last waltz.",
    "The toll keeper waved the hearse through and charged the rainbow.",
    "Every anchor is an argument the ship eventually wins.",
    "The beet harvest stained every apron in the parish purple.",
    "His rowboat leaked honestly, which is more than the ferry managed.",
    "A crow's funeral, they say, is mostly an audit of the corn.",
    "The switchback road taught the oxen patience and the driver psalms.",
    "Candle stubs in the toolbox mean someone worked past the argument.",
    "The new bell sounded wrong until the third funeral tuned it.",
    "Goodnight said the tollbooth, goodnight said the last loose wheel.",
]

MULTILINGUAL = [
    ("fr", "Le phare veillait sur la baie pendant que les pêcheurs rangeaient "
           "leurs filets près du quai. La marée montait doucement vers les "
           "maisons et les lanternes tremblaient dans le vent du soir."),
    ("fr", "Après l'orage, les enfants comptaient les flaques devant l'école "
           "et le boulanger ouvrait déjà ses volets. Une odeur de pain chaud "
           "traversait la place jusqu'à la rivière."),
    ("fr", "La forêt gardait ses sentiers étroits, et chaque promeneur était "
           "prié de saluer le vieux chêne avant de continuer sa route vers "
           "les collines bleues de l'été."),
    ("fr", "Ma grand-mère répétait qu'une soupe réussie demande du temps, du "
           "sel, et une fenêtre ouverte sur le jardin. Personne n'a jamais "
           "osé vérifier la troisième condition."),
    ("de", "Der alte Müller zählte die Säcke am Morgen und hörte dem Fluss "
           "zu, der das Rad geduldig drehte. Über dem Tal hingen schwere "
           "Wolken, doch die Schwalben flogen hoch."),
    ("de", "Im Winter rückten die Nachbarn näher zusammen, teilten Holz und "
           "Geschichten, und stritten höflich über den kürzesten Weg zum "
           "Markt. Der Schnee entschied am Ende alles."),
    ("de", "Die Bäckerin öffnete früh ihre Tür, und der Duft von frischem "
           "Brot zog durch die Gassen bis zur Brücke. Selbst der mürrische "
           "Fährmann grüßte freundlicher als sonst."),
    ("de", "Ein geliehenes Werkzeug arbeitet sorgfältiger, sagte der "
           "Schreiner, während er die Leiter seines Nachbarn prüfte und das "
           "schiefe Regal noch einmal vermaß."),
    ("es", "El faro guardaba la bahía mientras los pescadores remendaban sus "
           "redes junto al muelle. La marea subía despacio hacia las casas y "
           "las linternas temblaban en el viento."),
    ("es", "Después de la tormenta, los niños contaban los charcos frente a "
           "la escuela y el panadero abría sus ventanas. Un olor a pan "
           "recién hecho cruzaba la plaza hasta el río."),
    ("es", "La abuela insistía en que una buena sopa necesita tiempo, sal y "
           "una ventana abierta al jardín. Nadie se atrevió nunca a "
           "comprobar la tercera condición del refrán."),
    ("es", "El molinero contaba los sacos al amanecer y escuchaba al río "
           "girar la rueda con paciencia. Sobre el valle colgaban nubes "
           "pesadas, pero las golondrinas volaban alto."),
]

N_RECORDS = 4000
MAX_LEN = 300
SEED = 2024_10


def dirty(text: str, rng: np.random.Generator) -> str:
    """Light, deterministic raw-text blemishes for the cleaner to repair."""
    r = rng.random()
    if r < 0.06:
        text = text.lower()
    elif r < 0.10:
        text = text.replace(", ", " , ", 1)
    elif r < 0.14:
        text = text.replace(" ", "  ", 1)
    elif r < 0.16:
        text = " " + text + "  "
    return text


def main(out_dir: str) -> None:
    rng = np.random.default_rng(SEED)
    sentences = list(SENTENCES)
    lines = []
    # texts must be unique so a later train/test split cannot leak records;
    # single sentences exhaust quickly, after which rejection pushes draws
    # toward multi-sentence combinations
    seen = set()
    attempts = 0
    while len(lines) < N_RECORDS:
        attempts += 1
        if attempts > 80 * N_RECORDS:
            raise RuntimeError("sentence pool too small for unique records")
        k = int(rng.choice([1, 2, 3, 4], p=[0.30, 0.30, 0.27, 0.13]))
        idx = rng.choice(len(sentences), size=k, replace=False)
        parts = [sentences[int(i)] for i in idx]
        text = " ".join(parts)
        while len(text) > MAX_LEN and len(parts) > 1:
            parts = parts[:-1]
            text = " ".join(parts)
        if text in seen:
            continue
        seen.add(text)
        lines.append(dirty(text, rng))

    os.makedirs(out_dir, exist_ok=True)
    quotes_path = os.path.join(out_dir, "quotes_fixture.txt")
    with open(quotes_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    multi_path = os.path.join(out_dir, "multilingual_fixture.jsonl")
    with open(multi_path, "w", encoding="utf-8") as fh:
        for lang, text in MULTILINGUAL:
            fh.write(json.dumps({"text": text, "lang": lang},
                                ensure_ascii=False) + "\n")

    lengths = np.array([len(ln.strip()) for ln in lines])
    print(f"wrote {quotes_path}: {len(lines)} records, "
          f"mean len {lengths.mean():.1f}, >128: {(lengths > 128).mean():.2%}")
    print(f"wrote {multi_path}: {len(MULTILINGUAL)} rows")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data")
