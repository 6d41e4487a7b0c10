"""Regenerate the small checked-in fixtures under tests/fixtures/.

    python scripts/make_fixtures.py
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

# (id, title/caption, passage, is_english); the last four are built to be skipped
WIT = [
    ("empire", "Empire State Building",
     "The Empire State Building opened in 1931. It has 102 floors. The tower stands in Midtown Manhattan."),
    ("eiffel", "Eiffel Tower",
     "The Eiffel Tower was completed in 1889 for the World's Fair. Gustave Eiffel's company designed and built it. "
     "It is made of wrought iron."),
    ("goldengate", "Golden Gate Bridge",
     "The Golden Gate Bridge spans the strait at San Francisco Bay. Its towers are painted international orange. "
     "It opened to traffic in 1937."),
    ("panda", "Giant panda",
     "The giant panda is a bear native to south central China. It eats bamboo almost exclusively. "
     "Wild populations live in mountain forests."),
    ("snowleopard", "Snow leopard",
     "Snow leopards live in the mountain ranges of Central Asia. The snow leopard has thick grey fur with dark rosettes. "
     "It hunts wild sheep and goats."),
    ("opera", "Sydney Opera House",
     "The Sydney Opera House is a performing arts centre in Sydney. Its roof is made of white shell-like sails. "
     "It was designated a World Heritage Site in 2007."),
    ("greatwall", "Great Wall of China",
     "The Great Wall of China is a series of fortifications. Construction lasted many centuries under several dynasties. "
     "Sections were built from rammed earth and stone."),
    ("liberty", "Statue of Liberty",
     "The Statue of Liberty was a gift from France. It stands on Liberty Island in New York Harbor. "
     "The copper statue has turned green over time."),
    ("fuji", "Mount Fuji",
     "Mount Fuji is the highest mountain in Japan. It is an active stratovolcano that last erupted in 1707. "
     "Its snow-capped peak is a symbol of the country."),
    ("eagle", "Bald eagle",
     "The bald eagle is a bird of prey found in North America. It builds the largest nest of any bird. "
     "The species was adopted as a national emblem in 1782."),
    ("taj", "Taj Mahal",
     "The Taj Mahal is an ivory-white marble mausoleum in Agra. It was commissioned in 1631 by the emperor Shah Jahan. "
     "Gardens surround the tomb on three sides."),
    ("redpanda", "Red panda",
     "Red pandas have reddish-brown fur and a long ringed tail. It is the red panda that lives in the eastern Himalayas. "
     "It feeds mainly on bamboo."),
    ("colosseum", "Colosseum",
     "The Colosseum is an oval amphitheatre in the centre of Rome. It could hold an estimated 50,000 spectators. "
     "Gladiatorial contests were held there."),
    ("penguin", "Emperor penguin",
     "The emperor penguin is the tallest of all living penguin species. It breeds during the Antarctic winter. "
     "Males incubate the eggs on their feet."),
    ("bigben", "Big Ben",
     "Big Ben is the nickname for the Great Bell of the clock at Westminster. The tower was completed in 1859. "
     "Its clock was the largest in the world."),
    ("whale", "Blue whale",
     "The blue whale is the largest animal known to have ever existed. Adults can reach 30 metres in length. "
     "They feed almost entirely on krill."),
    ("machupicchu", "Machu Picchu", "Machu Picchu is a fifteenth century Inca citadel."),
    ("pisa", "Leaning Tower of Pisa",
     "The bell tower is famous for its tilt. Construction began in 1173. It took almost two centuries to finish."),
    ("koelnerdom", "Kölner Dom", "Der Kölner Dom ist eine Kathedrale. Er steht in Köln."),
    ("the", "The", "The city is old. It is on a river."),
]

# evaluation queries over the same entities: (entity, question with the entity hidden, answer)
EVAL = [
    ("empire", "How many floors does this [MASK] have?", "102"),
    ("eiffel", "What metal is this [MASK] made of?", "wrought iron"),
    ("goldengate", "What colour are the towers of this [MASK]?", "orange"),
    ("panda", "What does this [MASK] eat?", "bamboo"),
    ("opera", "What is the roof of this [MASK] made of?", "sails"),
    ("liberty", "Which country gave this [MASK] as a gift?", "France"),
    ("fuji", "When did this [MASK] last erupt?", "1707"),
    ("taj", "Who commissioned this [MASK]?", "Shah Jahan"),
    ("colosseum", "How many spectators could this [MASK] hold?", "50,000"),
    ("penguin", "When does this [MASK] breed?", "Antarctic winter"),
    ("bigben", "When was this [MASK] completed?", "1859"),
    ("whale", "What does this [MASK] feed on?", "krill"),
]

DISTRACTORS = [
    ("x-chrysler", "The Chrysler Building is an Art Deco skyscraper in Manhattan completed in 1930."),
    ("x-harbour", "The Sydney Harbour Bridge is a steel arch bridge opened in 1932."),
    ("x-koala", "The koala is a tree-dwelling marsupial that eats eucalyptus leaves."),
    ("x-pantheon", "The Pantheon is a former Roman temple with a concrete dome."),
]


def tokens_for(i: int) -> list[int]:
    # three-token signature per image, ids in [1, 60]
    return [1 + i, 21 + (7 * i) % 20, 41 + (3 * i) % 20]


def text(answer: bool, content: str) -> dict:
    return {"kind": "text", "content": content, "is_answer": answer}


def image(answer: bool, ref: str) -> dict:
    return {"kind": "image", "content": ref, "is_answer": answer}


WEBQA = [
    ("wq1", "What color is the roof of the Sydney Opera House?", "img-wq1", [
        text(True, "The roof of the Sydney Opera House is covered in white and cream tiles."),
        image(True, "img-wq1"),
        text(False, "The Sydney Harbour Bridge is a steel arch bridge."),
        image(False, "img-wq1-x"),
    ]),
    ("wq2", "How many floors does the Empire State Building have?", "img-wq2", [
        text(True, "The Empire State Building has 102 floors."),
        image(True, "img-wq2"),
        text(False, "The Chrysler Building is an Art Deco skyscraper."),
    ]),
    ("wq3", "What does the giant panda eat in the wild?", "img-wq3", [
        text(True, "Giant pandas eat bamboo shoots and leaves."),
        image(True, "img-wq3"),
        text(False, "The Sydney Harbour Bridge is a steel arch bridge."),
    ]),
    ("wq4", "Where is the Colosseum amphitheatre located?", "img-wq4", [
        text(True, "The Colosseum is located in the centre of Rome."),
        image(True, "img-wq4"),
        text(False, "The Pantheon is a former Roman temple."),
    ]),
    ("wq5", "What metal covers the Statue of Liberty?", "img-wq5", [
        text(True, "The Statue of Liberty has a copper skin over an iron frame."),
        image(True, "img-wq5"),
    ]),
    ("wq6", "Which volcano is the tallest mountain in Japan?", "img-wq6", [
        text(True, "Mount Fuji is the tallest mountain in Japan at 3776 metres."),
        image(True, "img-wq6"),
        text(False, "Mount Kita is the second highest peak in Japan."),
    ]),
    ("wq7", "Who designed the Eiffel Tower?", "img-wq7", [
        text(True, "Gustave Eiffel's company designed the tower."),
        image(False, "img-wq7"),
    ]),
    ("wq8", "Which eagle has a white head?", "img-wq8", [
        image(True, "img-wq8"),
        text(False, "The golden eagle has dark brown plumage."),
    ]),
    ("wq9", "How long is a blue whale?", "img-wq9", [
        text(True, "Blue whales reach 30 metres in length."),
        text(True, "Adult blue whales are the longest animals alive."),
    ]),
    ("wq10", "Which penguin is the tallest?", "img-wq10", [
        image(True, "img-wq10"),
        image(False, "img-wq10-x"),
    ]),
]

PARAGRAPH = (
    "The giant panda is a bear species endemic to China. It is characterised by its bold black-and-white coat! "
    "Is it a carnivore? Although it belongs to the order Carnivora, its diet is over 99% bamboo."
)


def write_jsonl(name, records):
    with open(OUT / name, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    wit = []
    visual = {}
    for i, (key, caption, passage) in enumerate(WIT):
        rec = {"id": key, "title_or_caption": caption, "passage": passage, "image_ref": f"img-{key}"}
        if key == "koelnerdom":
            rec["is_english"] = False
        wit.append(rec)
        visual[f"img-{key}"] = tokens_for(i)
    write_jsonl("wit.jsonl", wit)

    index_of = {key: i for i, (key, _, _) in enumerate(WIT)}
    corpus = [{"id": f"doc-{key}", "text": passage} for key, _, passage in WIT[:16]]
    corpus += [{"id": i, "text": t} for i, t in DISTRACTORS]
    write_jsonl("corpus.jsonl", corpus)
    queries = [
        {"id": f"q-{key}", "text": q, "visual_tokens": tokens_for(index_of[key]),
         "gold_ids": [f"doc-{key}"], "answers": [a]}
        for key, q, a in EVAL
    ]
    write_jsonl("queries.jsonl", queries)
    write_jsonl("qrels.jsonl", [{"qid": q["id"], "relevant_ids": q["gold_ids"]} for q in queries])

    write_jsonl("webqa.jsonl", [
        {"qid": qid, "question": q, "image_ref": ref, "choices": ch} for qid, q, ref, ch in WEBQA
    ])
    for n, (qid, _, ref, _) in enumerate(WEBQA):
        visual[ref] = tokens_for(20 + n)
    write_jsonl("visual_tokens.jsonl", [{"image_ref": k, "visual_tokens": v} for k, v in visual.items()])
    (OUT / "paragraph.txt").write_text(PARAGRAPH + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
