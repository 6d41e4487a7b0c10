"""Convert an official WebQA JSON export into the record-per-line format ``mmr forge-remuq`` reads.

    python3 scripts/webqa_to_jsonl.py WebQA_train_val.json webqa.jsonl

Each entry's positive/negative text facts become text choices and its
positive/negative image facts become image choices (content = image id).
The first positive image, if any, is the record's image_ref.
"""

import json
import sys


def convert(entry_id: str, e: dict) -> dict:
    choices = []
    for key, is_answer in (("txt_posFacts", True), ("txt_negFacts", False)):
        for fact in e.get(key) or ():
            choices.append({"kind": "text", "content": fact.get("fact", ""), "is_answer": is_answer})
    images = []
    for key, is_answer in (("img_posFacts", True), ("img_negFacts", False)):
        for fact in e.get(key) or ():
            ref = str(fact.get("image_id", ""))
            choices.append({"kind": "image", "content": ref, "is_answer": is_answer})
            if is_answer:
                images.append(ref)
    return {"qid": entry_id, "question": e.get("Q", "").strip('"'), "image_ref": images[0] if images else "",
            "choices": choices}


def main(src: str, dst: str) -> None:
    with open(src, encoding="utf-8") as f:
        data = json.load(f)
    with open(dst, "w", encoding="utf-8") as out:
        for entry_id, entry in data.items():
            out.write(json.dumps(convert(entry_id, entry), ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main(*sys.argv[1:3])
