"""Builds the bundled synthetic fixture and its expected evaluation report.

The expected report comes from a brute-force retrieval oracle: every task
description is embedded with the reference hashing embedder, scored against
every tool by a plain dot product, and sorted by (score desc, tool_id asc).
The generator is the noise-free mock, so each task description equals the
ground-truth tool's fields.

Usage: python3 fixture_oracle.py <out_dir> [dim]
"""
import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from hash_embed_oracle import embed  # noqa: E402

TOOLS = [
    ("asr-en", "audio", "English speech recording", "transcribes spoken English into text", "plain text transcript"),
    ("asr-en-v2", "audio", "recording English speech", "transcribes into text spoken English", "transcript plain text"),
    ("caption-base", "image", "photo or picture", "writes a short caption describing the scene", "one sentence caption"),
    ("detr-objects", "image", "natural image", "detects and localizes objects with bounding boxes", "list of labeled boxes"),
    ("emotion-voice", "audio", "speech audio clip", "classifies the emotion of the speaker", "emotion label"),
    ("mt-de-en", "text", "German sentence or paragraph", "translates German text into English", "English translation"),
    ("mt-en-de", "text", "English sentence or paragraph", "translates English text into German", "German translation"),
    ("ner-bert", "text", "raw English text", "tags named entities such as people places and organizations", "entity spans with types"),
    ("ocr-print", "image", "scanned document image", "recognizes printed characters", "extracted text"),
    ("sentiment-a", "text", "product review text", "scores the sentiment polarity", "positive or negative label"),
    ("sentiment-b", "text", "review text product", "scores the polarity sentiment", "negative or positive label"),
    ("summarizer", "text", "long news article", "condenses the article into a brief summary", "short summary paragraph"),
]

# (query_id, text, attachment kind or None, gt_tool_id)
QUERIES = [
    ("q01", "What does this person say?", "audio", "asr-en"),
    ("q02", "Write down the words in this clip.", "audio", "asr-en-v2"),
    ("q03", "How does the speaker feel?", "audio", "emotion-voice"),
    ("q04", "Describe this picture in one line.", "image", "caption-base"),
    ("q05", "Where are the cars in this photo?", "image", "detr-objects"),
    ("q06", "Read the text from this scan.", "image", "ocr-print"),
    ("q07", "Caption this for my album.", "image", "caption-base"),
    ("q08", "Translate 'Guten Morgen' to English.", None, "mt-de-en"),
    ("q09", "Put 'good night' into German.", None, "mt-en-de"),
    ("q10", "Find the people named in this paragraph.", None, "ner-bert"),
    ("q11", "Is this review happy or angry?", None, "sentiment-a"),
    ("q12", "Rate the mood of this product review.", None, "sentiment-b"),
    ("q13", "Shorten this news story.", None, "summarizer"),
    ("q14", "Which organizations appear here?", None, "ner-bert"),
    ("q15", "Was the customer satisfied?", None, "sentiment-b"),
    ("q16", "Transcribe my voicemail.", "audio", "asr-en-v2"),
]

MEDIA = {"image": "image/png", "audio": "audio/wav"}
SUFFIX = {"image": "png", "audio": "wav"}
RECALL_K = [1, 3, 5, 10]
MODALITY_ORDER = ["text", "image", "audio"]


def canonical(inp, proc, out):
    return json.dumps({"input": inp, "process": proc, "output": out}, ensure_ascii=False)


def main(out_dir, dim):
    os.makedirs(out_dir, exist_ok=True)
    tools = sorted(TOOLS)
    with open(os.path.join(out_dir, "tools.jsonl"), "w") as f:
        for tid, mod, i, p, o in tools:
            f.write(json.dumps({"tool_id": tid, "input": i, "process": p, "output": o, "modality": mod}) + "\n")
    with open(os.path.join(out_dir, "queries.jsonl"), "w") as f:
        for qid, text, kind, gt in QUERIES:
            atts = []
            if kind:
                atts.append({"kind": kind, "payload_ref": "media/%s.%s" % (qid, SUFFIX[kind]),
                             "media_type": MEDIA[kind]})
            f.write(json.dumps({"query_id": qid, "text": text, "attachments": atts, "gt_tool_id": gt}) + "\n")

    vecs = {t[0]: embed(canonical(*t[2:]), dim) for t in tools}
    by_id = {t[0]: t for t in tools}
    items = []
    for qid, _, kind, gt in QUERIES:
        q = embed(canonical(*by_id[gt][2:]), dim)
        scored = []
        for tid, v in vecs.items():
            s = 0.0
            for a, b in zip(q, v):
                s += a * b
            scored.append((-s, tid))
        scored.sort()
        order = [tid for _, tid in scored]
        items.append({"modality": kind or "text", "correct": order[0] == gt, "rank": order.index(gt) + 1})

    def recall(group, k):
        return 100.0 * sum(1 for it in group if it["rank"] <= k) / len(group)

    mods, accs = {}, []
    for m in MODALITY_ORDER:
        group = [it for it in items if it["modality"] == m]
        if not group:
            continue
        correct = sum(it["correct"] for it in group)
        acc = 100.0 * correct / len(group)
        accs.append(acc)
        mods[m] = {"accuracy": acc, "count": len(group), "correct": correct,
                   "recall_at_k": {str(k): recall(group, k) for k in RECALL_K}}
    total_correct = sum(it["correct"] for it in items)
    report = {
        "modalities": mods,
        "avg_q": 100.0 * total_correct / len(items),
        "avg_m": sum(accs) / len(accs),
        "total": len(items),
        "total_correct": total_correct,
        "generation_failures": 0,
        "recall_at_k": {str(k): recall(items, k) for k in RECALL_K},
    }
    with open(os.path.join(out_dir, "expected_report.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps(report, indent=2, sort_keys=True))


if __name__ == "__main__":
    main(sys.argv[1], int(sys.argv[2]) if len(sys.argv) > 2 else 256)
