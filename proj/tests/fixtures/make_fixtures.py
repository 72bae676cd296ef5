#!/usr/bin/env python3
"""Regenerates the synthetic fixtures in this directory (deterministic)."""
import json
import math
import random
import string
from pathlib import Path

HERE = Path(__file__).resolve().parent

POSITIVE = {"rally": (0.625, 0.0), "gains": (0.5, 0.0), "bullish": (0.75, 0.0), "strong": (0.5, 0.125),
            "upgrade": (0.375, 0.0), "beat": (0.25, 0.125), "growth": (0.5, 0.0), "profit": (0.5, 0.0),
            "buy": (0.125, 0.0), "surge": (0.375, 0.0), "good": (0.75, 0.0), "long": (0.125, 0.0)}
NEGATIVE = {"crash": (0.0, 0.625), "losses": (0.0, 0.5), "bearish": (0.0, 0.75), "weak": (0.125, 0.625),
            "downgrade": (0.0, 0.375), "miss": (0.0, 0.25), "decline": (0.0, 0.5), "debt": (0.0, 0.25),
            "sell": (0.0, 0.125), "plunge": (0.0, 0.625), "bad": (0.0, 0.625), "short": (0.0, 0.125)}
NEUTRAL = ["stock", "today", "shares", "market", "earnings", "quarter", "report", "coming", "price", "the",
           "lunchtime", "week", "after", "open"]
MARKET = {"rally": 1.84, "bullish": 2.1, "buy": 1.2, "long": 0.9, "surge": 1.5, "gains": 1.1,
          "bearish": -2.3, "sell": -1.4, "short": -1.0, "crash": -1.9, "plunge": -1.6, "losses": -1.2}
TICKERS = ["$AAPL", "$TSLA", "$FB", "$AA", "$DIA", "$MSFT"]
SOURCES = ["twitter", "stocktwits"]


def vocab():
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
    tokens += sorted(POSITIVE) + sorted(NEGATIVE) + NEUTRAL + TICKERS
    tokens += ["cu", "##rre", "##ncies", "##s", "##ing", "##ed", "$"]
    singles = list(string.ascii_lowercase + string.ascii_uppercase + string.digits + ".,!?:/-'")
    tokens += singles + ["##" + c for c in singles]
    seen, out = set(), []
    for t in tokens:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def example(rng):
    n_words = rng.randint(3, 7)
    ticker = rng.choice(TICKERS)
    words, polarity = [ticker], 0.0
    for _ in range(n_words - 1):
        kind = rng.random()
        if kind < 0.3:
            w = rng.choice(sorted(POSITIVE))
            polarity += 1
        elif kind < 0.6:
            w = rng.choice(sorted(NEGATIVE))
            polarity -= 1
        else:
            w = rng.choice(NEUTRAL)
        words.append(w)
    rng.shuffle(words)
    score = round(math.tanh(0.6 * polarity), 3)
    return rng.choice(SOURCES), ticker, " ".join(words), score


def write_tsv(path, rows, header=None):
    with open(path, "w", encoding="utf-8") as f:
        if header:
            f.write(header + "\n")
        for r in rows:
            f.write("\t".join([r[0], r[1], r[2], repr(r[3])]) + "\n")


def main():
    (HERE / "vocab.txt").write_text("\n".join(vocab()) + "\n", encoding="utf-8")
    with open(HERE / "senti.tsv", "w", encoding="utf-8") as f:
        f.write("# word\tpos\tneg\n")
        for w, (p, n) in sorted({**POSITIVE, **NEGATIVE}.items()):
            f.write(f"{w}\t{p}\t{n}\n")
        f.write("the\t0.0\t0.0\n")
    with open(HERE / "market.tsv", "w", encoding="utf-8") as f:
        f.write("# token\tscore\n")
        for w, s in sorted(MARKET.items()):
            f.write(f"{w}\t{s}\n")
    rng = random.Random(2017)
    train = [example(rng) for _ in range(64)]
    # A few rows carry links that loading removes.
    for i in range(0, 64, 9):
        s, e, t, y = train[i]
        train[i] = (s, e, t + " https://t.co/x" + str(i), y)
    write_tsv(HERE / "train.tsv", train, "# source\tentity\ttext\tscore")
    write_tsv(HERE / "train_small.tsv", [example(rng) for _ in range(32)])
    write_tsv(HERE / "test.tsv", [example(rng) for _ in range(32)])
    records = [{"source": s, "cashtag": e, "spans": [t], "sentiment score": str(y)}
               for s, e, t, y in [example(rng) for _ in range(5)]]
    records.append({"cashtag": "$DIA", "spans": "Lunchtime rally coming", "sentiment score": 0.46})
    (HERE / "ssix_sample.json").write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
