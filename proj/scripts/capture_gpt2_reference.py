"""Capture reference GPT-2 token ids for the parity fixture.

Uses the Hugging Face slow GPT-2 tokenizer over the released vocab/merges
files in data/gpt2 and writes one JSON object per sentence.
"""
import json
import pathlib
import sys

from transformers import GPT2Tokenizer

ROOT = pathlib.Path(__file__).resolve().parent.parent

SENTENCES = [
    "hello world",
    "Protest in Delhi on Friday",
    "Protesters gather in New Delhi, India on Friday.",
    "Prime Minister Narendra Modi speaks at a rally in Mumbai.",
    "A man walks his dog through Central Park in New York.",
    "Firefighters battle a blaze near Los Angeles on Tuesday night.",
    "The U.S. Senate voted 51-49 to confirm the nominee.",
    "She said: \"We won't stop until we're heard.\"",
    "It's 3:45 p.m. and the market's down 2.5%.",
    "Barack Obama and Angela Merkel met in Berlin in 2015.",
    "Refugees arrive at the Greek island of Lesbos.",
    "Floodwaters cover streets in Houston, Texas after Hurricane Harvey.",
    "Supporters of Donald Trump rally outside the Capitol.",
    "A child holds a sign reading 'Save our planet'.",
    "Police officers stand guard in Paris, France.",
    "The World Health Organization declared a pandemic on March 11, 2020.",
    "Tourists visit the Eiffel Tower on a sunny afternoon.",
    "Workers repair a bridge in Kolkata during the monsoon.",
    "Crowds celebrate New Year's Eve in Sydney Harbour.",
    "Volunteers distribute food in Nairobi, Kenya.",
    "Thousands marched through London demanding climate action.",
    "An aerial view of the damage caused by the earthquake in Nepal.",
    "Students protest tuition hikes at the University of California.",
    "The Pope addresses pilgrims in St. Peter's Square.",
    "Soldiers patrol the border between India and Pakistan.",
    "A woman votes at a polling station in Lagos, Nigeria.",
    "Smoke rises over the city of Aleppo, Syria.",
    "Farmers harvest rice in the Mekong Delta, Vietnam.",
    "The iPhone 12 was unveiled in Cupertino on October 13.",
    "Rescue teams search for survivors after the landslide.",
    "   leading spaces and  double  spaces   ",
    "tabs\tand\nnewlines\n\nmixed",
    "Numbers like 1234567 and 3.14159 and 1,000,000.",
    "Email me at someone@example.com or visit https://example.org/path?q=1",
    "Café crème brûlée in Montréal, Québec.",
    "Zürich and München are in Europe.",
    "Москва is Moscow in Russian.",
    "東京 means Tokyo.",
    "Emoji test \U0001F600 and \U0001F30D together!",
    "I'll, you've, they'd, he's, we're, I'm, don't",
    "UPPERCASE HEADLINE: MARKETS CRASH",
    "#hashtag @mention $100 &amp; <tag>",
    "...ellipsis... and --dashes-- and (parentheses)",
    "Zero-width​space and non breaking",
    "Mixed123alpha456numeric",
    "½ of the ⅓ and Ⅷ numerals",
    "A quote “smart quotes” and ‘single’ ones",
    "Prime numbers: 2, 3, 5, 7, 11, 13.",
    "The quick brown fox jumps over the lazy dog",
    "",
]

def main() -> int:
    tok = GPT2Tokenizer(str(ROOT / "data/gpt2/vocab.json"), str(ROOT / "data/gpt2/merges.txt"))
    out = ROOT / "tests/fixtures/gpt2_reference.jsonl"
    with out.open("w", encoding="utf-8") as fh:
        for s in SENTENCES:
            ids = tok.encode(s)
            fh.write(json.dumps({"text": s, "ids": ids}, ensure_ascii=False) + "\n")
    print(f"wrote {len(SENTENCES)} sentences to {out}")
    return 0

if __name__ == "__main__":
    sys.exit(main())
