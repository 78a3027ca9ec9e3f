//! Deterministic synthetic corpora for tests, demos and the bundled fixture.
//!
//! Filler words never contain the letters `x` or `q`. Every trigger word
//! starts with the sentinel `xq` followed by a stem specific to the
//! sentence's emotion, so both tasks are learnable from character n-grams.
//! Neutral sentences carry no triggers.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnnotatedSentence, Corpus, DatasetTag, EmotionLabel, Language};

pub const SENTINEL: &str = "xq";

const FILLER: &[&str] = &[
    "the", "a", "day", "was", "we", "went", "to", "home", "and", "then", "it", "rained", "my", "friend", "said",
    "that", "time", "city", "road", "book", "today", "after", "school", "morning", "people", "talk", "about", "new",
    "old", "walk", "park", "dinner", "water", "light", "table", "window", "music", "letter", "train", "station",
];

const SUFFIXES: &[&str] = &["a", "o", "en", "is"];

fn stems(emotion: EmotionLabel) -> &'static [&'static str] {
    match emotion {
        EmotionLabel::Love => &["amoros", "carin", "dulcez"],
        EmotionLabel::Joy => &["gaudent", "ridens", "felicit"],
        EmotionLabel::Fear => &["timor", "pavent", "horrid"],
        EmotionLabel::Anger => &["iracund", "furios", "rabid"],
        EmotionLabel::Sadness => &["tristit", "dolent", "lugubr"],
        EmotionLabel::Neutral => &[],
    }
}

/// Every trigger word the generator can emit for `emotion`.
pub fn trigger_vocabulary(emotion: EmotionLabel) -> Vec<String> {
    stems(emotion)
        .iter()
        .flat_map(|stem| SUFFIXES.iter().map(move |suffix| format!("{SENTINEL}{stem}{suffix}")))
        .collect()
}

fn trigger_word(rng: &mut ChaCha8Rng, emotion: EmotionLabel) -> String {
    let stem = stems(emotion).choose(rng).expect("non-neutral emotion has stems");
    let suffix = SUFFIXES.choose(rng).expect("suffix list is non-empty");
    format!("{SENTINEL}{stem}{suffix}")
}

/// `count` English sentences with ids `{prefix}{index}`, emotions drawn
/// uniformly, and one or two trigger spans of one or two words each in
/// non-neutral sentences.
pub fn generate_corpus(count: usize, seed: u64, prefix: &str) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = (0..count)
        .map(|i| {
            let emotion = EmotionLabel::ALL[rng.random_range(0..EmotionLabel::COUNT)];
            let len = rng.random_range(4..=10);
            let mut tokens: Vec<String> = (0..len)
                .map(|_| FILLER.choose(&mut rng).expect("filler list is non-empty").to_string())
                .collect();
            let mut mask = vec![false; len];
            if emotion != EmotionLabel::Neutral {
                let spans = rng.random_range(1..=2);
                // spans go into separate halves so they never touch
                for s in 0..spans {
                    let half = len / 2;
                    let (lo, hi) = if spans == 1 {
                        (0, len)
                    } else if s == 0 {
                        (0, half - 1)
                    } else {
                        (half, len)
                    };
                    let width = rng.random_range(1..=2).min(hi - lo);
                    let start = rng.random_range(lo..=hi - width);
                    for j in start..start + width {
                        tokens[j] = trigger_word(&mut rng, emotion);
                        mask[j] = true;
                    }
                }
            }
            AnnotatedSentence {
                id: format!("{prefix}{i}"),
                tokens,
                emotion: Some(emotion),
                trigger_mask: Some(mask),
                language: Language::En,
                origin: DatasetTag::Source,
                bilingual: false,
            }
        })
        .collect();
    let mut corpus = Corpus::from_sentences(sentences).expect("generated sentences are valid");
    corpus.provenance.insert("synthetic.seed".into(), seed.to_string());
    corpus.provenance.insert("synthetic.count".into(), count.to_string());
    corpus
}

/// Word-for-word pseudo-translation: every vocabulary word gains a
/// language-specific ending, which keeps the trigger sentinel intact.
pub fn pseudo_translate(word: &str, lang: Language) -> String {
    let ending = match lang {
        Language::En => "",
        Language::Nl => "en",
        Language::Ru => "ov",
        Language::Es => "o",
        Language::Fr => "e",
    };
    format!("{word}{ending}")
}

/// Dictionary lines `lang<TAB>source<TAB>target` covering the whole
/// generator vocabulary for each language in `langs`.
pub fn mock_dictionary(langs: &[Language]) -> Vec<(Language, String, String)> {
    let mut vocab: Vec<String> = FILLER.iter().map(|w| w.to_string()).collect();
    for emotion in EmotionLabel::ALL {
        vocab.extend(trigger_vocabulary(emotion));
    }
    langs
        .iter()
        .filter(|&&l| l != Language::En)
        .flat_map(|&lang| vocab.iter().map(move |w| (lang, w.clone(), pseudo_translate(w, lang))))
        .collect()
}
