//! Seeded generators for randomized and fixture-driven tests.

use rand::seq::SliceRandom;
use rand::Rng;

use simulst_core::backends::mock::{AsrScript, Fallback, MockScript, MtScript};
use simulst_core::pipeline::{EventKind, TraceEvent};
use simulst_core::types::TimedWord;

/// Multi-letter words, none of them abbreviations.
pub const VOCAB: &[&str] = &[
    "the", "speech", "model", "stream", "window", "audio", "latency", "we", "propose", "cascade",
    "system", "translate", "sentence", "history", "buffer", "token", "beam", "search", "policy",
    "agreement", "prefix", "source", "target", "context", "today", "results", "show", "that",
    "our", "approach", "works", "well", "across", "languages", "with", "small", "delay",
    "attention", "layer", "decoder",
];

const TERMINALS: &[&str] = &[".", "?", "!"];

pub fn sentence<R: Rng>(rng: &mut R, min_words: usize, max_words: usize) -> Vec<String> {
    let n = rng.gen_range(min_words..=max_words);
    let mut words: Vec<String> = (0..n)
        .map(|_| VOCAB.choose(rng).expect("vocab").to_string())
        .collect();
    if rng.gen_bool(0.3) {
        let w = &mut words[0];
        let mut c = w.chars();
        let first = c.next().expect("non-empty").to_uppercase().collect::<String>();
        *w = first + c.as_str();
    }
    if n > 2 && rng.gen_bool(0.2) {
        words[n / 2].push(',');
    }
    words[n - 1].push_str(TERMINALS.choose(rng).expect("terminals"));
    words
}

pub fn document<R: Rng>(rng: &mut R, sentences: usize, min_words: usize, max_words: usize) -> Vec<Vec<String>> {
    (0..sentences).map(|_| sentence(rng, min_words, max_words)).collect()
}

/// Lays words out in time: 0.2 to 0.6 s per word, small gaps, longer pauses
/// between sentences.
pub fn timed_words<R: Rng>(rng: &mut R, doc: &[Vec<String>]) -> Vec<TimedWord> {
    let mut out = Vec::new();
    let mut t: f64 = rng.gen_range(0.0..0.5);
    for s in doc {
        for w in s {
            let dur = rng.gen_range(0.2..0.6);
            out.push(TimedWord::new(w.clone(), t, t + dur).expect("valid word"));
            t += dur + rng.gen_range(0.0..0.15);
        }
        t += rng.gen_range(0.2..0.8);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Noise {
    pub stabilization_delay_s: f64,
    pub perturb_rate: f64,
    pub disagreement_rate: f64,
    pub empty_beam_rate: f64,
    pub attention_blur: f64,
}

impl Noise {
    pub fn stable() -> Self {
        Noise::default()
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Noise {
            stabilization_delay_s: rng.gen_range(0.0..2.0),
            perturb_rate: rng.gen_range(0.0..=1.0),
            disagreement_rate: rng.gen_range(0.0..0.6),
            empty_beam_rate: rng.gen_range(0.0..0.5),
            attention_blur: rng.gen_range(0.0..0.4),
        }
    }
}

pub fn mock_script(seed: u64, words: Vec<TimedWord>, tail_s: f64, noise: Noise) -> MockScript {
    let duration = words.last().map_or(0.0, |w| w.end_s) + tail_s;
    MockScript {
        seed,
        asr: Some(AsrScript {
            words,
            duration_s: Some(duration),
            stabilization_delay_s: noise.stabilization_delay_s,
            perturb_rate: noise.perturb_rate,
            cost_base_s: 0.1,
            cost_per_s: 0.01,
        }),
        mt: Some(MtScript {
            fallback: Fallback::Uppercase,
            disagreement_rate: noise.disagreement_rate,
            empty_beam_rate: noise.empty_beam_rate,
            attention_blur: noise.attention_blur,
            ..MtScript::default()
        }),
    }
}

/// Audio arriving in random chunks of `min_chunk..max_chunk` seconds, each
/// announced when it ends plus a non-negative jitter.
pub fn trace<R: Rng>(rng: &mut R, total_s: f64, min_chunk: f64, max_chunk: f64) -> Vec<TraceEvent> {
    let mut out = Vec::new();
    let mut audio = 0.0;
    let mut last_t: f64 = 0.0;
    while audio + 1e-9 < total_s {
        let dur = rng.gen_range(min_chunk..max_chunk).min(total_s - audio);
        audio += dur;
        let t = (audio + rng.gen_range(0.0..0.05)).max(last_t);
        last_t = t;
        out.push(TraceEvent {
            t,
            kind: EventKind::Audio,
            dur,
        });
    }
    out
}

const WORD_CHARS: &[char] = &[
    'a', 'b', 'c', 'e', 'A', 'B', 'é', 'É', 'ß', '.', ',', '!', '?', '\'', '"', '-', '«', '»', '¿', '…', '1',
];

/// Short random word mixing case, accents, digits and punctuation.
pub fn word<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| *WORD_CHARS.choose(rng).expect("chars")).collect()
}

/// Perturbs a word by up to `edits` random character edits.
pub fn mutate<R: Rng>(rng: &mut R, w: &str, edits: usize) -> String {
    let mut chars: Vec<char> = w.chars().collect();
    for _ in 0..edits {
        let c = *WORD_CHARS.choose(rng).expect("chars");
        match rng.gen_range(0..3) {
            0 if !chars.is_empty() => {
                let i = rng.gen_range(0..chars.len());
                chars[i] = c;
            }
            1 if chars.len() > 1 => {
                let i = rng.gen_range(0..chars.len());
                chars.remove(i);
            }
            _ => {
                let i = rng.gen_range(0..=chars.len());
                chars.insert(i, c);
            }
        }
    }
    chars.into_iter().collect()
}
