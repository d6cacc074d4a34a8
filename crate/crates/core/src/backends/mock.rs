//! Deterministic mock backends driven by a JSON script.
//!
//! Every response is a pure function of `(seed, request)`: the RNG for a call
//! is seeded from a SHA-256 digest of the seed and the request's wire
//! encoding, so replaying requests in any order reproduces the same output.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{wire, AsrBackend, AsrRequest, AsrResponse, MtBackend, MtRequest, MtResponse};
use crate::error::{Error, Result};
use crate::textnorm::{is_punctuation, SentenceSplitter};
use crate::types::{check_word, AsrHypothesis, BeamHypothesis, BeamSet, TimedWord, SEP};

fn default_asr_cost_base() -> f64 {
    0.1
}
fn default_asr_cost_per_s() -> f64 {
    0.01
}
fn default_mt_cost_base() -> f64 {
    0.05
}
fn default_mt_cost_per_word() -> f64 {
    0.002
}
fn default_rate() -> f64 {
    1.0
}
fn default_max_tail() -> usize {
    2
}

/// Ground truth and perturbation settings for the mock recognizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsrScript {
    pub words: Vec<TimedWord>,
    /// Audio extent; defaults to the end of the last word.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Words ending within this distance of the window end are unstable.
    #[serde(default)]
    pub stabilization_delay_s: f64,
    /// Probability that an unstable word is perturbed.
    #[serde(default = "default_rate")]
    pub perturb_rate: f64,
    #[serde(default = "default_asr_cost_base")]
    pub cost_base_s: f64,
    #[serde(default = "default_asr_cost_per_s")]
    pub cost_per_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    Identity,
    Uppercase,
}

/// Word map and beam-disagreement settings for the mock translator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtScript {
    /// Lowercased source word core -> target word.
    #[serde(default)]
    pub word_map: BTreeMap<String, String>,
    #[serde(default)]
    pub fallback: Fallback,
    /// Probability that a beam other than the first alters its tail.
    #[serde(default)]
    pub disagreement_rate: f64,
    /// Longest tail (in tokens) a disagreeing beam truncates or perturbs.
    #[serde(default = "default_max_tail")]
    pub max_tail: usize,
    /// Probability that a beam other than the first is empty beyond the
    /// committed prefix.
    #[serde(default)]
    pub empty_beam_rate: f64,
    /// Uniform noise added to one-hot attention before renormalizing.
    #[serde(default)]
    pub attention_blur: f64,
    #[serde(default = "default_mt_cost_base")]
    pub cost_base_s: f64,
    #[serde(default = "default_mt_cost_per_word")]
    pub cost_per_word_s: f64,
}

impl Default for MtScript {
    fn default() -> Self {
        MtScript {
            word_map: BTreeMap::new(),
            fallback: Fallback::Identity,
            disagreement_rate: 0.0,
            max_tail: default_max_tail(),
            empty_beam_rate: 0.0,
            attention_blur: 0.0,
            cost_base_s: default_mt_cost_base(),
            cost_per_word_s: default_mt_cost_per_word(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asr: Option<AsrScript>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mt: Option<MtScript>,
}

fn check_unit(field: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("{field} must be in [0, 1], got {v}")));
    }
    Ok(())
}

fn check_non_negative(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::invalid(format!(
            "{field} must be finite and non-negative, got {v}"
        )));
    }
    Ok(())
}

impl AsrScript {
    pub fn extent_s(&self) -> f64 {
        self.duration_s
            .unwrap_or_else(|| self.words.last().map_or(0.0, |w| w.end_s))
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev_end = 0.0;
        for (i, w) in self.words.iter().enumerate() {
            w.validate()
                .map_err(|e| Error::invalid(format!("asr.words[{i}]: {e}")))?;
            if w.end_s < prev_end {
                return Err(Error::invalid(format!(
                    "asr.words[{i}]: end times must be non-decreasing"
                )));
            }
            prev_end = w.end_s;
        }
        if let Some(d) = self.duration_s {
            check_non_negative("asr.duration_s", d)?;
            if d < prev_end {
                return Err(Error::invalid(format!(
                    "asr.duration_s {d} ends before the last word ({prev_end})"
                )));
            }
        }
        check_non_negative("asr.stabilization_delay_s", self.stabilization_delay_s)?;
        check_unit("asr.perturb_rate", self.perturb_rate)?;
        check_non_negative("asr.cost_base_s", self.cost_base_s)?;
        check_non_negative("asr.cost_per_s", self.cost_per_s)
    }
}

impl MtScript {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.word_map {
            check_word(v).map_err(|e| Error::invalid(format!("mt.word_map[{k:?}]: {e}")))?;
        }
        check_unit("mt.disagreement_rate", self.disagreement_rate)?;
        check_unit("mt.empty_beam_rate", self.empty_beam_rate)?;
        check_non_negative("mt.attention_blur", self.attention_blur)?;
        if self.max_tail == 0 {
            return Err(Error::invalid("mt.max_tail must be at least 1"));
        }
        check_non_negative("mt.cost_base_s", self.cost_base_s)?;
        check_non_negative("mt.cost_per_word_s", self.cost_per_word_s)
    }
}

impl MockScript {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let script: MockScript =
            serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
                source_name: "mock script".into(),
                line: e.inner().line(),
                field: Some(e.path().to_string()),
                message: e.inner().to_string(),
            })?;
        script.validate()?;
        Ok(script)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse {
                line,
                field,
                message,
                ..
            } => Error::Parse {
                source_name: path.display().to_string(),
                line,
                field,
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(asr) = &self.asr {
            asr.validate()?;
        }
        if let Some(mt) = &self.mt {
            mt.validate()?;
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("mock script serializes")
    }
}

fn request_rng(seed: u64, domain: &str, encoded: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(encoded.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// Alters a word by a case flip, a trailing punctuation toggle, or one or two
/// letter substitutions. The raw edit distance to the input is at most 2.
pub fn perturb_word(text: &str, rng: &mut impl Rng) -> String {
    let chars: Vec<char> = text.chars().collect();
    let kind = rng.gen_range(0..3u8);
    let out = match kind {
        0 if chars[0].is_ascii_alphabetic() => {
            let mut c = chars.clone();
            c[0] = if c[0].is_ascii_lowercase() {
                c[0].to_ascii_uppercase()
            } else {
                c[0].to_ascii_lowercase()
            };
            c.into_iter().collect()
        }
        2 => {
            let n = rng.gen_range(1..=2usize).min(chars.len());
            let mut c = chars.clone();
            let mut positions: Vec<usize> = (0..c.len()).collect();
            for k in 0..n {
                let j = rng.gen_range(k..positions.len());
                positions.swap(k, j);
                let p = positions[k];
                let orig = c[p];
                let mut repl = orig;
                while repl == orig {
                    repl = (b'a' + rng.gen_range(0..26u8)) as char;
                }
                c[p] = repl;
            }
            c.into_iter().collect()
        }
        _ => toggle_trailing_punct(&chars),
    };
    if out == SEP {
        toggle_trailing_punct(&chars)
    } else {
        out
    }
}

fn toggle_trailing_punct(chars: &[char]) -> String {
    match chars.last() {
        Some(&c) if is_punctuation(c) && chars.len() > 1 => chars[..chars.len() - 1].iter().collect(),
        _ => chars.iter().chain(std::iter::once(&',')).collect(),
    }
}

/// Mock recognizer: returns ground-truth words inside the window, perturbing
/// the unstable tail.
#[derive(Debug, Clone)]
pub struct MockAsr {
    script: AsrScript,
    seed: u64,
}

impl MockAsr {
    pub fn new(script: AsrScript, seed: u64) -> Result<Self> {
        script.validate()?;
        Ok(MockAsr { script, seed })
    }

    pub fn script(&self) -> &AsrScript {
        &self.script
    }
}

impl AsrBackend for MockAsr {
    fn decode(&mut self, req: &AsrRequest) -> Result<AsrResponse> {
        let extent = self.script.extent_s();
        let (ws, we) = (req.window_start_s, req.window_end_s);
        if !(ws.is_finite() && we.is_finite()) || ws < 0.0 || ws > we || we > extent + 1e-9 {
            return Err(Error::invalid(format!(
                "window [{ws}, {we}] outside script extent [0, {extent}]"
            )));
        }
        let mut rng = request_rng(self.seed, "asr", &wire::encode_asr_request(req));
        let unstable_after = we - self.script.stabilization_delay_s;
        let words = self
            .script
            .words
            .iter()
            .filter(|w| w.start_s >= ws && w.end_s <= we)
            .map(|w| {
                let mut w = w.clone();
                if w.end_s > unstable_after && rng.gen_bool(self.script.perturb_rate) {
                    w.text = perturb_word(&w.text, &mut rng);
                }
                w
            })
            .collect();
        Ok(AsrResponse {
            hypothesis: AsrHypothesis {
                words,
                window_offset_s: ws,
            },
            compute_cost_s: self.script.cost_base_s + self.script.cost_per_s * (we - ws),
        })
    }
}

/// Mock translator: word-for-word map with a sentinel after each
/// sentence-final source word and one-hot diagonal attention.
#[derive(Debug, Clone)]
pub struct MockMt {
    script: MtScript,
    seed: u64,
    splitter: SentenceSplitter,
}

impl MockMt {
    pub fn new(script: MtScript, seed: u64) -> Result<Self> {
        script.validate()?;
        Ok(MockMt {
            script,
            seed,
            splitter: SentenceSplitter::default(),
        })
    }

    pub fn with_splitter(mut self, splitter: SentenceSplitter) -> Self {
        self.splitter = splitter;
        self
    }

    pub fn map_word(&self, word: &str) -> String {
        let core = word.trim_end_matches(is_punctuation);
        if core.is_empty() {
            return word.to_string();
        }
        let suffix = &word[core.len()..];
        let mapped = match self.script.word_map.get(&core.to_lowercase()) {
            Some(t) => t.clone(),
            None => match self.script.fallback {
                Fallback::Identity => core.to_string(),
                Fallback::Uppercase => core.to_uppercase(),
            },
        };
        mapped + suffix
    }

    /// Full translation of `source` with sentinels, and for each token the
    /// source position it translates.
    pub fn translate_words<S: AsRef<str>>(&self, source: &[S]) -> (Vec<String>, Vec<usize>) {
        let mut tokens = Vec::new();
        let mut src_of = Vec::new();
        for (i, w) in source.iter().enumerate() {
            let w = w.as_ref();
            tokens.push(self.map_word(w));
            src_of.push(i);
            if self.splitter.is_sentence_final(w) {
                tokens.push(SEP.to_string());
                src_of.push(i);
            }
        }
        (tokens, src_of)
    }

    /// Offline translation of a whole transcript, sentinels removed.
    pub fn offline_translation<S: AsRef<str>>(&self, source: &[S]) -> Vec<String> {
        source.iter().map(|w| self.map_word(w.as_ref())).collect()
    }
}

fn one_hot(pos: usize, width: usize) -> Vec<f64> {
    let mut row = vec![0.0; width];
    if width > 0 {
        row[pos.min(width - 1)] = 1.0;
    }
    row
}

impl MtBackend for MockMt {
    fn translate(&mut self, req: &MtRequest) -> Result<MtResponse> {
        let width = req.active_source.len();
        let (full, src_of) = self.translate_words(&req.active_source);
        let committed = &req.committed_target;
        let mut tokens = committed.clone();
        if committed.len() < full.len() {
            tokens.extend_from_slice(&full[committed.len()..]);
        }
        let rows: Vec<Vec<f64>> = (0..tokens.len())
            .map(|i| one_hot(src_of.get(i).copied().unwrap_or(width.saturating_sub(1)), width))
            .collect();

        let mut rng = request_rng(self.seed, "mt", &wire::encode_mt_request(req));
        let s = &self.script;
        let mut beams = Vec::with_capacity(req.beam_size);
        for b in 0..req.beam_size {
            let mut toks = tokens.clone();
            let mut att = rows.clone();
            if b > 0 {
                let draw: f64 = rng.gen();
                let cont = toks.len().saturating_sub(committed.len());
                if draw < s.empty_beam_rate {
                    toks.truncate(committed.len());
                    att.truncate(committed.len());
                } else if draw < s.empty_beam_rate + s.disagreement_rate && cont > 0 {
                    let m = rng.gen_range(1..=s.max_tail.min(cont));
                    let keep = toks.len() - m;
                    if rng.gen_bool(0.5) {
                        toks.truncate(keep);
                        att.truncate(keep);
                    } else {
                        for t in &mut toks[keep..] {
                            *t = format!("{t}~{}", rng.gen_range(1..=3u8));
                        }
                    }
                }
            }
            if s.attention_blur > 0.0 && width > 0 {
                for row in &mut att {
                    for w in row.iter_mut() {
                        *w += rng.gen_range(0.0..s.attention_blur);
                    }
                    let total: f64 = row.iter().sum();
                    row.iter_mut().for_each(|w| *w /= total);
                }
            }
            beams.push(BeamHypothesis {
                tokens: toks,
                score: -(b as f64),
                attention: att,
            });
        }
        let context_words: usize = req.history_source.iter().map(Vec::len).sum();
        Ok(MtResponse {
            beams: BeamSet {
                beams,
                requested_size: req.beam_size,
            },
            compute_cost_s: s.cost_base_s + s.cost_per_word_s * (context_words + width) as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textnorm::levenshtein;

    fn truth() -> Vec<TimedWord> {
        [
            ("Hello", 0.0, 0.5),
            ("world.", 0.6, 1.2),
            ("This", 2.0, 2.4),
            ("is", 2.5, 2.7),
            ("a", 2.8, 2.9),
            ("test.", 3.0, 3.6),
            ("Another", 7.0, 7.8),
            ("sentence", 8.1, 8.9),
            ("ends", 9.0, 9.4),
            ("here.", 9.5, 9.9),
        ]
        .iter()
        .map(|(t, s, e)| TimedWord::new(*t, *s, *e).unwrap())
        .collect()
    }

    fn asr_script(delay: f64) -> AsrScript {
        AsrScript {
            words: truth(),
            duration_s: Some(10.0),
            stabilization_delay_s: delay,
            perturb_rate: 1.0,
            cost_base_s: 0.1,
            cost_per_s: 0.01,
        }
    }

    fn req(ws: f64, we: f64) -> AsrRequest {
        AsrRequest {
            stream_id: "s".into(),
            window_start_s: ws,
            window_end_s: we,
            beam_size: 5,
        }
    }

    #[test]
    fn zero_delay_returns_truth() {
        let mut asr = MockAsr::new(asr_script(0.0), 1).unwrap();
        let resp = asr.decode(&req(0.0, 10.0)).unwrap();
        assert_eq!(resp.hypothesis.words, truth());
        assert!((resp.compute_cost_s - 0.2).abs() < 1e-12);

        let resp = asr.decode(&req(2.0, 3.0)).unwrap();
        assert_eq!(resp.hypothesis.texts(), vec!["This", "is", "a"]);
        assert_eq!(resp.hypothesis.window_offset_s, 2.0);
    }

    #[test]
    fn asr_is_deterministic() {
        let mut a = MockAsr::new(asr_script(2.0), 7).unwrap();
        let mut b = MockAsr::new(asr_script(2.0), 7).unwrap();
        let r = req(0.0, 10.0);
        assert_eq!(a.decode(&r).unwrap(), a.decode(&r).unwrap());
        assert_eq!(a.decode(&r).unwrap(), b.decode(&r).unwrap());
    }

    #[test]
    fn unstable_tail_stays_within_two_edits() {
        for seed in 0..200 {
            let mut asr = MockAsr::new(asr_script(2.0), seed).unwrap();
            let resp = asr.decode(&req(0.0, 10.0)).unwrap();
            for (got, want) in resp.hypothesis.words.iter().zip(truth()) {
                assert_eq!((got.start_s, got.end_s), (want.start_s, want.end_s));
                if want.end_s <= 8.0 {
                    assert_eq!(got.text, want.text);
                } else {
                    assert!(levenshtein(&got.text, &want.text) <= 2, "{got:?} vs {want:?}");
                }
            }
        }
    }

    #[test]
    fn window_outside_extent_rejected() {
        let mut asr = MockAsr::new(asr_script(0.0), 1).unwrap();
        assert!(matches!(asr.decode(&req(0.0, 10.5)), Err(Error::InvalidArgument(_))));
        assert!(matches!(asr.decode(&req(3.0, 2.0)), Err(Error::InvalidArgument(_))));
    }

    fn mt_req(active: &[&str], committed: &[&str]) -> MtRequest {
        MtRequest {
            stream_id: "s".into(),
            history_source: vec![],
            history_target: vec![],
            active_source: active.iter().map(|s| s.to_string()).collect(),
            committed_target: committed.iter().map(|s| s.to_string()).collect(),
            beam_size: 3,
            attention_layer_tag: "6".into(),
        }
    }

    fn upper_mt() -> MockMt {
        MockMt::new(
            MtScript {
                fallback: Fallback::Uppercase,
                ..MtScript::default()
            },
            0,
        )
        .unwrap()
    }

    #[test]
    fn mt_uppercase_example() {
        let mut mt = upper_mt();
        let resp = mt.translate(&mt_req(&["a", "bee."], &[])).unwrap();
        let top = &resp.beams.beams[0];
        assert_eq!(top.tokens, vec!["A", "BEE.", SEP]);
        assert_eq!(
            top.attention,
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]
        );
        let scores: Vec<f64> = resp.beams.beams.iter().map(|b| b.score).collect();
        assert!(scores.windows(2).all(|w| w[0] > w[1]));
        check_mt_ok(&mt_req(&["a", "bee."], &[]), &resp);
    }

    fn check_mt_ok(req: &MtRequest, resp: &MtResponse) {
        crate::backends::check_mt_response(req, resp).unwrap();
    }

    #[test]
    fn mt_fully_committed_beam_is_empty_beyond_prefix() {
        let mut mt = upper_mt();
        let r = mt_req(&["a", "b."], &["A", "B.", SEP]);
        let resp = mt.translate(&r).unwrap();
        assert_eq!(resp.beams.beams[0].tokens.len(), 3);
        check_mt_ok(&r, &resp);
    }

    #[test]
    fn mt_is_deterministic_and_valid_with_noise() {
        let script = MtScript {
            disagreement_rate: 0.6,
            empty_beam_rate: 0.2,
            attention_blur: 0.5,
            ..MtScript::default()
        };
        let mut mt = MockMt::new(script, 11).unwrap();
        let r = mt_req(&["one", "two", "three.", "four"], &["one"]);
        let a = mt.translate(&r).unwrap();
        let b = mt.translate(&r).unwrap();
        assert_eq!(a, b);
        check_mt_ok(&r, &a);
        for beam in &a.beams.beams {
            assert_eq!(beam.tokens[0], "one");
            for row in &beam.attention {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn word_map_keeps_punctuation() {
        let mut map = BTreeMap::new();
        map.insert("dog".to_string(), "Hund".to_string());
        let mt = MockMt::new(
            MtScript {
                word_map: map,
                ..MtScript::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(mt.map_word("Dog."), "Hund.");
        assert_eq!(mt.map_word("cat,"), "cat,");
        assert_eq!(mt.map_word("—"), "—");
    }

    #[test]
    fn perturbation_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for w in ["a", "Hello", "x.", "42", "naïve", "ok,"] {
            for _ in 0..200 {
                let p = perturb_word(w, &mut rng);
                assert!(!p.is_empty());
                assert!(check_word(&p).is_ok());
                assert!(levenshtein(&p, w) <= 2, "{w} -> {p}");
            }
        }
    }

    #[test]
    fn script_parse_names_field() {
        let err = MockScript::parse(r#"{"seed": 1, "asr": {"words": [{"text": "a", "start_s": "x", "end_s": 1}]}}"#)
            .unwrap_err();
        assert_eq!(err.field(), Some("asr.words[0].start_s"));
        let err = MockScript::parse(r#"{"seed": 1, "bogus": true}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = MockScript::parse(r#"{"mt": {"disagreement_rate": 2.0}}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
