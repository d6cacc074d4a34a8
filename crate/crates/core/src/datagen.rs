//! Training sample construction from document-aligned bitext: sentinel-joined
//! preceding context plus an active pair that is cut to a proportional prefix
//! at a configurable rate.
//!
//! Corpus format: UTF-8, one `source ||| target` pair per line, documents
//! separated by blank lines, each optionally headed by a `# <id>` line.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{is_sep, SEP};

const PAIR_DELIM: &str = "|||";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub pairs: Vec<SentencePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub max_context: usize,
    pub min_context: usize,
    pub prefix_rate: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_context: 10,
            min_context: 1,
            prefix_rate: 0.5,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_context < 1 || self.min_context > self.max_context {
            return Err(Error::invalid(format!(
                "context bounds must satisfy 1 <= min ({}) <= max ({})",
                self.min_context, self.max_context
            )));
        }
        if !(0.0..=1.0).contains(&self.prefix_rate) {
            return Err(Error::invalid(format!(
                "prefix_rate {} is outside [0, 1]",
                self.prefix_rate
            )));
        }
        Ok(())
    }
}

/// Source prefix length for target cut `j`: `round(j * src / tgt)` (halves
/// round up), clamped to `[1, src]`.
pub fn prefix_source_cut(src_len: usize, tgt_len: usize, j: usize) -> usize {
    if tgt_len == 0 {
        return src_len;
    }
    let cut = (2 * j * src_len + tgt_len) / (2 * tgt_len);
    cut.clamp(1, src_len.max(1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub source: String,
    pub target: String,
    pub sentence_index: usize,
    pub context: usize,
    pub prefixed: bool,
    /// The document was too short for the minimum context.
    pub clamped: bool,
}

/// Draws one sample from `doc`.
pub fn gen_sample<R: Rng>(doc: &Document, cfg: &GenConfig, rng: &mut R) -> Result<Sample> {
    let n = doc.pairs.len();
    if n == 0 {
        return Err(Error::invalid(format!("document {:?} is empty", doc.id)));
    }
    let (s, c, clamped) = if n == 1 {
        (0, 0, true)
    } else if n > cfg.min_context {
        let s = rng.gen_range(cfg.min_context..n);
        let c = rng.gen_range(cfg.min_context..=cfg.max_context.min(s));
        (s, c, false)
    } else {
        let s = rng.gen_range(1..n);
        (s, s, true)
    };
    let pair = &doc.pairs[s];
    let prefixed = rng.gen_bool(cfg.prefix_rate);
    let (src_active, tgt_active) = if prefixed {
        let j = rng.gen_range(1..=pair.target.len());
        let cut = prefix_source_cut(pair.source.len(), pair.target.len(), j);
        (&pair.source[..cut], &pair.target[..j])
    } else {
        (&pair.source[..], &pair.target[..])
    };
    let join = |ctx: &mut dyn Iterator<Item = &[String]>, active: &[String]| {
        let mut parts: Vec<String> = ctx.map(|w| w.join(" ")).collect();
        parts.push(active.join(" "));
        parts.join(&format!(" {SEP} "))
    };
    let ctx = &doc.pairs[s - c..s];
    Ok(Sample {
        source: join(&mut ctx.iter().map(|p| p.source.as_slice()), src_active),
        target: join(&mut ctx.iter().map(|p| p.target.as_slice()), tgt_active),
        sentence_index: s,
        context: c,
        prefixed,
        clamped,
    })
}

/// Generator for draw `index`: seeded by `cfg.seed`, one stream per draw.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenStats {
    pub samples: usize,
    pub prefixed: usize,
    pub prefix_fraction: f64,
    /// Samples per context length.
    pub context_histogram: BTreeMap<usize, usize>,
    pub clamped: usize,
    pub context_free: usize,
    pub malformed_lines: usize,
}

/// Draws `count` samples; draw `i` reads document `i % docs.len()`.
pub fn generate(docs: &[Document], cfg: &GenConfig, count: usize) -> Result<(Vec<Sample>, GenStats)> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::invalid("corpus has no documents"));
    }
    let mut samples = Vec::with_capacity(count);
    let mut stats = GenStats {
        samples: count,
        prefixed: 0,
        prefix_fraction: 0.0,
        context_histogram: BTreeMap::new(),
        clamped: 0,
        context_free: 0,
        malformed_lines: 0,
    };
    for i in 0..count {
        let doc = &docs[i % docs.len()];
        let sample = gen_sample(doc, cfg, &mut draw_rng(cfg.seed, i as u64))?;
        stats.prefixed += usize::from(sample.prefixed);
        stats.clamped += usize::from(sample.clamped);
        stats.context_free += usize::from(sample.context == 0);
        *stats.context_histogram.entry(sample.context).or_insert(0) += 1;
        samples.push(sample);
    }
    if count > 0 {
        stats.prefix_fraction = stats.prefixed as f64 / count as f64;
    }
    Ok((samples, stats))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedLine {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLoad {
    pub documents: Vec<Document>,
    pub malformed: Vec<MalformedLine>,
}

fn parse_pair(line: &str) -> std::result::Result<SentencePair, String> {
    let (src, tgt) = line
        .split_once(PAIR_DELIM)
        .ok_or_else(|| format!("expected `source {PAIR_DELIM} target`"))?;
    if tgt.contains(PAIR_DELIM) {
        return Err(format!("more than one `{PAIR_DELIM}` delimiter"));
    }
    let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    let pair = SentencePair {
        source: words(src),
        target: words(tgt),
    };
    if pair.source.is_empty() || pair.target.is_empty() {
        return Err("empty source or target sentence".into());
    }
    if pair.source.iter().chain(&pair.target).any(|w| is_sep(w)) {
        return Err(format!("sentence contains the reserved token {SEP}"));
    }
    Ok(pair)
}

/// Reads every well-formed pair and records the malformed lines.
pub fn parse_corpus_lenient(text: &str) -> CorpusLoad {
    let mut documents = Vec::new();
    let mut malformed = Vec::new();
    let mut current: Option<Document> = None;
    let close = |cur: &mut Option<Document>, docs: &mut Vec<Document>| {
        if let Some(doc) = cur.take() {
            if !doc.pairs.is_empty() {
                docs.push(doc);
            }
        }
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            close(&mut current, &mut documents);
            continue;
        }
        if let Some(id) = line.strip_prefix('#') {
            close(&mut current, &mut documents);
            current = Some(Document {
                id: id.trim().to_string(),
                pairs: Vec::new(),
            });
            continue;
        }
        match parse_pair(line) {
            Ok(pair) => current
                .get_or_insert_with(|| Document {
                    id: format!("doc-{}", documents.len() + 1),
                    pairs: Vec::new(),
                })
                .pairs
                .push(pair),
            Err(message) => malformed.push(MalformedLine {
                line: i + 1,
                message,
            }),
        }
    }
    close(&mut current, &mut documents);
    CorpusLoad {
        documents,
        malformed,
    }
}

/// Strict parse: the first malformed line is an error naming its line.
pub fn parse_corpus(text: &str, source_name: &str) -> Result<Vec<Document>> {
    let load = parse_corpus_lenient(text);
    if let Some(bad) = load.malformed.first() {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: bad.line,
            field: None,
            message: format!(
                "{} ({} malformed line(s) in total)",
                bad.message,
                load.malformed.len()
            ),
        });
    }
    if load.documents.is_empty() {
        return Err(Error::invalid(format!("{source_name}: no documents")));
    }
    Ok(load.documents)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text, &path.display().to_string())
}

/// Canonical serialization: `# id` header, one pair per line, a blank line
/// between documents.
pub fn write_corpus(docs: &[Document]) -> String {
    let mut out = String::new();
    for (i, doc) in docs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("# {}\n", doc.id));
        for p in &doc.pairs {
            out.push_str(&format!(
                "{} {PAIR_DELIM} {}\n",
                p.source.join(" "),
                p.target.join(" ")
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "# talk-a\nHello there . ||| Hallo zusammen .\nHow are you ? ||| Wie geht es dir ?\nI am fine . ||| Mir geht es gut .\n\n# talk-b\nGood morning . ||| Guten Morgen .\nThe weather is nice today . ||| Das Wetter ist heute schön .\n";

    #[test]
    fn corpus_roundtrip() {
        let docs = parse_corpus(FIXTURE, "fixture").unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].pairs.len(), 3);
        assert_eq!(docs[1].pairs.len(), 2);
        assert_eq!(docs[1].id, "talk-b");
        assert_eq!(write_corpus(&docs), FIXTURE);
    }

    #[test]
    fn malformed_line_is_named() {
        let text = "a ||| b\nno delimiter here\n\nc ||| \n";
        match parse_corpus(text, "bad.txt").unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("2 malformed"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let load = parse_corpus_lenient(text);
        assert_eq!(load.documents.len(), 1);
        assert_eq!(load.documents[0].id, "doc-1");
        assert_eq!(load.malformed.iter().map(|m| m.line).collect::<Vec<_>>(), vec![2, 4]);
        assert!(parse_corpus("\n\n", "empty").is_err());
    }

    #[test]
    fn ratio_cut_example() {
        assert_eq!(prefix_source_cut(10, 5, 2), 4);
        assert_eq!(prefix_source_cut(3, 6, 1), 1);
        assert_eq!(prefix_source_cut(5, 5, 5), 5);
        assert_eq!(prefix_source_cut(1, 4, 1), 1);
    }

    #[test]
    fn no_prefix_is_concatenation() {
        let docs = parse_corpus(FIXTURE, "fixture").unwrap();
        let cfg = GenConfig {
            prefix_rate: 0.0,
            ..GenConfig::default()
        };
        for i in 0..50 {
            let s = gen_sample(&docs[0], &cfg, &mut draw_rng(7, i)).unwrap();
            assert!(!s.prefixed);
            if s.sentence_index == 2 && s.context == 2 {
                assert_eq!(s.source, "Hello there . [SEP] How are you ? [SEP] I am fine .");
                assert_eq!(s.target, "Hallo zusammen . [SEP] Wie geht es dir ? [SEP] Mir geht es gut .");
            }
            let seps = |t: &str| t.split(' ').filter(|w| *w == SEP).count();
            assert_eq!(seps(&s.source), s.context);
            assert_eq!(seps(&s.target), s.context);
        }
    }

    #[test]
    fn short_documents() {
        let one = Document {
            id: "x".into(),
            pairs: vec![SentencePair {
                source: vec!["a".into()],
                target: vec!["b".into()],
            }],
        };
        let s = gen_sample(&one, &GenConfig::default(), &mut draw_rng(0, 0)).unwrap();
        assert_eq!((s.context, s.clamped), (0, true));
        let empty = Document {
            id: "e".into(),
            pairs: vec![],
        };
        assert!(gen_sample(&empty, &GenConfig::default(), &mut draw_rng(0, 0)).is_err());
        let cfg = GenConfig {
            min_context: 5,
            ..GenConfig::default()
        };
        let docs = parse_corpus(FIXTURE, "f").unwrap();
        let s = gen_sample(&docs[0], &cfg, &mut draw_rng(0, 3)).unwrap();
        assert!(s.clamped);
        assert_eq!(s.context, s.sentence_index);
    }

    #[test]
    fn generation_is_reproducible() {
        let docs = parse_corpus(FIXTURE, "fixture").unwrap();
        let cfg = GenConfig::default();
        let a = generate(&docs, &cfg, 200).unwrap();
        let b = generate(&docs, &cfg, 200).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.context_histogram.values().sum::<usize>(), 200);
        assert!(GenConfig {
            prefix_rate: 1.5,
            ..cfg
        }
        .validate()
        .is_err());
    }
}
