//! Streaming MT controller with sentinel-delimited history.
//!
//! Committed ASR words accumulate in the active source. Each step asks the
//! backend for beams continuing the committed target, emits what RALCP agrees
//! on, and when the sentinel is committed moves the translated source span
//! (cut at the most attended source position of the token before the
//! sentinel) and its target into the history. History is evicted oldest-first
//! once the source buffer exceeds its budget.

use serde::{Deserialize, Serialize};

use crate::backends::{check_mt_response, MtBackend, MtRequest};
use crate::clock::{ClockSource, VirtualClock};
use crate::error::{Error, Result};
use crate::policy::{ralcp_emit, waitk_allows, RalcpConfig, WaitKConfig};
use crate::types::{check_word, is_sep, BeamSet, EmissionRecord, StreamHistory, SEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryRemove {
    /// Drop the oldest (source, target) sentence pair.
    OldestSentencePair,
    /// Drop the oldest `n` words from each side independently.
    WordCount(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MtStreamConfig {
    pub ralcp: RalcpConfig,
    pub waitk: WaitKConfig,
    pub max_buffer_words: usize,
    pub history_remove: HistoryRemove,
    pub attention_layer_tag: String,
}

impl Default for MtStreamConfig {
    fn default() -> Self {
        MtStreamConfig {
            ralcp: RalcpConfig::default(),
            waitk: WaitKConfig::default(),
            max_buffer_words: 80,
            history_remove: HistoryRemove::OldestSentencePair,
            attention_layer_tag: "6".into(),
        }
    }
}

impl MtStreamConfig {
    pub fn validate(&self) -> Result<()> {
        self.ralcp.validate()?;
        self.waitk.validate()?;
        if self.max_buffer_words == 0 {
            return Err(Error::invalid("mt max_buffer_words must be at least 1"));
        }
        if self.history_remove == HistoryRemove::WordCount(0) {
            return Err(Error::invalid("mt history word removal count must be at least 1"));
        }
        Ok(())
    }
}

/// A closed segment: `cut_index` is the last active-source position moved to
/// history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentClosure {
    pub cut_index: usize,
    pub source: Vec<String>,
    /// Target tokens of the segment, ending in the sentinel.
    pub target_tokens: Vec<String>,
}

/// Index of the largest weight; ties go to the largest index.
pub fn segment_source(attention_row: &[f64]) -> Result<usize> {
    if attention_row.is_empty() {
        return Err(Error::invalid("attention row is empty"));
    }
    if let Some(w) = attention_row.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::invalid(format!("attention weight {w} is not a non-negative number")));
    }
    let mut best = 0;
    for (i, w) in attention_row.iter().enumerate() {
        if *w >= attention_row[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MtCounters {
    pub backend_calls: usize,
    pub segments_closed: usize,
    pub evictions: usize,
    pub dropped_sentinels: usize,
    /// Steps that ended with the active source alone above the buffer budget.
    pub overflow_steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MtStepOutput {
    pub emissions: Vec<EmissionRecord>,
    pub closures: Vec<SegmentClosure>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct MtState {
    history: StreamHistory,
    segment_words_read: usize,
    segment_ordinal: usize,
    counters: MtCounters,
}

#[derive(Debug, Clone)]
pub struct MtStream {
    cfg: MtStreamConfig,
    stream_id: String,
    clock_source: ClockSource,
    state: MtState,
}

fn drop_front_words(sentences: &mut [Vec<String>], mut n: usize) {
    for s in sentences.iter_mut() {
        if n == 0 {
            break;
        }
        let k = n.min(s.len());
        s.drain(..k);
        n -= k;
    }
}

/// Replaces beams that do not extend the committed prefix with empty ones.
fn sanitize(mut beams: BeamSet, committed: &[String]) -> BeamSet {
    for beam in &mut beams.beams {
        let extends = beam.tokens.len() >= committed.len()
            && beam.tokens[..committed.len()] == *committed;
        if !extends {
            beam.tokens = committed.to_vec();
            beam.attention.truncate(committed.len());
        }
    }
    beams
}

impl MtStream {
    pub fn new(cfg: MtStreamConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(MtStream {
            cfg,
            stream_id: "stream-0".into(),
            clock_source: ClockSource::Virtual,
            state: MtState::default(),
        })
    }

    pub fn with_stream_id(mut self, id: impl Into<String>) -> Self {
        self.stream_id = id.into();
        self
    }

    pub fn with_clock_source(mut self, source: ClockSource) -> Self {
        self.clock_source = source;
        self
    }

    pub fn config(&self) -> &MtStreamConfig {
        &self.cfg
    }

    pub fn history(&self) -> &StreamHistory {
        &self.state.history
    }

    pub fn counters(&self) -> MtCounters {
        self.state.counters
    }

    /// Source words read since the current segment started.
    pub fn segment_words_read(&self) -> usize {
        self.state.segment_words_read
    }

    /// Feeds freshly committed source words and emits what the policies
    /// allow. An empty input is a no-op. On error the controller state and
    /// the clock are left untouched.
    pub fn step<S: AsRef<str>>(
        &mut self,
        new_source_words: &[S],
        clock: &mut VirtualClock,
        backend: &mut dyn MtBackend,
    ) -> Result<MtStepOutput> {
        if new_source_words.is_empty() {
            return Ok(MtStepOutput::default());
        }
        for w in new_source_words {
            check_word(w.as_ref())?;
        }
        let mut work = self.state.clone();
        let mut work_clock = *clock;
        work.history
            .active_source
            .extend(new_source_words.iter().map(|w| w.as_ref().to_string()));
        work.segment_words_read += new_source_words.len();
        let out = self.advance(&mut work, &mut work_clock, backend, false)?;
        self.state = work;
        *clock = work_clock;
        Ok(out)
    }

    /// End of stream: emits the best beam for whatever active source is left,
    /// closing segments at each sentinel, regardless of policy agreement.
    pub fn finish(
        &mut self,
        clock: &mut VirtualClock,
        backend: &mut dyn MtBackend,
    ) -> Result<MtStepOutput> {
        let mut work = self.state.clone();
        let mut work_clock = *clock;
        let out = self.advance(&mut work, &mut work_clock, backend, true)?;
        self.state = work;
        *clock = work_clock;
        Ok(out)
    }

    fn request(&self, st: &MtState) -> MtRequest {
        MtRequest {
            stream_id: self.stream_id.clone(),
            history_source: st.history.source_sentences.clone(),
            history_target: st.history.target_sentences.clone(),
            active_source: st.history.active_source.clone(),
            committed_target: st.history.active_target_committed.clone(),
            beam_size: self.cfg.ralcp.beam_size,
            attention_layer_tag: self.cfg.attention_layer_tag.clone(),
        }
    }

    fn advance(
        &self,
        st: &mut MtState,
        clock: &mut VirtualClock,
        backend: &mut dyn MtBackend,
        flush: bool,
    ) -> Result<MtStepOutput> {
        let mut out = MtStepOutput::default();
        loop {
            if st.history.active_source.is_empty() {
                break;
            }
            if !flush && !waitk_allows(&self.cfg.waitk, st.segment_words_read) {
                break;
            }
            let req = self.request(st);
            let resp = clock.charge_call(
                self.clock_source,
                || {
                    let resp = backend.translate(&req)?;
                    check_mt_response(&req, &resp)?;
                    Ok(resp)
                },
                |r| r.compute_cost_s,
            )?;
            st.counters.backend_calls += 1;

            let committed_len = st.history.active_target_committed.len();
            let beams = sanitize(resp.beams, &st.history.active_target_committed);
            let emitted: Vec<String> = if flush {
                match beams.beams.first() {
                    Some(top) => {
                        let cont = &top.tokens[committed_len..];
                        let end = cont.iter().position(|t| is_sep(t)).map_or(cont.len(), |p| p + 1);
                        cont[..end].to_vec()
                    }
                    None => Vec::new(),
                }
            } else {
                ralcp_emit(&beams, committed_len, &self.cfg.ralcp)
            };
            if emitted.is_empty() {
                break;
            }

            let closes = emitted.last().is_some_and(|t| is_sep(t));
            let stamp = |token: &str, ordinal: usize| EmissionRecord {
                token: token.to_string(),
                segment_ordinal: ordinal,
                nca_time_s: clock.audio_available_s,
                ca_time_s: clock.now_s,
            };
            let words_end = emitted.len() - usize::from(closes);
            for tok in &emitted[..words_end] {
                out.emissions.push(stamp(tok, st.segment_ordinal));
                st.history.active_target_committed.push(tok.clone());
            }
            if !closes {
                break;
            }

            let sep_pos = st.history.active_target_committed.len();
            let cut = if sep_pos == 0 {
                0
            } else {
                let mut prefix = st.history.active_target_committed.clone();
                prefix.push(SEP.to_string());
                let winner = beams
                    .beams
                    .iter()
                    .find(|b| b.tokens.len() > sep_pos && b.tokens[..=sep_pos] == prefix[..])
                    .expect("an emitted sentinel is held by at least one beam");
                segment_source(&winner.attention[sep_pos - 1]).map_err(|e| {
                    Error::protocol("beams.attention", e.to_string(), String::new())
                })?
            };
            out.emissions.push(stamp(SEP, st.segment_ordinal));
            let source: Vec<String> = st.history.active_source.drain(..=cut).collect();
            let target = std::mem::take(&mut st.history.active_target_committed);
            let mut target_tokens = target.clone();
            target_tokens.push(SEP.to_string());
            out.closures.push(SegmentClosure {
                cut_index: cut,
                source: source.clone(),
                target_tokens,
            });
            st.history.source_sentences.push(source);
            st.history.target_sentences.push(target);
            st.segment_ordinal += 1;
            st.segment_words_read = st.history.active_source.len();
            st.counters.segments_closed += 1;
            self.evict(st);
        }
        self.evict(st);
        if st.history.active_source.len() > self.cfg.max_buffer_words {
            st.counters.overflow_steps += 1;
        }
        Ok(out)
    }

    fn evict(&self, st: &mut MtState) {
        let max = self.cfg.max_buffer_words;
        let h = &mut st.history;
        match self.cfg.history_remove {
            HistoryRemove::OldestSentencePair => {
                while h.buffered_source_words() > max && !h.source_sentences.is_empty() {
                    h.source_sentences.remove(0);
                    h.target_sentences.remove(0);
                    st.counters.evictions += 1;
                }
            }
            HistoryRemove::WordCount(n) => {
                while h.buffered_source_words() > max && h.history_source_words() > 0 {
                    drop_front_words(&mut h.source_sentences, n);
                    drop_front_words(&mut h.target_sentences, n);
                    while h
                        .source_sentences
                        .first()
                        .zip(h.target_sentences.first())
                        .is_some_and(|(s, t)| s.is_empty() && t.is_empty())
                    {
                        h.source_sentences.remove(0);
                        h.target_sentences.remove(0);
                    }
                    st.counters.evictions += 1;
                }
            }
        }
    }
}
