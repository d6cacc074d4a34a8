//! Streaming ASR controller.
//!
//! The controller re-decodes a growing audio window and commits the words on
//! which two consecutive hypotheses over the same window agree (relaxed
//! matching). The window is trimmed when a committed word closes a sentence,
//! and force-trimmed when it would grow past `max_window_s`.

use serde::{Deserialize, Serialize};

use crate::backends::{check_asr_response, AsrBackend, AsrRequest};
use crate::clock::{ClockSource, VirtualClock};
use crate::error::{Error, Result};
use crate::policy::agreed_prefix_len;
use crate::textnorm::{MatchConfig, SentenceSplitter};
use crate::types::{AsrHypothesis, TimedWord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsrStreamConfig {
    pub max_window_s: f64,
    pub min_chunk_s: f64,
    pub initial_wait_s: f64,
    pub matcher: MatchConfig,
    pub backend_beam: usize,
}

impl Default for AsrStreamConfig {
    fn default() -> Self {
        AsrStreamConfig {
            max_window_s: 30.0,
            min_chunk_s: 1.0,
            initial_wait_s: 1.0,
            matcher: MatchConfig::default(),
            backend_beam: 5,
        }
    }
}

impl AsrStreamConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.max_window_s, self.min_chunk_s, self.initial_wait_s]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.min_chunk_s <= 0.0 || self.min_chunk_s > self.max_window_s {
            return Err(Error::invalid(format!(
                "asr window settings need 0 < min_chunk_s ({}) <= max_window_s ({})",
                self.min_chunk_s, self.max_window_s
            )));
        }
        if self.initial_wait_s < 0.0 {
            return Err(Error::invalid("asr initial_wait_s must be non-negative"));
        }
        if self.backend_beam == 0 {
            return Err(Error::invalid("asr backend_beam must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AsrStreamState {
    pub window_start_s: f64,
    /// Audio position covered by the most recent decode.
    pub decoded_until_s: f64,
    pub prev_hypothesis: Option<AsrHypothesis>,
    pub committed: Vec<TimedWord>,
    pub committed_sentence_ends: Vec<usize>,
    /// Leading words of the current window's hypotheses already committed.
    pub committed_in_window: usize,
    pub started: bool,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrCounters {
    pub decodes: usize,
    pub sentence_trims: usize,
    pub forced_trims: usize,
}

#[derive(Debug, Clone)]
pub struct AsrStream {
    cfg: AsrStreamConfig,
    splitter: SentenceSplitter,
    stream_id: String,
    clock_source: ClockSource,
    state: AsrStreamState,
    counters: AsrCounters,
}

impl AsrStream {
    pub fn new(cfg: AsrStreamConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(AsrStream {
            cfg,
            splitter: SentenceSplitter::default(),
            stream_id: "stream-0".into(),
            clock_source: ClockSource::Virtual,
            state: AsrStreamState::default(),
            counters: AsrCounters::default(),
        })
    }

    pub fn with_splitter(mut self, splitter: SentenceSplitter) -> Self {
        self.splitter = splitter;
        self
    }

    pub fn with_stream_id(mut self, id: impl Into<String>) -> Self {
        self.stream_id = id.into();
        self
    }

    pub fn with_clock_source(mut self, source: ClockSource) -> Self {
        self.clock_source = source;
        self
    }

    pub fn config(&self) -> &AsrStreamConfig {
        &self.cfg
    }

    pub fn state(&self) -> &AsrStreamState {
        &self.state
    }

    pub fn counters(&self) -> AsrCounters {
        self.counters
    }

    pub fn committed(&self) -> &[TimedWord] {
        &self.state.committed
    }

    fn decode(
        &self,
        clock: &mut VirtualClock,
        backend: &mut dyn AsrBackend,
    ) -> Result<AsrHypothesis> {
        let req = AsrRequest {
            stream_id: self.stream_id.clone(),
            window_start_s: self.state.window_start_s,
            window_end_s: clock.audio_available_s,
            beam_size: self.cfg.backend_beam,
        };
        let resp = clock.charge_call(self.clock_source, || {
            let resp = backend.decode(&req)?;
            check_asr_response(&req, &resp)?;
            Ok(resp)
        }, |r| r.compute_cost_s)?;
        Ok(resp.hypothesis)
    }

    /// Appends words to the committed transcript, keeping end times
    /// non-decreasing.
    fn commit(&mut self, words: &[TimedWord]) -> Vec<TimedWord> {
        let mut out = Vec::with_capacity(words.len());
        for w in words {
            let mut w = w.clone();
            if let Some(last) = self.state.committed.last() {
                if w.end_s < last.end_s {
                    w.end_s = last.end_s;
                    w.start_s = w.start_s.min(w.end_s);
                }
            }
            self.state.committed.push(w.clone());
            out.push(w);
        }
        out
    }

    /// One controller step; call after new audio became available. Returns
    /// the newly committed words. On backend failure the controller state and
    /// the clock are left untouched.
    pub fn step(
        &mut self,
        clock: &mut VirtualClock,
        backend: &mut dyn AsrBackend,
    ) -> Result<Vec<TimedWord>> {
        if self.state.finished {
            return Err(Error::invalid("asr stream already finished"));
        }
        let audio = clock.audio_available_s;
        if !self.state.started && audio < self.cfg.initial_wait_s {
            return Ok(Vec::new());
        }
        let window_len = audio - self.state.window_start_s;
        let pending = audio - self.state.decoded_until_s;
        if window_len <= 0.0
            || (pending < self.cfg.min_chunk_s && window_len <= self.cfg.max_window_s)
        {
            return Ok(Vec::new());
        }

        let curr = self.decode(clock, backend)?;
        self.counters.decodes += 1;
        self.state.started = true;
        self.state.decoded_until_s = audio;

        let first_new = self.state.committed.len();
        let mut newly = Vec::new();
        if let Some(prev) = &self.state.prev_hypothesis {
            let skip = self.state.committed_in_window;
            let n = agreed_prefix_len(&prev.texts(), &curr.texts(), skip, &self.cfg.matcher);
            if n > skip {
                let words = curr.words[skip..n].to_vec();
                newly = self.commit(&words);
                self.state.committed_in_window = n;
            }
        }
        self.state.prev_hypothesis = Some(curr);

        let mut last_sentence_end = None;
        for i in first_new..self.state.committed.len() {
            if self.splitter.is_sentence_final(&self.state.committed[i].text) {
                self.state.committed_sentence_ends.push(i);
                last_sentence_end = Some(i);
            }
        }
        if let Some(i) = last_sentence_end {
            self.state.window_start_s = self.state.committed[i].end_s;
            self.state.prev_hypothesis = None;
            self.state.committed_in_window = self.state.committed.len() - 1 - i;
            self.counters.sentence_trims += 1;
        }
        if audio - self.state.window_start_s > self.cfg.max_window_s {
            let last_committed_end = if self.state.committed_in_window > 0 {
                self.state.committed.last().map_or(0.0, |w| w.end_s)
            } else {
                self.state.window_start_s
            };
            self.state.window_start_s = last_committed_end.max(audio - self.cfg.max_window_s);
            self.state.prev_hypothesis = None;
            self.state.committed_in_window = 0;
            self.counters.forced_trims += 1;
        }
        Ok(newly)
    }

    /// End of stream: commits the remainder of the latest hypothesis for the
    /// current window, decoding once more if audio arrived since the last
    /// decode.
    pub fn finish(
        &mut self,
        clock: &mut VirtualClock,
        backend: &mut dyn AsrBackend,
    ) -> Result<Vec<TimedWord>> {
        if self.state.finished {
            return Ok(Vec::new());
        }
        let audio = clock.audio_available_s;
        let needs_decode = audio > self.state.window_start_s
            && (self.state.prev_hypothesis.is_none() || audio > self.state.decoded_until_s);
        let hyp = if needs_decode {
            let h = self.decode(clock, backend)?;
            self.counters.decodes += 1;
            self.state.decoded_until_s = audio;
            Some(h)
        } else {
            self.state.prev_hypothesis.clone()
        };
        self.state.finished = true;
        let Some(hyp) = hyp else {
            return Ok(Vec::new());
        };
        let skip = self.state.committed_in_window.min(hyp.words.len());
        let first_new = self.state.committed.len();
        let newly = self.commit(&hyp.words[skip..]);
        for i in first_new..self.state.committed.len() {
            if self.splitter.is_sentence_final(&self.state.committed[i].text) {
                self.state.committed_sentence_ends.push(i);
            }
        }
        self.state.prev_hypothesis = None;
        self.state.committed_in_window = 0;
        Ok(newly)
    }
}
