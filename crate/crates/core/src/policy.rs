//! Emission policies: relaxed longest-common-prefix agreement between
//! consecutive ASR hypotheses, RALCP voting over MT beams, and the wait-k hold
//! at the start of each target segment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::{words_match, MatchConfig};
use crate::types::{is_sep, BeamHypothesis, BeamSet};

/// Length of the agreed prefix of two consecutive hypotheses, skipping the
/// first `committed` positions (already emitted).
pub fn agreed_prefix_len<A, B>(prev: &[A], curr: &[B], committed: usize, matcher: &MatchConfig) -> usize
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    let limit = prev.len().min(curr.len());
    let mut n = committed;
    while n < limit && words_match(prev[n].as_ref(), curr[n].as_ref(), matcher) {
        n += 1;
    }
    n
}

/// How the agreement bar reacts to beams removed by empty-hypothesis
/// filtering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteBar {
    /// `ceil(lambda * requested_size)` votes, fixed before filtering.
    #[default]
    PreserveAbsolute,
    /// `ceil(lambda * survivors)` votes after filtering.
    RescaleToSurvivors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RalcpConfig {
    pub lambda: f64,
    pub beam_size: usize,
    pub filter_empty: bool,
    pub vote_bar: VoteBar,
}

impl Default for RalcpConfig {
    fn default() -> Self {
        RalcpConfig {
            lambda: 0.5,
            beam_size: 10,
            filter_empty: true,
            vote_bar: VoteBar::PreserveAbsolute,
        }
    }
}

impl RalcpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::invalid(format!(
                "ralcp lambda must be in (0, 1], got {}",
                self.lambda
            )));
        }
        if self.beam_size == 0 {
            return Err(Error::invalid("ralcp beam_size must be at least 1"));
        }
        Ok(())
    }
}

/// `ceil(lambda * n)`, tolerant of binary rounding in the product
/// (0.3 * 10 must give 3, not 4).
pub fn votes_needed(lambda: f64, n: usize) -> usize {
    let raw = lambda * n as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

/// RALCP: emits the longest prefix beyond `committed` that at least the
/// required number of beams share, extending one token at a time by plurality
/// vote. Stops after emitting a sentinel.
///
/// Only beams that still agree with everything emitted in this call vote on
/// the next position. Plurality ties go to the token held by the
/// highest-scoring beam.
pub fn ralcp_emit(beams: &BeamSet, committed: usize, cfg: &RalcpConfig) -> Vec<String> {
    let voters: Vec<&BeamHypothesis> = beams
        .beams
        .iter()
        .filter(|b| !cfg.filter_empty || b.tokens.len() > committed)
        .collect();
    let needed = match cfg.vote_bar {
        VoteBar::PreserveAbsolute => votes_needed(cfg.lambda, beams.requested_size),
        VoteBar::RescaleToSurvivors => votes_needed(cfg.lambda, voters.len()),
    }
    .max(1);

    let mut alive = vec![true; voters.len()];
    let mut emitted = Vec::new();
    let mut pos = committed;
    loop {
        // (token, votes, holder with best score)
        let mut tally: Vec<(&str, usize, usize)> = Vec::new();
        for (i, beam) in voters.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let Some(tok) = beam.tokens.get(pos) else {
                continue;
            };
            match tally.iter_mut().find(|(t, _, _)| *t == tok.as_str()) {
                Some(entry) => {
                    entry.1 += 1;
                    if voters[i].score > voters[entry.2].score {
                        entry.2 = i;
                    }
                }
                None => tally.push((tok.as_str(), 1, i)),
            }
        }
        let best = tally.into_iter().max_by(|a, b| {
            a.1.cmp(&b.1)
                .then(voters[a.2].score.total_cmp(&voters[b.2].score))
                .then(b.2.cmp(&a.2))
        });
        let Some((token, votes, _)) = best else {
            break;
        };
        if votes < needed {
            break;
        }
        let token = token.to_string();
        for (i, beam) in voters.iter().enumerate() {
            alive[i] = alive[i] && beam.tokens.get(pos) == Some(&token);
        }
        let stop = is_sep(&token);
        emitted.push(token);
        pos += 1;
        if stop {
            break;
        }
    }
    emitted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaitKConfig {
    pub k: usize,
}

impl Default for WaitKConfig {
    fn default() -> Self {
        WaitKConfig { k: 3 }
    }
}

impl WaitKConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("wait-k must be at least 1"));
        }
        Ok(())
    }
}

/// Initial hold for a new segment: no target output until `k` source words of
/// the segment have been read.
pub fn waitk_allows(cfg: &WaitKConfig, segment_source_words_read: usize) -> bool {
    segment_source_words_read >= cfg.k
}
