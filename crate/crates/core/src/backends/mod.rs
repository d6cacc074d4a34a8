//! Backend contracts for ASR decoding and MT beam translation, plus the
//! deterministic mocks and the JSONL wire client used to reach external model
//! servers.

pub mod mock;
pub mod transport;
pub mod wire;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AsrHypothesis, BeamSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrRequest {
    pub stream_id: String,
    pub window_start_s: f64,
    pub window_end_s: f64,
    pub beam_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrResponse {
    pub hypothesis: AsrHypothesis,
    pub compute_cost_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtRequest {
    pub stream_id: String,
    pub history_source: Vec<Vec<String>>,
    pub history_target: Vec<Vec<String>>,
    pub active_source: Vec<String>,
    pub committed_target: Vec<String>,
    pub beam_size: usize,
    pub attention_layer_tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtResponse {
    pub beams: BeamSet,
    pub compute_cost_s: f64,
}

pub trait AsrBackend {
    fn decode(&mut self, req: &AsrRequest) -> Result<AsrResponse>;
}

pub trait MtBackend {
    fn translate(&mut self, req: &MtRequest) -> Result<MtResponse>;
}

impl<T: AsrBackend + ?Sized> AsrBackend for &mut T {
    fn decode(&mut self, req: &AsrRequest) -> Result<AsrResponse> {
        (**self).decode(req)
    }
}

impl<T: AsrBackend + ?Sized> AsrBackend for Box<T> {
    fn decode(&mut self, req: &AsrRequest) -> Result<AsrResponse> {
        (**self).decode(req)
    }
}

impl<T: MtBackend + ?Sized> MtBackend for &mut T {
    fn translate(&mut self, req: &MtRequest) -> Result<MtResponse> {
        (**self).translate(req)
    }
}

impl<T: MtBackend + ?Sized> MtBackend for Box<T> {
    fn translate(&mut self, req: &MtRequest) -> Result<MtResponse> {
        (**self).translate(req)
    }
}

fn check_cost(cost: f64, payload: &dyn Fn() -> String) -> Result<()> {
    if !cost.is_finite() || cost < 0.0 {
        return Err(Error::protocol(
            "compute_cost_s",
            format!("must be finite and non-negative, got {cost}"),
            payload(),
        ));
    }
    Ok(())
}

/// Checks an ASR response against the request that produced it: word
/// validity, ordering, and containment in the requested window.
pub fn check_asr_response(req: &AsrRequest, resp: &AsrResponse) -> Result<()> {
    let payload = || serde_json::to_string(resp).unwrap_or_default();
    check_cost(resp.compute_cost_s, &payload)?;
    let hyp = &resp.hypothesis;
    if hyp.window_offset_s != req.window_start_s {
        return Err(Error::protocol(
            "hypothesis.window_offset_s",
            format!(
                "expected window start {}, got {}",
                req.window_start_s, hyp.window_offset_s
            ),
            payload(),
        ));
    }
    let mut prev_end = f64::NEG_INFINITY;
    for (i, w) in hyp.words.iter().enumerate() {
        let field = |name: &str| format!("hypothesis.words[{i}].{name}");
        if let Err(e) = w.validate() {
            return Err(Error::protocol(field("text"), e.to_string(), payload()));
        }
        if w.start_s < req.window_start_s || w.end_s > req.window_end_s {
            return Err(Error::protocol(
                field("start_s"),
                format!(
                    "span [{}, {}] outside window [{}, {}]",
                    w.start_s, w.end_s, req.window_start_s, req.window_end_s
                ),
                payload(),
            ));
        }
        if w.end_s < prev_end {
            return Err(Error::protocol(
                field("end_s"),
                "word end times must be non-decreasing",
                payload(),
            ));
        }
        prev_end = w.end_s;
    }
    Ok(())
}

/// Checks an MT response against its request: beam count, one attention row
/// per token, row width equal to the active source length, non-negative
/// weights.
pub fn check_mt_response(req: &MtRequest, resp: &MtResponse) -> Result<()> {
    let payload = || serde_json::to_string(resp).unwrap_or_default();
    check_cost(resp.compute_cost_s, &payload)?;
    let set = &resp.beams;
    if set.requested_size != req.beam_size {
        return Err(Error::protocol(
            "requested_size",
            format!("expected {}, got {}", req.beam_size, set.requested_size),
            payload(),
        ));
    }
    if set.beams.len() > set.requested_size {
        return Err(Error::protocol(
            "beams",
            format!(
                "{} beams returned for requested size {}",
                set.beams.len(),
                set.requested_size
            ),
            payload(),
        ));
    }
    let width = req.active_source.len();
    for (b, beam) in set.beams.iter().enumerate() {
        if !beam.score.is_finite() {
            return Err(Error::protocol(
                format!("beams[{b}].score"),
                "score must be finite",
                payload(),
            ));
        }
        if b > 0 && beam.score > set.beams[b - 1].score {
            return Err(Error::protocol(
                format!("beams[{b}].score"),
                "beams must be ordered by descending score",
                payload(),
            ));
        }
        if beam.attention.len() != beam.tokens.len() {
            return Err(Error::protocol(
                format!("beams[{b}].attention"),
                format!(
                    "{} attention rows for {} tokens",
                    beam.attention.len(),
                    beam.tokens.len()
                ),
                payload(),
            ));
        }
        for (t, row) in beam.attention.iter().enumerate() {
            if row.len() != width {
                return Err(Error::protocol(
                    format!("beams[{b}].attention[{t}]"),
                    format!("row has {} weights, active source has {width} words", row.len()),
                    payload(),
                ));
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::protocol(
                    format!("beams[{b}].attention[{t}]"),
                    "weights must be finite and non-negative",
                    payload(),
                ));
            }
        }
        if let Some(t) = beam.tokens.iter().position(String::is_empty) {
            return Err(Error::protocol(
                format!("beams[{b}].tokens[{t}]"),
                "empty token",
                payload(),
            ));
        }
    }
    Ok(())
}
