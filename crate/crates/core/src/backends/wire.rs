//! Newline-delimited JSON protocol for external ASR/MT servers.
//!
//! Each message is one UTF-8 JSON object on one line, carrying a protocol
//! version `"v": 1` and a `"type"` tag. See `PROTOCOL.md` at the repository
//! root for the field reference.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AsrRequest, AsrResponse, MtRequest, MtResponse};
use crate::error::{Error, Result};
use crate::types::{check_word, AsrHypothesis, BeamHypothesis, BeamSet, SEP};

pub const PROTOCOL_VERSION: u32 = 1;

pub const TYPE_ASR_REQUEST: &str = "asr_request";
pub const TYPE_ASR_RESPONSE: &str = "asr_response";
pub const TYPE_MT_REQUEST: &str = "mt_request";
pub const TYPE_MT_RESPONSE: &str = "mt_response";
pub const TYPE_ERROR: &str = "error";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AsrRequestWire {
    v: u32,
    #[serde(rename = "type")]
    kind: String,
    stream_id: String,
    window_start_s: f64,
    window_end_s: f64,
    beam_size: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AsrResponseWire {
    v: u32,
    #[serde(rename = "type")]
    kind: String,
    hypothesis: AsrHypothesis,
    compute_cost_s: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MtRequestWire {
    v: u32,
    #[serde(rename = "type")]
    kind: String,
    stream_id: String,
    /// One string per history sentence, words separated by single spaces.
    history_source: Vec<String>,
    history_target: Vec<String>,
    /// The history sentences joined by ` [SEP] `, as fed to the model.
    context_source: String,
    context_target: String,
    active_source: Vec<String>,
    committed_target: Vec<String>,
    beam_size: usize,
    attention_layer_tag: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MtResponseWire {
    v: u32,
    #[serde(rename = "type")]
    kind: String,
    beams: Vec<BeamHypothesis>,
    requested_size: usize,
    compute_cost_s: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErrorWire {
    v: u32,
    #[serde(rename = "type")]
    kind: String,
    message: String,
}

/// Lenient view of any message, used to classify lines that fail the strict
/// schema.
#[derive(Deserialize)]
struct Header {
    v: Option<serde_json::Value>,
    #[serde(rename = "type")]
    kind: Option<String>,
    message: Option<String>,
}

fn to_line<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("wire messages serialize")
}

fn join_sentence(words: &[String]) -> String {
    words.join(" ")
}

fn split_sentence(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn join_context(sentences: &[String]) -> String {
    sentences.join(&format!(" {SEP} "))
}

pub fn encode_asr_request(req: &AsrRequest) -> String {
    to_line(&AsrRequestWire {
        v: PROTOCOL_VERSION,
        kind: TYPE_ASR_REQUEST.into(),
        stream_id: req.stream_id.clone(),
        window_start_s: req.window_start_s,
        window_end_s: req.window_end_s,
        beam_size: req.beam_size,
    })
}

pub fn encode_asr_response(resp: &AsrResponse) -> String {
    to_line(&AsrResponseWire {
        v: PROTOCOL_VERSION,
        kind: TYPE_ASR_RESPONSE.into(),
        hypothesis: resp.hypothesis.clone(),
        compute_cost_s: resp.compute_cost_s,
    })
}

pub fn encode_mt_request(req: &MtRequest) -> String {
    let history_source: Vec<String> = req.history_source.iter().map(|s| join_sentence(s)).collect();
    let history_target: Vec<String> = req.history_target.iter().map(|s| join_sentence(s)).collect();
    to_line(&MtRequestWire {
        v: PROTOCOL_VERSION,
        kind: TYPE_MT_REQUEST.into(),
        stream_id: req.stream_id.clone(),
        context_source: join_context(&history_source),
        context_target: join_context(&history_target),
        history_source,
        history_target,
        active_source: req.active_source.clone(),
        committed_target: req.committed_target.clone(),
        beam_size: req.beam_size,
        attention_layer_tag: req.attention_layer_tag.clone(),
    })
}

pub fn encode_mt_response(resp: &MtResponse) -> String {
    to_line(&MtResponseWire {
        v: PROTOCOL_VERSION,
        kind: TYPE_MT_RESPONSE.into(),
        beams: resp.beams.beams.clone(),
        requested_size: resp.beams.requested_size,
        compute_cost_s: resp.compute_cost_s,
    })
}

pub fn encode_error(message: &str) -> String {
    to_line(&ErrorWire {
        v: PROTOCOL_VERSION,
        kind: TYPE_ERROR.into(),
        message: message.into(),
    })
}

fn truncate_payload(line: &str) -> String {
    const MAX: usize = 512;
    if line.len() <= MAX {
        return line.to_string();
    }
    let mut end = MAX;
    while !line.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &line[..end])
}

const WIRE_KEYS: &[&str] = &[
    "v",
    "type",
    "message",
    "stream_id",
    "window_start_s",
    "window_end_s",
    "beam_size",
    "hypothesis",
    "words",
    "text",
    "start_s",
    "end_s",
    "window_offset_s",
    "compute_cost_s",
    "history_source",
    "history_target",
    "context_source",
    "context_target",
    "active_source",
    "committed_target",
    "attention_layer_tag",
    "beams",
    "tokens",
    "score",
    "attention",
    "requested_size",
];

/// Completes a path that stopped at an object key (`words[1].?`) using the
/// text at the end of a truncated line: a partial key is completed against
/// the known wire keys, a dangling value names the key it belongs to.
fn resolve_path(path: String, line: &str) -> String {
    let Some(prefix) = path.strip_suffix('?') else {
        return path;
    };
    let mut parts = line.rsplit('"');
    let tail = parts.next().unwrap_or("");
    let key = if !tail.is_empty() && tail.chars().all(|c| c.is_alphanumeric() || c == '_') {
        let mut hits = WIRE_KEYS.iter().filter(|k| k.starts_with(tail));
        match (hits.next(), hits.next()) {
            (Some(k), None) => k.to_string(),
            _ => tail.to_string(),
        }
    } else if tail.trim_start().starts_with(':') {
        parts.next().unwrap_or("").to_string()
    } else {
        String::new()
    };
    if key.is_empty() {
        format!("{prefix}<key>")
    } else {
        format!("{prefix}{key}")
    }
}

fn check_envelope(v: u32, kind: &str, expected: &str, line: &str) -> Result<()> {
    if v != PROTOCOL_VERSION {
        return Err(Error::protocol(
            "v",
            format!("unsupported protocol version {v}"),
            truncate_payload(line),
        ));
    }
    if kind != expected {
        return Err(Error::protocol(
            "type",
            format!("expected {expected:?}, got {kind:?}"),
            truncate_payload(line),
        ));
    }
    Ok(())
}

/// Strict schema decode. On failure, a lenient header read decides whether
/// the peer sent an error message, a wrong version or type, or a malformed
/// line; the reported field is the deepest path the parser reached.
fn decode_strict<T: DeserializeOwned>(line: &str, expected: &str) -> Result<T> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.contains('\n') {
        return Err(Error::protocol("<line>", "embedded newline", truncate_payload(line)));
    }
    let mut de = serde_json::Deserializer::from_str(line);
    let parsed = serde_path_to_error::deserialize::<_, T>(&mut de);
    match parsed {
        Ok(v) => match de.end() {
            Ok(()) => Ok(v),
            Err(e) => Err(Error::protocol("<line>", e.to_string(), truncate_payload(line))),
        },
        Err(err) => {
            if let Ok(h) = serde_json::from_str::<Header>(line) {
                if let Some(v) = &h.v {
                    if v.as_u64() != Some(u64::from(PROTOCOL_VERSION)) {
                        return Err(Error::protocol(
                            "v",
                            format!("unsupported protocol version {v}"),
                            truncate_payload(line),
                        ));
                    }
                }
                match h.kind.as_deref() {
                    Some(TYPE_ERROR) => {
                        return Err(Error::backend(format!(
                            "peer reported: {}",
                            h.message.unwrap_or_default()
                        )));
                    }
                    Some(k) if k != expected => {
                        return Err(Error::protocol(
                            "type",
                            format!("expected {expected:?}, got {k:?}"),
                            truncate_payload(line),
                        ));
                    }
                    _ => {}
                }
            }
            let mut field = resolve_path(err.path().to_string(), line);
            let inner = err.into_inner();
            let message = inner.to_string();
            // serde reports a missing field at the parent path
            if let Some(rest) = message.strip_prefix("missing field `") {
                if let Some(name) = rest.split('`').next() {
                    field = if field == "." || field.is_empty() {
                        name.to_string()
                    } else {
                        format!("{field}.{name}")
                    };
                }
            }
            if field == "." || field.is_empty() {
                field = "<line>".into();
            }
            Err(Error::protocol(field, message, truncate_payload(line)))
        }
    }
}

pub fn decode_asr_request(line: &str) -> Result<AsrRequest> {
    let w: AsrRequestWire = decode_strict(line, TYPE_ASR_REQUEST)?;
    check_envelope(w.v, &w.kind, TYPE_ASR_REQUEST, line)?;
    Ok(AsrRequest {
        stream_id: w.stream_id,
        window_start_s: w.window_start_s,
        window_end_s: w.window_end_s,
        beam_size: w.beam_size,
    })
}

pub fn decode_asr_response(line: &str) -> Result<AsrResponse> {
    let w: AsrResponseWire = decode_strict(line, TYPE_ASR_RESPONSE)?;
    check_envelope(w.v, &w.kind, TYPE_ASR_RESPONSE, line)?;
    for (i, word) in w.hypothesis.words.iter().enumerate() {
        if let Err(e) = word.validate() {
            return Err(Error::protocol(
                format!("hypothesis.words[{i}]"),
                e.to_string(),
                truncate_payload(line),
            ));
        }
    }
    Ok(AsrResponse {
        hypothesis: w.hypothesis,
        compute_cost_s: w.compute_cost_s,
    })
}

pub fn decode_mt_request(line: &str) -> Result<MtRequest> {
    let w: MtRequestWire = decode_strict(line, TYPE_MT_REQUEST)?;
    check_envelope(w.v, &w.kind, TYPE_MT_REQUEST, line)?;
    let bad = |field: String, msg: String| Error::protocol(field, msg, truncate_payload(line));
    if w.history_source.len() != w.history_target.len() {
        return Err(bad(
            "history_target".into(),
            format!(
                "{} target sentences for {} source sentences",
                w.history_target.len(),
                w.history_source.len()
            ),
        ));
    }
    if w.context_source != join_context(&w.history_source) {
        return Err(bad("context_source".into(), "does not match history_source".into()));
    }
    if w.context_target != join_context(&w.history_target) {
        return Err(bad("context_target".into(), "does not match history_target".into()));
    }
    let history_source: Vec<Vec<String>> = w.history_source.iter().map(|s| split_sentence(s)).collect();
    let history_target: Vec<Vec<String>> = w.history_target.iter().map(|s| split_sentence(s)).collect();
    for (name, sentences) in [("history_source", &history_source), ("history_target", &history_target)] {
        for (i, s) in sentences.iter().enumerate() {
            if s.iter().any(|t| t == SEP) {
                return Err(bad(format!("{name}[{i}]"), format!("contains reserved {SEP}")));
            }
        }
    }
    for (i, word) in w.active_source.iter().enumerate() {
        if let Err(e) = check_word(word) {
            return Err(bad(format!("active_source[{i}]"), e.to_string()));
        }
    }
    for (i, tok) in w.committed_target.iter().enumerate() {
        if tok.is_empty() || tok.chars().any(char::is_whitespace) || tok == SEP {
            return Err(bad(format!("committed_target[{i}]"), format!("invalid token {tok:?}")));
        }
    }
    Ok(MtRequest {
        stream_id: w.stream_id,
        history_source,
        history_target,
        active_source: w.active_source,
        committed_target: w.committed_target,
        beam_size: w.beam_size,
        attention_layer_tag: w.attention_layer_tag,
    })
}

pub fn decode_mt_response(line: &str) -> Result<MtResponse> {
    let w: MtResponseWire = decode_strict(line, TYPE_MT_RESPONSE)?;
    check_envelope(w.v, &w.kind, TYPE_MT_RESPONSE, line)?;
    Ok(MtResponse {
        beams: BeamSet {
            beams: w.beams,
            requested_size: w.requested_size,
        },
        compute_cost_s: w.compute_cost_s,
    })
}

/// A request as seen by a server.
#[derive(Debug, Clone, PartialEq)]
pub enum WireRequest {
    Asr(AsrRequest),
    Mt(MtRequest),
}

pub fn decode_request(line: &str) -> Result<WireRequest> {
    let kind = serde_json::from_str::<Header>(line.trim_end())
        .ok()
        .and_then(|h| h.kind);
    match kind.as_deref() {
        Some(TYPE_ASR_REQUEST) => decode_asr_request(line).map(WireRequest::Asr),
        Some(TYPE_MT_REQUEST) => decode_mt_request(line).map(WireRequest::Mt),
        Some(other) => Err(Error::protocol(
            "type",
            format!("not a request type: {other:?}"),
            truncate_payload(line),
        )),
        None => {
            // Let the strict decoder produce a located error.
            decode_asr_request(line).map(WireRequest::Asr)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TimedWord;

    fn asr_resp() -> AsrResponse {
        AsrResponse {
            hypothesis: AsrHypothesis {
                words: vec![
                    TimedWord::new("Hello", 0.0, 0.5).unwrap(),
                    TimedWord::new("world.", 0.6, 1.2).unwrap(),
                ],
                window_offset_s: 0.0,
            },
            compute_cost_s: 0.25,
        }
    }

    #[test]
    fn asr_response_roundtrip() {
        let line = encode_asr_response(&asr_resp());
        assert!(!line.contains('\n'));
        assert_eq!(decode_asr_response(&line).unwrap(), asr_resp());
        assert_eq!(decode_asr_response(&format!("{line}\n")).unwrap(), asr_resp());
    }

    #[test]
    fn truncated_line_names_field() {
        let line = encode_asr_response(&asr_resp());
        let cut = line.find("\"end_s\":1.2").unwrap() + 4;
        let err = decode_asr_response(&line[..cut]).unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::Protocol);
        assert_eq!(err.field(), Some("hypothesis.words[1].end_s"), "{err}");

        let cut = line.find("\"end_s\":1.2").unwrap() + 9;
        let err = decode_asr_response(&line[..cut]).unwrap_err();
        assert_eq!(err.field(), Some("hypothesis.words[1].end_s"), "{err}");
    }

    #[test]
    fn missing_and_mistyped_fields_are_named() {
        let err = decode_asr_response(
            r#"{"v":1,"type":"asr_response","hypothesis":{"window_offset_s":0.0,"words":[{"text":"a","start_s":0.0}]},"compute_cost_s":0.1}"#,
        )
        .unwrap_err();
        assert_eq!(err.field(), Some("hypothesis.words[0].end_s"));

        let err = decode_asr_response(
            r#"{"v":1,"type":"asr_response","hypothesis":{"window_offset_s":0.0,"words":[]},"compute_cost_s":"x"}"#,
        )
        .unwrap_err();
        assert_eq!(err.field(), Some("compute_cost_s"));

        let err = decode_asr_response(
            r#"{"v":1,"type":"asr_response","hypothesis":{"window_offset_s":0.0,"words":[{"text":"a b","start_s":0.0,"end_s":0.1}]},"compute_cost_s":0.1}"#,
        )
        .unwrap_err();
        assert_eq!(err.field(), Some("hypothesis.words[0]"));
    }

    #[test]
    fn envelope_errors() {
        let line = encode_asr_response(&asr_resp());
        let err = decode_asr_response(&line.replace("\"v\":1", "\"v\":2")).unwrap_err();
        assert_eq!(err.field(), Some("v"));
        let err = decode_mt_response(&line).unwrap_err();
        assert_eq!(err.field(), Some("type"));
        let err = decode_asr_response(&encode_error("model crashed")).unwrap_err();
        assert!(matches!(err, Error::Backend(ref m) if m.contains("model crashed")));
        let err = decode_asr_response(&format!("{line} trailing")).unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::Protocol);
        assert!(decode_asr_response("").is_err());
    }

    fn mt_req() -> MtRequest {
        let words = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
        MtRequest {
            stream_id: "talk-1".into(),
            history_source: vec![words("Hello world."), words("How are you?")],
            history_target: vec![words("Hallo Welt."), words("Wie geht es dir?")],
            active_source: words("I am"),
            committed_target: words("Ich"),
            beam_size: 10,
            attention_layer_tag: "6".into(),
        }
    }

    #[test]
    fn mt_request_roundtrip_and_context() {
        let line = encode_mt_request(&mt_req());
        assert!(line.contains(r#""context_source":"Hello world. [SEP] How are you?""#));
        assert_eq!(decode_mt_request(&line).unwrap(), mt_req());
        assert_eq!(decode_request(&line).unwrap(), WireRequest::Mt(mt_req()));
    }

    #[test]
    fn mt_request_validation() {
        let line = encode_mt_request(&mt_req());
        let err = decode_mt_request(&line.replace("[SEP] How are you?", "[SEP] Who are you?")).unwrap_err();
        assert_eq!(err.field(), Some("context_source"));
        let err = decode_mt_request(&line.replace(r#""active_source":["I","am"]"#, r#""active_source":["I","a m"]"#))
            .unwrap_err();
        assert_eq!(err.field(), Some("active_source[1]"));
    }

    #[test]
    fn request_dispatch() {
        let req = AsrRequest {
            stream_id: "s".into(),
            window_start_s: 1.5,
            window_end_s: 3.0,
            beam_size: 5,
        };
        let line = encode_asr_request(&req);
        assert_eq!(decode_request(&line).unwrap(), WireRequest::Asr(req));
        let err = decode_request(&encode_error("x")).unwrap_err();
        assert_eq!(err.field(), Some("type"));
        assert!(decode_request("{not json").is_err());
    }
}
