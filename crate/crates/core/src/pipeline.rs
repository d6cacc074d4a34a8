//! End-to-end driver: replays an audio-arrival trace through the ASR and MT
//! controllers and collects the emission log.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::asr_stream::{AsrStream, AsrStreamConfig};
use crate::backends::mock::{MockAsr, MockMt, MockScript};
use crate::backends::transport::{LineClient, WireAsrBackend, WireMtBackend};
use crate::backends::{AsrBackend, MtBackend};
use crate::clock::{ClockSource, VirtualClock};
use crate::error::{Error, Result};
use crate::mt_stream::{HistoryRemove, MtStream, MtStreamConfig};
use crate::types::{EmissionRecord, TimedWord};

/// Inference presets: the adapted system evicts whole sentence pairs, the
/// baseline drops 20 words per side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Adapted,
    Baseline,
}

impl Preset {
    pub fn history_remove(self) -> HistoryRemove {
        match self {
            Preset::Adapted => HistoryRemove::OldestSentencePair,
            Preset::Baseline => HistoryRemove::WordCount(20),
        }
    }

    pub fn mt_config(self) -> MtStreamConfig {
        MtStreamConfig {
            history_remove: self.history_remove(),
            ..MtStreamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// In-process mock; relative paths resolve against the config file.
    Mock { script: PathBuf },
    /// Child process speaking the line protocol on stdin/stdout.
    Process {
        command: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_s: Option<u64>,
    },
    /// TCP peer speaking the line protocol.
    Tcp {
        addr: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_s: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsConfig {
    pub asr: BackendSpec,
    pub mt: BackendSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Preset,
    /// Overrides the mock scripts' own seeds when set.
    pub seed: Option<u64>,
    pub asr: AsrStreamConfig,
    pub mt: MtStreamConfig,
    pub clock: ClockSource,
    pub stream_id: String,
    pub backends: Option<BackendsConfig>,
}

impl PipelineConfig {
    pub fn preset(mode: Preset) -> Self {
        PipelineConfig {
            mode,
            seed: None,
            asr: AsrStreamConfig::default(),
            mt: mode.mt_config(),
            clock: ClockSource::Virtual,
            stream_id: "stream-0".into(),
            backends: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.asr.validate()?;
        self.mt.validate()?;
        if self.mt.history_remove != self.mode.history_remove() {
            return Err(Error::invalid(format!(
                "mode {:?} requires history removal {:?}",
                self.mode,
                self.mode.history_remove()
            )));
        }
        Ok(())
    }

    /// Parses a config document: a `preset` name plus partial overrides of
    /// `asr`, `mt` and `matcher`. `table3` is accepted as a legacy spelling of
    /// `preset`. Relative mock script paths resolve against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let parse_err = |path: String, message: String, line: usize| Error::Parse {
            source_name: "pipeline config".into(),
            line,
            field: (!path.is_empty() && path != ".").then_some(path),
            message,
        };
        let raw: Value = serde_json::from_str(text)
            .map_err(|e| parse_err(String::new(), e.to_string(), e.line()))?;
        let Value::Object(mut raw) = raw else {
            return Err(parse_err(String::new(), "config must be a JSON object".into(), 1));
        };
        const KEYS: &[&str] = &["preset", "table3", "seed", "asr", "mt", "matcher", "clock", "stream_id", "backends"];
        if let Some(k) = raw.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(parse_err(k.clone(), format!("unknown field `{k}`"), 0));
        }

        fn field<T: serde::de::DeserializeOwned>(value: Value, name: &str) -> Result<T> {
            serde_path_to_error::deserialize(value).map_err(|e| {
                let path = e.path().to_string();
                Error::Parse {
                    source_name: "pipeline config".into(),
                    line: 0,
                    field: Some(if path == "." { name.to_string() } else { format!("{name}.{path}") }),
                    message: e.into_inner().to_string(),
                }
            })
        }

        if raw.contains_key("preset") && raw.contains_key("table3") {
            return Err(parse_err("table3".into(), "give either `preset` or `table3`, not both".into(), 0));
        }
        let mode: Preset = match (raw.remove("preset"), raw.remove("table3")) {
            (Some(v), _) => field(v, "preset")?,
            (None, Some(v)) => field(v, "table3")?,
            (None, None) => Preset::Adapted,
        };
        let mut cfg = PipelineConfig::preset(mode);
        if let Some(v) = raw.remove("seed") {
            cfg.seed = field(v, "seed")?;
        }
        let mut asr = serde_json::to_value(cfg.asr).expect("config serializes");
        if let Some(v) = raw.remove("asr") {
            merge(&mut asr, v);
        }
        if let Some(v) = raw.remove("matcher") {
            merge(&mut asr["matcher"], v);
        }
        cfg.asr = field(asr, "asr")?;
        let mut mt = serde_json::to_value(&cfg.mt).expect("config serializes");
        if let Some(v) = raw.remove("mt") {
            merge(&mut mt, v);
        }
        cfg.mt = field(mt, "mt")?;
        if let Some(v) = raw.remove("clock") {
            cfg.clock = field(v, "clock")?;
        }
        if let Some(v) = raw.remove("stream_id") {
            cfg.stream_id = field(v, "stream_id")?;
        }
        if let Some(v) = raw.remove("backends") {
            let mut b: BackendsConfig = field(v, "backends")?;
            for spec in [&mut b.asr, &mut b.mt] {
                if let BackendSpec::Mock { script } = spec {
                    if script.is_relative() {
                        *script = base_dir.join(&*script);
                    }
                }
            }
            cfg.backends = Some(b);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
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
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn client(spec: &BackendSpec) -> Result<Option<LineClient>> {
    let with_timeout = |c: LineClient, t: &Option<u64>| match t {
        Some(s) => c.with_timeout(Duration::from_secs(*s)),
        None => c,
    };
    Ok(match spec {
        BackendSpec::Mock { .. } => None,
        BackendSpec::Process { command, timeout_s } => {
            let (program, args) = command
                .split_first()
                .ok_or_else(|| Error::invalid("process backend command is empty"))?;
            Some(with_timeout(LineClient::spawn(program, args)?, timeout_s))
        }
        BackendSpec::Tcp { addr, timeout_s } => {
            Some(with_timeout(LineClient::connect(addr.as_str())?, timeout_s))
        }
    })
}

fn mock_script(path: &Path, seed: Option<u64>) -> Result<MockScript> {
    let mut script = MockScript::from_file(path)?;
    if let Some(seed) = seed {
        script.seed = seed;
    }
    Ok(script)
}

pub fn build_asr_backend(spec: &BackendSpec, seed: Option<u64>) -> Result<Box<dyn AsrBackend>> {
    if let BackendSpec::Mock { script } = spec {
        let s = mock_script(script, seed)?;
        let asr = s
            .asr
            .ok_or_else(|| Error::invalid(format!("{} has no asr section", script.display())))?;
        return Ok(Box::new(MockAsr::new(asr, s.seed)?));
    }
    Ok(Box::new(WireAsrBackend::new(client(spec)?.expect("wire spec"))))
}

pub fn build_mt_backend(spec: &BackendSpec, seed: Option<u64>) -> Result<Box<dyn MtBackend>> {
    if let BackendSpec::Mock { script } = spec {
        let s = mock_script(script, seed)?;
        let mt = s
            .mt
            .ok_or_else(|| Error::invalid(format!("{} has no mt section", script.display())))?;
        return Ok(Box::new(MockMt::new(mt, s.seed)?));
    }
    Ok(Box::new(WireMtBackend::new(client(spec)?.expect("wire spec"))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Audio,
}

/// `dur` seconds of audio become available at wall time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub t: f64,
    pub kind: EventKind,
    pub dur: f64,
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceEvent>> {
    crate::jsonl::read(path)
}

/// Uniform arrivals: `total_s` of audio in `chunk_s` pieces, each arriving
/// when it ends.
pub fn uniform_trace(total_s: f64, chunk_s: f64) -> Vec<TraceEvent> {
    let mut out = Vec::new();
    let mut at = 0.0;
    while at + 1e-9 < total_s {
        let dur = chunk_s.min(total_s - at);
        at += dur;
        out.push(TraceEvent {
            t: at,
            kind: EventKind::Audio,
            dur,
        });
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub events: usize,
    pub audio_s: f64,
    pub final_time_s: f64,
    pub words_committed: usize,
    pub tokens_emitted: usize,
    pub segments_closed: usize,
    pub evictions: usize,
    pub backend_calls: usize,
    pub asr_decodes: usize,
    pub mt_calls: usize,
    pub sentence_trims: usize,
    pub forced_trims: usize,
    pub max_asr_window_s: f64,
    pub max_buffered_source_words: usize,
    pub mt_overflow_steps: usize,
}

/// What one event (or the end of stream) produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub committed_words: Vec<TimedWord>,
    pub emissions: Vec<EmissionRecord>,
}

pub struct Pipeline<'a> {
    pub asr: AsrStream,
    pub mt: MtStream,
    pub clock: VirtualClock,
    asr_backend: Box<dyn AsrBackend + 'a>,
    mt_backend: Box<dyn MtBackend + 'a>,
    log: Vec<EmissionRecord>,
    summary: RunSummary,
    last_t: f64,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        cfg: &PipelineConfig,
        asr_backend: Box<dyn AsrBackend + 'a>,
        mt_backend: Box<dyn MtBackend + 'a>,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Pipeline {
            asr: AsrStream::new(cfg.asr)?
                .with_stream_id(cfg.stream_id.clone())
                .with_clock_source(cfg.clock),
            mt: MtStream::new(cfg.mt.clone())?
                .with_stream_id(cfg.stream_id.clone())
                .with_clock_source(cfg.clock),
            clock: VirtualClock::new(),
            asr_backend,
            mt_backend,
            log: Vec::new(),
            summary: RunSummary::default(),
            last_t: 0.0,
        })
    }

    /// Builds the backends named in the config.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Pipeline<'static>> {
        let b = cfg
            .backends
            .as_ref()
            .ok_or_else(|| Error::invalid("config has no backends section"))?;
        Pipeline::new(
            cfg,
            build_asr_backend(&b.asr, cfg.seed)?,
            build_mt_backend(&b.mt, cfg.seed)?,
        )
    }

    pub fn log(&self) -> &[EmissionRecord] {
        &self.log
    }

    fn observe(&mut self, report: &StepReport) {
        let s = &mut self.summary;
        s.words_committed += report.committed_words.len();
        s.tokens_emitted += report.emissions.len();
        s.max_asr_window_s = s
            .max_asr_window_s
            .max(self.clock.audio_available_s - self.asr.state().window_start_s);
        s.max_buffered_source_words = s
            .max_buffered_source_words
            .max(self.mt.history().buffered_source_words());
        self.log.extend(report.emissions.iter().cloned());
    }

    fn forward(&mut self, words: &[TimedWord]) -> Result<Vec<EmissionRecord>> {
        let texts: Vec<&str> = words.iter().map(|w| w.text.as_str()).collect();
        Ok(self
            .mt
            .step(&texts, &mut self.clock, &mut self.mt_backend)?
            .emissions)
    }

    pub fn feed(&mut self, ev: &TraceEvent) -> Result<StepReport> {
        if !ev.t.is_finite() || ev.t < self.last_t {
            return Err(Error::invalid(format!(
                "trace time {} goes backwards from {}",
                ev.t, self.last_t
            )));
        }
        self.last_t = ev.t;
        self.clock.advance_audio(ev.dur)?;
        self.clock.wait_until(ev.t)?;
        self.summary.events += 1;
        let committed_words = self.asr.step(&mut self.clock, &mut self.asr_backend)?;
        let emissions = self.forward(&committed_words)?;
        let report = StepReport {
            committed_words,
            emissions,
        };
        self.observe(&report);
        Ok(report)
    }

    /// End of stream: flushes both controllers.
    pub fn finish(&mut self) -> Result<StepReport> {
        let committed_words = self.asr.finish(&mut self.clock, &mut self.asr_backend)?;
        let mut emissions = self.forward(&committed_words)?;
        emissions.extend(
            self.mt
                .finish(&mut self.clock, &mut self.mt_backend)?
                .emissions,
        );
        let report = StepReport {
            committed_words,
            emissions,
        };
        self.observe(&report);
        Ok(report)
    }

    pub fn summary(&self) -> RunSummary {
        let asr = self.asr.counters();
        let mt = self.mt.counters();
        RunSummary {
            audio_s: self.clock.audio_available_s,
            final_time_s: self.clock.now_s,
            segments_closed: mt.segments_closed,
            evictions: mt.evictions,
            asr_decodes: asr.decodes,
            mt_calls: mt.backend_calls,
            backend_calls: asr.decodes + mt.backend_calls,
            sentence_trims: asr.sentence_trims,
            forced_trims: asr.forced_trims,
            mt_overflow_steps: mt.overflow_steps,
            ..self.summary.clone()
        }
    }

    /// Feeds every event, then finishes.
    pub fn run(mut self, trace: &[TraceEvent]) -> Result<(Vec<EmissionRecord>, RunSummary)> {
        for ev in trace {
            self.feed(ev)?;
        }
        self.finish()?;
        let summary = self.summary();
        Ok((self.log, summary))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::mock::{AsrScript, Fallback, MtScript};

    fn script() -> MockScript {
        let text = "Hello there. How are you today? I am fine thanks.";
        let words = text
            .split_whitespace()
            .enumerate()
            .map(|(i, w)| TimedWord::new(w, i as f64 * 0.5, i as f64 * 0.5 + 0.4).unwrap())
            .collect();
        MockScript {
            seed: 3,
            asr: Some(AsrScript {
                words,
                duration_s: Some(6.0),
                stabilization_delay_s: 0.0,
                perturb_rate: 1.0,
                cost_base_s: 0.1,
                cost_per_s: 0.01,
            }),
            mt: Some(MtScript {
                fallback: Fallback::Uppercase,
                ..MtScript::default()
            }),
        }
    }

    fn run(s: &MockScript) -> (Vec<EmissionRecord>, RunSummary) {
        let cfg = PipelineConfig::preset(Preset::Adapted);
        let asr = MockAsr::new(s.asr.clone().unwrap(), s.seed).unwrap();
        let mt = MockMt::new(s.mt.clone().unwrap(), s.seed).unwrap();
        Pipeline::new(&cfg, Box::new(asr), Box::new(mt))
            .unwrap()
            .run(&uniform_trace(6.0, 0.5))
            .unwrap()
    }

    #[test]
    fn stable_mocks_translate_everything() {
        let s = script();
        let (log, summary) = run(&s);
        let plain: Vec<&str> = log.iter().filter(|r| !r.is_sep()).map(|r| r.token.as_str()).collect();
        assert_eq!(
            plain.join(" "),
            "HELLO THERE. HOW ARE YOU TODAY? I AM FINE THANKS."
        );
        assert_eq!(summary.segments_closed, 3);
        assert_eq!(summary.words_committed, 10);
        assert_eq!(summary.tokens_emitted, log.len());
        crate::types::check_emission_log(&log).unwrap();
        assert!(log.iter().all(|r| r.ca_time_s > r.nca_time_s));
        assert_eq!(run(&s), (log, summary));
    }

    #[test]
    fn empty_trace() {
        let s = script();
        let cfg = PipelineConfig::preset(Preset::Baseline);
        let asr = MockAsr::new(s.asr.clone().unwrap(), 0).unwrap();
        let mt = MockMt::new(s.mt.clone().unwrap(), 0).unwrap();
        let (log, summary) = Pipeline::new(&cfg, Box::new(asr), Box::new(mt))
            .unwrap()
            .run(&[])
            .unwrap();
        assert!(log.is_empty());
        assert_eq!(summary, RunSummary::default());
    }

    #[test]
    fn preset_key_spellings() {
        let base = Path::new("/cfg");
        let a = PipelineConfig::parse(r#"{"preset":"baseline"}"#, base).unwrap();
        let b = PipelineConfig::parse(r#"{"table3":"baseline"}"#, base).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, PipelineConfig::preset(Preset::Baseline));
        let err = PipelineConfig::parse(r#"{"preset":"adapted","table3":"adapted"}"#, base).unwrap_err();
        assert_eq!(err.field(), Some("table3"));
        let err = PipelineConfig::parse(r#"{"preset":"fast"}"#, base).unwrap_err();
        assert_eq!(err.field(), Some("preset"));
    }

    #[test]
    fn config_presets_and_overrides() {
        let base = Path::new("/cfg");
        let c = PipelineConfig::parse("{}", base).unwrap();
        assert_eq!(c, PipelineConfig::preset(Preset::Adapted));
        assert_eq!(c.mt.max_buffer_words, 80);
        assert_eq!(c.mt.attention_layer_tag, "6");
        assert_eq!(c.asr.backend_beam, 5);
        let c = PipelineConfig::parse(
            r#"{"preset":"baseline","mt":{"ralcp":{"lambda":0.6}},"matcher":{"levenshtein_threshold":1},
                "backends":{"asr":{"kind":"mock","script":"m.json"},"mt":{"kind":"tcp","addr":"127.0.0.1:1"}}}"#,
            base,
        )
        .unwrap();
        assert_eq!(c.mt.history_remove, HistoryRemove::WordCount(20));
        assert_eq!(c.mt.ralcp.lambda, 0.6);
        assert_eq!(c.mt.ralcp.beam_size, 10);
        assert_eq!(c.asr.matcher.levenshtein_threshold, 1);
        assert!(c.asr.matcher.lowercase);
        assert_eq!(
            c.backends.unwrap().asr,
            BackendSpec::Mock {
                script: PathBuf::from("/cfg/m.json")
            }
        );
    }

    #[test]
    fn config_errors_name_fields() {
        let base = Path::new(".");
        let err = PipelineConfig::parse(r#"{"mt":{"ralcp":{"lamda":0.6}}}"#, base).unwrap_err();
        assert_eq!(err.field(), Some("mt.ralcp.lamda"), "{err}");
        let err = PipelineConfig::parse(r#"{"asr":{"min_chunk_s":"1"}}"#, base).unwrap_err();
        assert_eq!(err.field(), Some("asr.min_chunk_s"));
        let err = PipelineConfig::parse(r#"{"bogus":1}"#, base).unwrap_err();
        assert_eq!(err.field(), Some("bogus"));
        let err = PipelineConfig::parse(r#"{"mt":{"history_remove":{"word_count":20}}}"#, base)
            .unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::InvalidArgument);
        let err = PipelineConfig::parse(r#"{"mt":{"ralcp":{"lambda":0}}}"#, base).unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::InvalidArgument);
    }

    #[test]
    fn backwards_time_rejected() {
        let s = script();
        let cfg = PipelineConfig::preset(Preset::Adapted);
        let asr = MockAsr::new(s.asr.clone().unwrap(), 0).unwrap();
        let mt = MockMt::new(s.mt.clone().unwrap(), 0).unwrap();
        let mut p = Pipeline::new(&cfg, Box::new(asr), Box::new(mt)).unwrap();
        let ev = |t| TraceEvent {
            t,
            kind: EventKind::Audio,
            dur: 0.5,
        };
        p.feed(&ev(1.0)).unwrap();
        assert!(p.feed(&ev(0.5)).is_err());
    }
}
