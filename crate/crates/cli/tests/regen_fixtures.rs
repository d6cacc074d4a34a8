//! Rebuilds the checked-in fixtures under `tests/fixtures`.
//!
//! Run with `cargo test -p simulst-cli --test regen_fixtures -- --ignored`,
//! then review the diff before committing it.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use simulst_core::backends::mock::{MockAsr, MockMt};
use simulst_core::backends::{wire, AsrBackend, AsrRequest, AsrResponse, MtBackend, MtRequest, MtResponse};
use simulst_core::metrics::ReferenceSegment;
use simulst_core::pipeline::{Pipeline, PipelineConfig, Preset};
use simulst_core::{jsonl, Result};
use simulst_testkit::gen;

const SEED: u64 = 20240607;
const TOTAL_S: f64 = 60.0;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

type Tape = Arc<Mutex<Vec<String>>>;

struct RecAsr(MockAsr, Tape);
struct RecMt(MockMt, Tape);

impl AsrBackend for RecAsr {
    fn decode(&mut self, req: &AsrRequest) -> Result<AsrResponse> {
        let resp = self.0.decode(req)?;
        let mut t = self.1.lock().unwrap();
        t.push(wire::encode_asr_request(req));
        t.push(wire::encode_asr_response(&resp));
        Ok(resp)
    }
}

impl MtBackend for RecMt {
    fn translate(&mut self, req: &MtRequest) -> Result<MtResponse> {
        let resp = self.0.translate(req)?;
        let mut t = self.1.lock().unwrap();
        t.push(wire::encode_mt_request(req));
        t.push(wire::encode_mt_response(&resp));
        Ok(resp)
    }
}

fn write_lines(path: &Path, lines: &[String]) {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).unwrap();
}

fn mutate(line: &str, f: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(line).unwrap();
    f(&mut v);
    serde_json::to_string(&v).unwrap()
}

#[test]
#[ignore]
fn regenerate() {
    let dir = fixtures();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    // Grow the document until it fills roughly a minute of audio.
    let mut doc = Vec::new();
    let words = loop {
        doc.push(gen::sentence(&mut rng, 3, 12));
        let words = gen::timed_words(&mut ChaCha8Rng::seed_from_u64(SEED ^ 0xA5), &doc);
        if words.last().unwrap().end_s > TOTAL_S - 4.0 {
            doc.pop();
            break gen::timed_words(&mut ChaCha8Rng::seed_from_u64(SEED ^ 0xA5), &doc);
        }
    };
    let tail = TOTAL_S - words.last().unwrap().end_s;
    let noise = gen::Noise {
        stabilization_delay_s: 0.8,
        perturb_rate: 0.5,
        disagreement_rate: 0.3,
        empty_beam_rate: 0.1,
        attention_blur: 0.2,
    };
    let script = gen::mock_script(SEED, words.clone(), tail, noise);
    std::fs::write(dir.join("script.json"), script.to_json_pretty()).unwrap();

    let trace = gen::trace(&mut rng, TOTAL_S, 0.3, 1.5);
    jsonl::write(&dir.join("trace.jsonl"), &trace).unwrap();

    let config = json!({
        "preset": "adapted",
        "seed": SEED,
        "stream_id": "golden",
        "backends": {
            "asr": { "kind": "mock", "script": "script.json" },
            "mt": { "kind": "mock", "script": "script.json" }
        }
    });
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config).unwrap() + "\n").unwrap();

    // References: the mock's offline translation of each ground-truth sentence.
    let mt = MockMt::new(script.mt.clone().unwrap(), SEED).unwrap();
    let mut refs = Vec::new();
    let mut at = 0;
    for s in &doc {
        let span = &words[at..at + s.len()];
        at += s.len();
        let mut tokens = mt.offline_translation(s);
        tokens.retain(|t| !simulst_core::types::is_sep(t));
        refs.push(ReferenceSegment {
            tokens,
            source_start_s: span[0].start_s,
            source_end_s: span[span.len() - 1].end_s,
        });
    }
    jsonl::write(&dir.join("refs.jsonl"), &refs).unwrap();

    let cfg = PipelineConfig::load(&dir.join("config.json")).unwrap();
    assert_eq!(cfg.mt.history_remove, Preset::Adapted.history_remove());
    let (log, _) = Pipeline::from_config(&cfg).unwrap().run(&trace).unwrap();
    jsonl::write(&dir.join("golden_log.jsonl"), &log).unwrap();

    // Wire traffic of the same run, trimmed to a representative sample.
    let (asr_tape, mt_tape) = (Tape::default(), Tape::default());
    let mut p = Pipeline::new(
        &cfg,
        Box::new(RecAsr(MockAsr::new(script.asr.clone().unwrap(), SEED).unwrap(), asr_tape.clone())),
        Box::new(RecMt(MockMt::new(script.mt.clone().unwrap(), SEED).unwrap(), mt_tape.clone())),
    )
    .unwrap();
    for ev in &trace {
        p.feed(ev).unwrap();
    }
    p.finish().unwrap();
    assert_eq!(p.log(), &log[..]);
    let asr_tape = asr_tape.lock().unwrap().clone();
    let mt_tape = mt_tape.lock().unwrap().clone();
    let mut golden: Vec<String> = asr_tape[..8].to_vec();
    golden.extend_from_slice(&mt_tape[..6]);
    let with_history = mt_tape
        .chunks(2)
        .skip(3)
        .find(|pair| !wire::decode_mt_request(&pair[0]).unwrap().history_source.is_empty())
        .expect("some request carries history");
    golden.extend_from_slice(with_history);
    golden.push(wire::encode_error("model overloaded"));
    write_lines(&dir.join("wire/golden.jsonl"), &golden);

    // Malformed responses, each paired with the field its error must name.
    let asr = &asr_tape[1];
    let mtr = &mt_tape[1];
    let cases: Vec<(&str, &str, String)> = vec![
        ("asr", "compute_cost_s", mutate(asr, |v| drop(v.as_object_mut().unwrap().remove("compute_cost_s")))),
        ("asr", "v", mutate(asr, |v| v["v"] = json!(2))),
        ("asr", "type", mutate(asr, |v| v["type"] = json!("mt_response"))),
        ("asr", "hypothesis.words[0].end_s", mutate(asr, |v| v["hypothesis"]["words"][0]["end_s"] = json!("late"))),
        ("asr", "hypothesis.words[0]", mutate(asr, |v| v["hypothesis"]["words"][0]["text"] = json!("two words"))),
        ("asr", "extra", mutate(asr, |v| v["extra"] = json!(true))),
        ("mt", "beams", mutate(mtr, |v| v["beams"] = json!({}))),
        ("mt", "beams[0].score", mutate(mtr, |v| v["beams"][0]["score"] = json!(null))),
        ("mt", "requested_size", mutate(mtr, |v| v["requested_size"] = json!(-1))),
        ("mt", "beams[0].attention", mutate(mtr, |v| drop(v["beams"][0]["attention"].as_array_mut().unwrap().pop()))),
        ("mt", "compute_cost_s", mutate(mtr, |v| v["compute_cost_s"] = json!(-0.5))),
    ];
    let lines: Vec<String> = cases
        .into_iter()
        .map(|(backend, field, line)| serde_json::to_string(&json!({"backend": backend, "field": field, "line": line})).unwrap())
        .collect();
    write_lines(&dir.join("wire/malformed.jsonl"), &lines);
}
