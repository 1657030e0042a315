// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};
use std::thread;

use cgaps_core::export::{export_report, ReportFormat, StructuredReport};
use cgaps_core::ingest::{write_dictionary, write_record_file, RecordFileHeader};
use cgaps_core::{ActivationRecord, AnalysisConfig, Concept, ConceptDictionary, ConceptId, Provenance, SparseActivations};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cgaps() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cgaps"))
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn cgaps");
    assert!(
        out.status.success(),
        "cgaps failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: &Path) -> serde_json::Value {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_slice(&bytes).unwrap()
}

pub fn synth(dir: &Path, extra: &[&str]) {
    let mut cmd = cgaps();
    cmd.arg("synth").arg("--out-dir").arg(dir).args(extra);
    run_ok(&mut cmd);
}

pub fn run_analyze(manifest: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut cmd = cgaps();
    cmd.arg("analyze").arg("--manifest").arg(manifest).arg("--out-dir").arg(out).args(extra);
    cmd.output().unwrap()
}

// ---- committed fixture ----

pub const FIXTURE_BENCHMARKS: [&str; 4] = ["arith", "code", "law", "trivia"];
pub const FIXTURE_CONCEPTS: ConceptId = 32;
pub const FIXTURE_RECORDS: usize = 16;
pub const FIXTURE_MISSING: [ConceptId; 2] = [5, 17];
pub const FIXTURE_ZERO_SCORE: ConceptId = 9;
pub const FIXTURE_CREATED_AT: &str = "2026-01-01T00:00:00Z";
const FILLER: ConceptId = FIXTURE_CONCEPTS - 1;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dyadic")
}

pub fn golden_dir() -> PathBuf {
    fixture_dir().join("golden")
}

/// Which benchmarks activate concept `c`: all four, a pair, or one.
fn active(c: ConceptId, b: usize) -> bool {
    match c % 3 {
        0 => true,
        1 => (b < 2) == (c % 2 == 0),
        _ => b == c as usize % 4,
    }
}

/// A small suite whose every intermediate value is a dyadic rational, so any
/// summation order gives the same bits and the oracle's output can serve as
/// a byte-exact golden. Token counts are powers of two, every record
/// activating a concept within one benchmark has the same normalized
/// activation 2^-j, activation counts per concept are 1, 2 or 4, scores are
/// 0 or 1, each benchmark's total is 32 * 2^k, and concepts are defined in
/// 1, 2 or 4 benchmarks.
pub fn dyadic_fixture() -> (ConceptDictionary, Vec<ActivationRecord>) {
    let concepts = (0..FIXTURE_CONCEPTS)
        .map(|id| Concept {
            id,
            label: format!("fixture concept {id}"),
        })
        .collect();
    let dict = ConceptDictionary::new("fixture-sae", "fixture-model", concepts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let mut records = Vec::new();
    for (b, name) in FIXTURE_BENCHMARKS.iter().enumerate() {
        let mut bench: Vec<ActivationRecord> = (0..FIXTURE_RECORDS)
            .map(|r| ActivationRecord {
                benchmark: name.to_string(),
                datapoint_id: format!("q{r:02}"),
                token_count: 1 << rng.random_range(2..=5u32),
                score: Some(if r % 2 == 0 { 0.0 } else { 1.0 }),
                provenance: Provenance::PromptOnly,
                activations: SparseActivations::new(),
            })
            .collect();
        let mut pairs: Vec<Vec<(ConceptId, f64)>> = vec![Vec::new(); FIXTURE_RECORDS];
        let mut total = 0.0;
        for c in 0..FILLER {
            if FIXTURE_MISSING.contains(&c) || !active(c, b) {
                continue;
            }
            let n = [1usize, 2, 4][rng.random_range(0..3)];
            let x = 0.5f64.powi(rng.random_range(0..4));
            let pool: Vec<usize> = (0..FIXTURE_RECORDS)
                .filter(|&r| c != FIXTURE_ZERO_SCORE || r % 2 == 0)
                .collect();
            for &r in pool.choose_multiple(&mut rng, n) {
                pairs[r].push((c, x * bench[r].token_count as f64));
            }
            total += n as f64 * x;
        }
        let mut target = 32.0;
        while target <= total {
            target *= 2.0;
        }
        let r = rng.random_range(0..FIXTURE_RECORDS);
        pairs[r].push((FILLER, (target - total) * bench[r].token_count as f64));
        for (record, p) in bench.iter_mut().zip(pairs) {
            record.activations = SparseActivations::from_pairs(p);
        }
        records.extend(bench);
    }
    (dict, records)
}

/// Writes the fixture as a suite directory (dictionary, records, suite.json).
pub fn write_fixture(dir: &Path) {
    let (dict, records) = dyadic_fixture();
    std::fs::create_dir_all(dir.join("records")).unwrap();
    write_dictionary(&dir.join("dictionary.json"), &dict).unwrap();
    let header = RecordFileHeader::new(&dict, FIXTURE_CREATED_AT);
    let mut benchmarks = serde_json::Map::new();
    for name in FIXTURE_BENCHMARKS {
        let file = format!("records/{name}.cgr");
        let subset = records.iter().filter(|r| r.benchmark == name);
        write_record_file(&dir.join(&file), &header, subset).unwrap();
        benchmarks.insert(name.to_string(), file.into());
    }
    let manifest = serde_json::json!({ "dictionary": "dictionary.json", "benchmarks": benchmarks });
    let mut text = serde_json::to_string_pretty(&manifest).unwrap();
    text.push('\n');
    std::fs::write(dir.join("suite.json"), text).unwrap();
}

/// Golden reports computed by the brute-force oracle and serialized with the
/// report writers.
pub fn write_oracle_goldens(dir: &Path) {
    let (dict, records) = dyadic_fixture();
    let result = cgaps_oracle::analyze(&dict, &records, &AnalysisConfig::default());
    let report = StructuredReport::new(&dict, result, FIXTURE_CREATED_AT).unwrap();
    std::fs::create_dir_all(dir).unwrap();
    for format in [ReportFormat::Structured, ReportFormat::Tabular] {
        export_report(dir, &report, format).unwrap();
    }
}

/// Every file under `dir`, relative, sorted.
pub fn tree(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

pub fn same_tree(a: &Path, b: &Path) -> Result<(), String> {
    let (ta, tb) = (tree(a), tree(b));
    if ta != tb {
        return Err(format!("file lists differ: {ta:?} vs {tb:?}"));
    }
    for rel in ta {
        if std::fs::read(a.join(&rel)).unwrap() != std::fs::read(b.join(&rel)).unwrap() {
            return Err(format!("{} differs", rel.display()));
        }
    }
    Ok(())
}

// ---- mock chat-completion service ----

/// Ids in the "(id) label" lines of a prompt.
pub fn prompt_ids(prompt: &str) -> Vec<ConceptId> {
    prompt
        .lines()
        .filter_map(|l| l.strip_prefix('(')?.split_once(')')?.0.parse().ok())
        .collect()
}

type Reply = dyn Fn(&str) -> Option<String> + Send + Sync;

pub struct MockService {
    pub addr: SocketAddr,
    pub prompts: Arc<Mutex<Vec<String>>>,
}

impl MockService {
    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }
}

fn handle(mut stream: TcpStream, reply: &Reply, prompts: &Mutex<Vec<String>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).unwrap();
    let request: serde_json::Value = serde_json::from_slice(&body).unwrap();
    let prompt = request["messages"][0]["content"].as_str().unwrap_or("").to_string();
    prompts.lock().unwrap().push(prompt.clone());
    let payload = match reply(&prompt) {
        Some(text) => serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] }).to_string(),
        None => "this is not a chat completion".to_string(),
    };
    let response = format!(
        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = stream.write_all(response.as_bytes());
}

/// Serves chat completions on loopback. `reply` maps the prompt to the
/// reply text; `None` answers with a body that is not chat-shaped.
pub fn mock_service(reply: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> MockService {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let prompts = Arc::new(Mutex::new(Vec::new()));
    let seen = prompts.clone();
    let reply: Arc<Reply> = Arc::new(reply);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let (reply, seen) = (reply.clone(), seen.clone());
            thread::spawn(move || handle(stream, &*reply, &seen));
        }
    });
    MockService { addr, prompts }
}

/// Raw HTTP/1.1 GET; returns status and body.
pub fn http_get(addr: SocketAddr, path: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "GET {path} HTTP/1.1\r\nhost: {addr}\r\nconnection: close\r\n\r\n").unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    (status, body.to_string())
}
