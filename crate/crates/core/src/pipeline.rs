//! Run-directory stages: keygen, campaign, correction, aggregation,
//! estimation and reporting, each reading and writing fixed artifact names.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correction::{
    batch_correct, recovered_records, summarize, BatchEntry, BatchSummary, CorrectionOptions, RecoveredRecord,
};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorInput, SecurityEstimate, BASELINE_ZETA};
use crate::fault::{read_jsonl, run_campaign, write_jsonl, CampaignConfig, FaultEvent};
use crate::knowledge::{
    classify, export_bitmap, ingest, ingest_lenient, reduced_params, BitObservation, Encoding, GroupCounts,
    KnowledgeMap, ReducedParams,
};
use crate::packing::{pack_public_key, pack_secret_key, unpack_public_key};
use crate::params::{ParameterSet, Revision};
use crate::scheme::{keygen, PublicKey};

pub const PK: &str = "pk.bin";
pub const SK: &str = "sk.bin";
pub const FAULTS: &str = "faults.jsonl";
pub const CORRECTIONS: &str = "corrections.jsonl";
pub const RECOVERED: &str = "recovered.jsonl";
pub const CORRECTION_SUMMARY: &str = "correction.json";
pub const BITMAP: &str = "bitmap.csv";
pub const GROUPS: &str = "groups.json";
pub const ESTIMATE: &str = "estimate.json";
pub const REPORT: &str = "report.json";
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scheme {
    pub level: u8,
    pub revision: Revision,
}

impl Scheme {
    pub fn params(&self) -> Result<ParameterSet> {
        ParameterSet::for_level(self.level, self.revision)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Artifact name to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
    pub settings: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub scheme: Option<Scheme>,
    pub seeds: BTreeMap<String, String>,
    pub config: Option<serde_json::Value>,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            scheme: None,
            seeds: BTreeMap::new(),
            config: None,
            stages: BTreeMap::new(),
        }
    }
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(Self::default());
        }
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST), self)
    }

    /// Record `files` (relative to `dir`) with their digests under `stage`.
    pub fn record(&mut self, dir: &Path, stage: &str, files: &[&str], settings: serde_json::Value) -> Result<()> {
        let mut artifacts = BTreeMap::new();
        for f in files {
            artifacts.insert(f.to_string(), sha256_file(&dir.join(f))?);
        }
        self.stages.insert(stage.into(), StageRecord { artifacts, settings });
        Ok(())
    }

    pub fn scheme(&self) -> Result<Scheme> {
        self.scheme
            .ok_or_else(|| Error::InvalidParameter("manifest has no scheme; rerun `keygen` or `campaign`".into()))
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn require(dir: &Path, name: &str, stage: &'static str) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact {
            path: path.display().to_string(),
            stage,
        })
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn load_public_key(dir: &Path, scheme: &Scheme) -> Result<PublicKey> {
    let bytes = fs::read(require(dir, PK, "keygen")?)?;
    unpack_public_key(&scheme.params()?, &bytes)
}

/// Write a fresh key pair into `dir`.
pub fn keygen_stage(dir: &Path, level: u8, revision: Revision, seed: &[u8; 32]) -> Result<()> {
    let run = || -> Result<()> {
        fs::create_dir_all(dir)?;
        let scheme = Scheme { level, revision };
        let (pk, sk) = keygen(seed, &scheme.params()?);
        fs::write(dir.join(PK), pack_public_key(&pk))?;
        fs::write(dir.join(SK), pack_secret_key(&sk)?)?;
        let mut m = RunManifest::load(dir)?;
        m.scheme = Some(scheme);
        m.seeds.insert("key_seed".into(), hex::encode(seed));
        m.record(dir, "keygen", &[PK, SK], serde_json::json!({ "level": level, "revision": revision }))?;
        m.save(dir)
    };
    run().map_err(|e| e.in_stage("keygen"))
}

/// Generate the campaign key pair and fault log.
pub fn campaign_stage(dir: &Path, config: &CampaignConfig) -> Result<Vec<FaultEvent>> {
    let run = || -> Result<Vec<FaultEvent>> {
        config.validate()?;
        fs::create_dir_all(dir)?;
        let (pk, sk) = config.keypair()?;
        let events = run_campaign(config, &sk, &pk)?;
        fs::write(dir.join(PK), pack_public_key(&pk))?;
        fs::write(dir.join(SK), pack_secret_key(&sk)?)?;
        let mut out = BufWriter::new(fs::File::create(dir.join(FAULTS))?);
        write_jsonl(&mut out, &events)?;
        out.flush()?;
        drop(out);
        let mut m = RunManifest::load(dir)?;
        m.scheme = Some(Scheme {
            level: config.level,
            revision: config.revision,
        });
        m.seeds.insert("run_seed".into(), config.seed.to_string());
        m.seeds.insert("key_seed".into(), hex::encode(config.key_seed_bytes()?));
        m.config = Some(serde_json::to_value(config)?);
        m.record(dir, "campaign", &[PK, SK, FAULTS], serde_json::Value::Null)?;
        m.save(dir)?;
        Ok(events)
    };
    run().map_err(|e| e.in_stage("campaign"))
}

pub fn load_events(dir: &Path) -> Result<Vec<FaultEvent>> {
    let f = fs::File::open(require(dir, FAULTS, "campaign")?)?;
    read_jsonl(BufReader::new(f))
}

fn write_jsonl_records<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn read_jsonl_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Correct every released signature of the fault log.
pub fn correct_stage(dir: &Path, options: &CorrectionOptions, threads: usize) -> Result<BatchSummary> {
    let run = || -> Result<BatchSummary> {
        let mut m = RunManifest::load(dir)?;
        let scheme = m.scheme()?;
        let pk = load_public_key(dir, &scheme)?;
        let events = load_events(dir)?;
        let started = Instant::now();
        let entries = batch_correct(&events, &pk, options, threads)?;
        let summary = summarize(&entries, options.bit_cap, started);
        write_jsonl_records(&dir.join(CORRECTIONS), &entries)?;
        write_jsonl_records(&dir.join(RECOVERED), &recovered_records(&entries))?;
        write_json(&dir.join(CORRECTION_SUMMARY), &summary)?;
        m.record(
            dir,
            "correct",
            &[CORRECTIONS, RECOVERED, CORRECTION_SUMMARY],
            serde_json::json!({ "bit_cap": options.bit_cap, "oracle": options.oracle }),
        )?;
        m.save(dir)?;
        Ok(summary)
    };
    run().map_err(|e| e.in_stage("correct"))
}

pub fn load_recovered(dir: &Path) -> Result<Vec<RecoveredRecord>> {
    read_jsonl_records(&require(dir, RECOVERED, "correct")?)
}

pub fn load_corrections(dir: &Path) -> Result<Vec<BatchEntry>> {
    read_jsonl_records(&require(dir, CORRECTIONS, "correct")?)
}

/// Contents of `groups.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupsArtifact {
    pub encoding: Encoding,
    pub recovered_records: usize,
    pub unique_bits: usize,
    pub groups: GroupCounts,
    pub conflicts: Vec<(usize, usize)>,
    pub reduced: ReducedParams,
}

pub fn aggregate_records(params: &ParameterSet, records: &[RecoveredRecord], lenient: bool) -> Result<KnowledgeMap> {
    let obs: Vec<BitObservation> = records.iter().map(BitObservation::from).collect();
    let enc = Encoding::for_params(params);
    if lenient {
        ingest_lenient(enc, params.l, &obs)
    } else {
        ingest(enc, params.l, &obs)
    }
}

pub fn aggregate_stage(dir: &Path, lenient: bool) -> Result<GroupsArtifact> {
    let run = || -> Result<GroupsArtifact> {
        let mut m = RunManifest::load(dir)?;
        let params = m.scheme()?.params()?;
        let records = load_recovered(dir)?;
        let map = aggregate_records(&params, &records, lenient)?;
        let unique: BTreeSet<(usize, usize, u32)> = records.iter().map(|r| (r.row, r.col, r.bit_index)).collect();
        let artifact = GroupsArtifact {
            encoding: map.encoding,
            recovered_records: records.len(),
            unique_bits: unique.len(),
            groups: classify(&map),
            conflicts: map.conflicts(),
            reduced: reduced_params(&map),
        };
        let mut out = BufWriter::new(fs::File::create(dir.join(BITMAP))?);
        export_bitmap(&map, &mut out)?;
        out.flush()?;
        drop(out);
        write_json(&dir.join(GROUPS), &artifact)?;
        m.record(dir, "aggregate", &[BITMAP, GROUPS], serde_json::json!({ "lenient": lenient }))?;
        m.save(dir)?;
        Ok(artifact)
    };
    run().map_err(|e| e.in_stage("aggregate"))
}

/// Contents of `estimate.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateArtifact {
    pub input: EstimatorInput,
    pub estimate: Option<SecurityEstimate>,
    /// Unreduced instance of the same scheme.
    pub baseline: SecurityEstimate,
}

/// Estimator input for the aggregated knowledge in `dir`.
pub fn estimator_input_from_groups(groups: &GroupsArtifact, m_max: u32) -> EstimatorInput {
    EstimatorInput {
        m_max,
        ..EstimatorInput::new(groups.reduced.n_bar as u32, groups.reduced.zeta)
    }
}

pub fn estimate_artifact(input: &EstimatorInput, full_dim: u32) -> Result<EstimateArtifact> {
    let baseline = estimate(&EstimatorInput {
        n_bar: full_dim,
        zeta: BASELINE_ZETA,
        ..*input
    })?;
    let estimate = if input.n_bar == 0 { None } else { Some(estimate(input)?) };
    Ok(EstimateArtifact {
        input: *input,
        estimate,
        baseline,
    })
}

pub fn estimate_stage(dir: &Path, m_max: u32) -> Result<EstimateArtifact> {
    let run = || -> Result<EstimateArtifact> {
        let mut m = RunManifest::load(dir)?;
        let params = m.scheme()?.params()?;
        let groups: GroupsArtifact = read_json(&require(dir, GROUPS, "aggregate")?)?;
        let input = estimator_input_from_groups(&groups, m_max);
        let artifact = estimate_artifact(&input, (params.l * params.n) as u32)?;
        write_json(&dir.join(ESTIMATE), &artifact)?;
        m.record(dir, "estimate", &[ESTIMATE], serde_json::json!({ "m_max": m_max }))?;
        m.save(dir)?;
        Ok(artifact)
    };
    run().map_err(|e| e.in_stage("estimate"))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthCheck {
    /// Recovered events whose log carries an injected fault.
    pub checked: usize,
    pub mismatches: usize,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rounds: usize,
    pub released: usize,
    pub dos: usize,
    pub suppressed: usize,
    pub recovered_events: usize,
    pub unique_bits: usize,
    pub duplicate_recoveries: usize,
    pub not_found: usize,
    pub no_fault_detected: usize,
    pub oracle_calls: u64,
    /// Recovered bits per word bit position, index 0 = LSB.
    pub bits_by_position: Vec<usize>,
    pub ground_truth: GroundTruthCheck,
    pub groups: GroupCounts,
    pub reduced: ReducedParams,
    pub estimate: Option<SecurityEstimate>,
    pub baseline: SecurityEstimate,
}

pub fn build_report(dir: &Path) -> Result<Report> {
    let events = load_events(dir)?;
    let entries = load_corrections(dir)?;
    let records = load_recovered(dir)?;
    let groups: GroupsArtifact = read_json(&require(dir, GROUPS, "aggregate")?)?;
    let est: EstimateArtifact = read_json(&require(dir, ESTIMATE, "estimate")?)?;
    let summary = summarize(&entries, 0, Instant::now());

    let by_id: BTreeMap<u64, &FaultEvent> = events.iter().map(|e| (e.event_id, e)).collect();
    let mut gt = GroundTruthCheck::default();
    let mut bits_by_position = vec![0; 32];
    for r in &records {
        bits_by_position[(r.bit_index - 1) as usize] += 1;
        if let Some(f) = by_id.get(&r.event_id).and_then(|e| e.fault()) {
            gt.checked += 1;
            let b = r.bit();
            if (f.row, f.col, f.bit_pos, f.original_bit()) != (b.row, b.col, b.bit_pos(), b.value) {
                gt.mismatches += 1;
            }
        }
    }

    Ok(Report {
        rounds: events.len(),
        released: events.iter().filter(|e| e.sig_hex.is_some()).count(),
        dos: events.iter().filter(|e| e.dos).count(),
        suppressed: events.iter().filter(|e| e.suppressed.is_some()).count(),
        recovered_events: records.len(),
        unique_bits: groups.unique_bits,
        duplicate_recoveries: records.len() - groups.unique_bits,
        not_found: summary.not_found,
        no_fault_detected: summary.no_fault_detected,
        oracle_calls: summary.oracle_calls,
        bits_by_position,
        ground_truth: gt,
        groups: groups.groups,
        reduced: groups.reduced,
        estimate: est.estimate,
        baseline: est.baseline,
    })
}

pub fn report_stage(dir: &Path) -> Result<Report> {
    let run = || -> Result<Report> {
        let report = build_report(dir)?;
        write_json(&dir.join(REPORT), &report)?;
        Ok(report)
    };
    run().map_err(|e| e.in_stage("report"))
}

pub fn render_report(r: &Report) -> String {
    let mut s = String::new();
    let mut line = |t: String| {
        s.push_str(&t);
        s.push('\n');
    };
    line(format!(
        "rounds {}  released {}  dos {}  suppressed {}",
        r.rounds, r.released, r.dos, r.suppressed
    ));
    line(format!(
        "recovered {} ({} unique bits, {} duplicates)  not found {}  no fault {}  oracle calls {}",
        r.recovered_events, r.unique_bits, r.duplicate_recoveries, r.not_found, r.no_fault_detected, r.oracle_calls
    ));
    line(format!(
        "ground truth: {} checked, {} mismatches",
        r.ground_truth.checked, r.ground_truth.mismatches
    ));
    line("recovered bits by position:".into());
    for (p, c) in r.bits_by_position.iter().enumerate().filter(|(_, c)| **c > 0) {
        line(format!("  bit {p:>2}: {c}"));
    }
    line("coefficients by known bits (per polynomial, then total):".into());
    let width = r.groups.total.by_known_bits.len();
    let header: Vec<String> = (0..width).map(|b| format!("{b:>6}")).collect();
    line(format!("  {:>6} {} {:>9}", "poly", header.join(" "), "conflicts"));
    for (i, t) in r.groups.per_poly.iter().chain(std::iter::once(&r.groups.total)).enumerate() {
        let name = if i == r.groups.per_poly.len() { "total".to_string() } else { i.to_string() };
        let cells: Vec<String> = t.by_known_bits.iter().map(|c| format!("{c:>6}")).collect();
        line(format!("  {name:>6} {} {:>9}", cells.join(" "), t.conflicts));
    }
    line(format!("n_bar {}  zeta {:.5}", r.reduced.n_bar, r.reduced.zeta));
    let cost = |e: &SecurityEstimate| {
        format!(
            "primal m={} b={} {}/{}  dual m={} b={} {}/{}",
            e.primal.m,
            e.primal.b,
            e.primal.classical_bits,
            e.primal.quantum_bits,
            e.dual.m,
            e.dual.b,
            e.dual.classical_bits,
            e.dual.quantum_bits
        )
    };
    line(format!("baseline  {}", cost(&r.baseline)));
    match &r.estimate {
        Some(e) => line(format!("reduced   {}", cost(e))),
        None => line("reduced   fully recovered, no lattice attack needed".into()),
    }
    s
}
