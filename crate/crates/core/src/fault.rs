//! Single-bit faults in the stored `s1` words, a statistical DRAM template
//! model, and seeded fault campaigns.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packing::pack_signature;
use crate::params::{ParameterSet, Revision, N};
use crate::scheme::{keygen, verify, PublicKey, SecretKey, SignMode, SignOutcome, Signer};
use crate::seed::{derive_bytes, derive_rng, derive_u64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipDirection {
    ZeroToOne,
    OneToZero,
}

impl FlipDirection {
    /// Bit value the cell must hold for the flip to take effect.
    pub fn source_bit(self) -> u32 {
        match self {
            FlipDirection::ZeroToOne => 0,
            FlipDirection::OneToZero => 1,
        }
    }

    /// The direction that changes a bit currently equal to `bit`.
    pub fn flipping(bit: u32) -> Self {
        if bit == 0 {
            FlipDirection::ZeroToOne
        } else {
            FlipDirection::OneToZero
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            FlipDirection::ZeroToOne => FlipDirection::OneToZero,
            FlipDirection::OneToZero => FlipDirection::ZeroToOne,
        }
    }
}

/// One bit of one `s1` word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaultSpec {
    pub row: usize,
    pub col: usize,
    pub bit_pos: u32,
    pub direction: FlipDirection,
}

impl FaultSpec {
    /// The flip that actually changes `(row, col, bit_pos)` of `sk`.
    pub fn effective(sk: &SecretKey, row: usize, col: usize, bit_pos: u32) -> Self {
        let bit = (sk.s1_words[row][col] as u32 >> bit_pos) & 1;
        Self {
            row,
            col,
            bit_pos,
            direction: FlipDirection::flipping(bit),
        }
    }

    /// Value of the bit before the fault.
    pub fn original_bit(&self) -> u8 {
        self.direction.source_bit() as u8
    }

    pub fn reversed(&self) -> Self {
        Self {
            direction: self.direction.reversed(),
            ..*self
        }
    }

    fn check_range(&self, params: &ParameterSet) -> Result<()> {
        if self.row >= params.l || self.col >= N || self.bit_pos >= 32 {
            return Err(Error::InvalidParameter(format!(
                "fault location ({}, {}, {}) outside s1",
                self.row, self.col, self.bit_pos
            )));
        }
        Ok(())
    }
}

/// Flip one bit of a copy of `sk`.
pub fn inject(sk: &SecretKey, spec: &FaultSpec) -> Result<SecretKey> {
    spec.check_range(&sk.params)?;
    let word = sk.s1_words[spec.row][spec.col];
    if (word as u32 >> spec.bit_pos) & 1 != spec.direction.source_bit() {
        return Err(Error::NoOpFlip {
            row: spec.row,
            col: spec.col,
            bit_pos: spec.bit_pos,
        });
    }
    let mut out = sk.clone();
    out.s1_words[spec.row][spec.col] = (word as u32 ^ (1u32 << spec.bit_pos)) as i32;
    Ok(out)
}

/// A DRAM cell known to flip, in one direction only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VulnerableCell {
    pub page: usize,
    pub byte_offset: usize,
    pub bit: u8,
    pub direction: FlipDirection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateConfig {
    pub page_size: usize,
    pub pages: usize,
    pub flip_density: f64,
    /// Fraction of vulnerable cells that flip `0 -> 1`.
    pub direction_ratio: f64,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self {
            page_size: 4096,
            pages: 64,
            flip_density: 0.0003,
            direction_ratio: 0.5,
        }
    }
}

impl TemplateConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_density) {
            return Err(Error::InvalidParameter(format!(
                "flip_density {} outside [0, 1]",
                self.flip_density
            )));
        }
        if !(0.0..=1.0).contains(&self.direction_ratio) {
            return Err(Error::InvalidParameter(format!(
                "direction_ratio {} outside [0, 1]",
                self.direction_ratio
            )));
        }
        if self.page_size == 0 || !self.page_size.is_multiple_of(4) || self.pages == 0 {
            return Err(Error::InvalidParameter(
                "page_size must be a positive multiple of 4 and pages positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of profiling a memory region for flippable cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DramTemplate {
    pub page_size: usize,
    pub pages: usize,
    pub flip_density: f64,
    pub direction_ratio: f64,
    pub seed: u64,
    pub cells: Vec<VulnerableCell>,
}

impl DramTemplate {
    /// Exactly `round(density * bits)` distinct vulnerable cells.
    pub fn generate(config: &TemplateConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let page_bits = config.page_size * 8;
        let total = page_bits * config.pages;
        let count = ((config.flip_density * total as f64).round() as usize).min(total);
        let mut rng = derive_rng(seed, "template");
        let mut idx = sample(&mut rng, total, count).into_vec();
        idx.sort_unstable();
        let cells = idx
            .into_iter()
            .map(|i| VulnerableCell {
                page: i / page_bits,
                byte_offset: (i % page_bits) / 8,
                bit: (i % 8) as u8,
                direction: if rng.gen_bool(config.direction_ratio) {
                    FlipDirection::ZeroToOne
                } else {
                    FlipDirection::OneToZero
                },
            })
            .collect();
        Ok(Self {
            page_size: config.page_size,
            pages: config.pages,
            flip_density: config.flip_density,
            direction_ratio: config.direction_ratio,
            seed,
            cells,
        })
    }

    pub fn total_bits(&self) -> usize {
        self.page_size * 8 * self.pages
    }
}

/// Template over the default page geometry.
pub fn template_generate(seed: u64, flip_density: f64, direction_ratio: f64) -> Result<DramTemplate> {
    DramTemplate::generate(
        &TemplateConfig {
            flip_density,
            direction_ratio,
            ..TemplateConfig::default()
        },
        seed,
    )
}

/// Where `s1` landed in memory and which of its bits can flip there.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub seed: u64,
    /// Offset of the first `s1` byte within the first victim page.
    pub start_offset: usize,
    /// Template pages backing `s1`, in address order.
    pub pages: Vec<usize>,
    /// Flippable `s1` positions, sorted; directions are the cell directions
    /// and may not match the current key bits.
    pub sites: Vec<FaultSpec>,
}

pub fn place_victim(template: &DramTemplate, params: &ParameterSet, placement_seed: u64) -> Result<Placement> {
    let s1_bytes = 4 * params.l * N;
    let capacity = template.page_size * template.pages;
    if s1_bytes > capacity {
        return Err(Error::InvalidParameter(format!(
            "s1 needs {s1_bytes} bytes but the template covers {capacity}"
        )));
    }
    let mut rng = derive_rng(placement_seed, "placement");
    let max_start = (template.page_size - 4).min(capacity - s1_bytes);
    let start = rng.gen_range(0..=max_start / 4) * 4;
    let needed = (start + s1_bytes).div_ceil(template.page_size);
    let pages = sample(&mut rng, template.pages, needed).into_vec();
    let slot: HashMap<usize, usize> = pages.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let mut sites = BTreeSet::new();
    for cell in &template.cells {
        let Some(&pos) = slot.get(&cell.page) else {
            continue;
        };
        let addr = pos * template.page_size + cell.byte_offset;
        if addr < start || addr - start >= s1_bytes {
            continue;
        }
        let b = addr - start;
        let word = b / 4;
        sites.insert(FaultSpec {
            row: word / N,
            col: word % N,
            bit_pos: (8 * (b % 4)) as u32 + cell.bit as u32,
            direction: cell.direction,
        });
    }
    Ok(Placement {
        seed: placement_seed,
        start_offset: start,
        pages,
        sites: sites.into_iter().collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelocationPolicy {
    /// Relocate once every usable position of the placement was faulted.
    #[default]
    Exhausted,
    /// Keep one placement; positions may repeat.
    Never,
    /// Fresh placement before every round.
    EveryRound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigningMode {
    #[default]
    Deterministic,
    Randomized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub level: u8,
    pub revision: Revision,
    pub mode: SigningMode,
    pub rounds: usize,
    pub template: TemplateConfig,
    /// Restrict faults to these word-bit positions; `None` allows all 32.
    pub bit_positions: Option<Vec<u32>>,
    pub relocation: RelocationPolicy,
    /// Placement attempts per round when no usable position is left.
    pub max_relocations: usize,
    pub kappa_cap: u32,
    pub verify_after_sign: bool,
    pub spatial_redundancy: bool,
    pub log_ground_truth: bool,
    pub message_len: usize,
    pub seed: u64,
    /// Hex keygen seed; derived from `seed` when absent.
    pub key_seed: Option<String>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            level: 2,
            revision: Revision::V30,
            mode: SigningMode::Deterministic,
            rounds: 100,
            template: TemplateConfig::default(),
            bit_positions: None,
            relocation: RelocationPolicy::Exhausted,
            max_relocations: 16,
            kappa_cap: crate::scheme::DEFAULT_KAPPA_CAP,
            verify_after_sign: false,
            spatial_redundancy: false,
            log_ground_truth: true,
            message_len: 32,
            seed: 0,
            key_seed: None,
        }
    }
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.template.validate()?;
        if self.rounds == 0 || self.kappa_cap == 0 {
            return Err(Error::InvalidParameter("rounds and kappa_cap must be positive".into()));
        }
        if let Some(bits) = &self.bit_positions {
            if bits.is_empty() || bits.iter().any(|&b| b >= 32) {
                return Err(Error::InvalidParameter(
                    "bit_positions must be a non-empty subset of 0..32".into(),
                ));
            }
        }
        self.key_seed_bytes()?;
        Ok(())
    }

    pub fn params(&self) -> Result<ParameterSet> {
        ParameterSet::for_level(self.level, self.revision)
    }

    pub fn key_seed_bytes(&self) -> Result<[u8; 32]> {
        match &self.key_seed {
            None => Ok(derive_bytes(self.seed, "keygen")),
            Some(h) => hex::decode(h)
                .ok()
                .and_then(|v| v.try_into().ok())
                .ok_or_else(|| Error::parse("key_seed", "expected 64 hex characters")),
        }
    }

    /// Key pair used by the campaign.
    pub fn keypair(&self) -> Result<(PublicKey, SecretKey)> {
        Ok(keygen(&self.key_seed_bytes()?, &self.params()?))
    }

    fn allows(&self, bit_pos: u32) -> bool {
        self.bit_positions.as_ref().is_none_or(|b| b.contains(&bit_pos))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suppression {
    VerifyAfterSign,
    SpatialRedundancy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub fault: Option<FaultSpec>,
}

/// One line of the fault log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub event_id: u64,
    pub msg_hex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sig_hex: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dos: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppressed: Option<Suppression>,
    pub kappa_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

impl FaultEvent {
    pub fn message(&self) -> Result<Vec<u8>> {
        hex::decode(&self.msg_hex).map_err(|e| Error::parse("msg_hex", e.to_string()))
    }

    pub fn signature(&self) -> Option<Result<Vec<u8>>> {
        self.sig_hex
            .as_ref()
            .map(|h| hex::decode(h).map_err(|e| Error::parse("sig_hex", e.to_string())))
    }

    /// Injected fault, if ground truth was logged and a fault was injected.
    pub fn fault(&self) -> Option<&FaultSpec> {
        self.ground_truth.as_ref().and_then(|g| g.fault.as_ref())
    }
}

/// Run `config.rounds` signing rounds, each on a clean copy of `sk` with at
/// most one injected flip.
pub fn run_campaign(config: &CampaignConfig, sk: &SecretKey, pk: &PublicKey) -> Result<Vec<FaultEvent>> {
    config.validate()?;
    let params = sk.params;
    let seed = config.seed;
    let template = DramTemplate::generate(&config.template, derive_u64(seed, "template"))?;
    let mut msg_rng = derive_rng(seed, "messages");
    let mut sign_rng = derive_rng(seed, "randomized-signing");
    let mut pick_rng = derive_rng(seed, "fault-site");
    let mut placements = 0u64;

    let relocate = |placements: &mut u64| -> Result<Vec<FaultSpec>> {
        let ps = derive_u64(seed, &format!("placement/{placements}"));
        *placements += 1;
        let placement = place_victim(&template, &params, ps)?;
        // a cell only flips if the stored bit matches its direction
        Ok(placement
            .sites
            .into_iter()
            .filter(|s| config.allows(s.bit_pos))
            .filter(|s| (sk.s1_words[s.row][s.col] as u32 >> s.bit_pos) & 1 == s.direction.source_bit())
            .collect())
    };

    let mut pool = relocate(&mut placements)?;
    let mut events = Vec::with_capacity(config.rounds);
    for event_id in 0..config.rounds as u64 {
        if config.relocation == RelocationPolicy::EveryRound && event_id > 0 {
            pool = relocate(&mut placements)?;
        }
        if pool.is_empty() && config.relocation != RelocationPolicy::Never {
            for _ in 0..config.max_relocations {
                pool = relocate(&mut placements)?;
                if !pool.is_empty() {
                    break;
                }
            }
        }
        let fault = if pool.is_empty() {
            None
        } else {
            let i = pick_rng.gen_range(0..pool.len());
            Some(match config.relocation {
                RelocationPolicy::Exhausted => pool.swap_remove(i),
                _ => pool[i],
            })
        };

        let mut msg = vec![0u8; config.message_len];
        msg_rng.fill(&mut msg[..]);
        let key = match &fault {
            Some(f) => inject(sk, f)?,
            None => sk.clone(),
        };

        let mut event = FaultEvent {
            event_id,
            msg_hex: hex::encode(&msg),
            sig_hex: None,
            dos: false,
            suppressed: None,
            kappa_used: 0,
            ground_truth: config.log_ground_truth.then_some(GroundTruth { fault }),
        };

        if config.spatial_redundancy && key.s1_words != sk.s1_words {
            event.suppressed = Some(Suppression::SpatialRedundancy);
            events.push(event);
            continue;
        }
        let mode = match config.mode {
            SigningMode::Deterministic => SignMode::Deterministic,
            SigningMode::Randomized => SignMode::Randomized(&mut sign_rng),
        };
        match Signer::new(&key).sign(&msg, mode, config.kappa_cap) {
            SignOutcome::LoopExhausted { kappa_used } => {
                event.dos = true;
                event.kappa_used = kappa_used;
            }
            SignOutcome::Signed { signature, kappa_used } => {
                event.kappa_used = kappa_used;
                let bytes = pack_signature(&signature)?;
                if config.verify_after_sign && !verify(pk, &msg, &bytes) {
                    event.suppressed = Some(Suppression::VerifyAfterSign);
                } else {
                    event.sig_hex = Some(hex::encode(bytes));
                }
            }
        }
        events.push(event);
    }
    Ok(events)
}

pub fn write_jsonl<W: Write>(mut out: W, events: &[FaultEvent]) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<FaultEvent>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::parse("fault log", format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}
