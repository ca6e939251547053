//! Core-SVP cost of the primal and dual attacks on the reduced LWE
//! instance left after partial key recovery.

use std::f64::consts::{E, LN_2, PI};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Q;

pub const CLASSICAL_SIEVE: f64 = 0.292;
pub const QUANTUM_SIEVE: f64 = 0.265;
pub const MIN_BLOCK: u32 = 50;
pub const MAX_BLOCK: u32 = 2000;
pub const DEFAULT_M_MAX: u32 = 2048;
pub const BASELINE_ZETA: f64 = 3.1622776601683795;

/// `(recovered coefficients, zeta)` rows of the published level-2
/// reduced-security table.
pub const LEVEL2_REFERENCE_ROWS: [(u32, f64); 15] = [
    (0, BASELINE_ZETA),
    (0, 1.53392),
    (1, BASELINE_ZETA),
    (2, BASELINE_ZETA),
    (4, BASELINE_ZETA),
    (8, BASELINE_ZETA),
    (64, BASELINE_ZETA),
    (99, BASELINE_ZETA),
    (128, BASELINE_ZETA),
    (192, BASELINE_ZETA),
    (228, BASELINE_ZETA),
    (288, BASELINE_ZETA),
    (320, BASELINE_ZETA),
    (352, BASELINE_ZETA),
    (99, 1.53392),
];

/// Free constants of the cost models, kept together so alternatives can
/// be compared against published tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Conventions {
    /// Embedding dimension is `m + n_bar + primal_dim_offset`.
    pub primal_dim_offset: u32,
    /// Dual vector length is `delta^(d - dual_len_offset) * q^(n_bar/d)`.
    pub dual_len_offset: u32,
    /// Multiplier in front of the distinguishing advantage.
    pub dual_advantage_factor: f64,
    /// Vectors produced per sieve call, as `2^(amortization * b)`.
    pub sieve_amortization: f64,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            primal_dim_offset: 0,
            dual_len_offset: 0,
            dual_advantage_factor: 1.0,
            sieve_amortization: 0.2075,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorInput {
    pub n_bar: u32,
    pub zeta: f64,
    #[serde(default = "default_q")]
    pub q: u32,
    #[serde(default = "default_m_max")]
    pub m_max: u32,
    #[serde(default)]
    pub conventions: Conventions,
}

fn default_q() -> u32 {
    Q as u32
}

fn default_m_max() -> u32 {
    DEFAULT_M_MAX
}

impl EstimatorInput {
    pub fn new(n_bar: u32, zeta: f64) -> Self {
        Self {
            n_bar,
            zeta,
            q: default_q(),
            m_max: DEFAULT_M_MAX,
            conventions: Conventions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::InvalidParameter(format!("zeta must be positive, got {}", self.zeta)));
        }
        if self.m_max < 1 || self.q < 2 {
            return Err(Error::InvalidParameter("m_max >= 1 and q >= 2 required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attack {
    Primal,
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackCost {
    pub attack: Attack,
    pub m: u32,
    pub b: u32,
    pub classical_bits: u32,
    pub quantum_bits: u32,
    /// Quantum optimum, which may sit at a different `(m, b)` for the dual.
    pub quantum_m: u32,
    pub quantum_b: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityEstimate {
    pub n_bar: u32,
    pub zeta: f64,
    pub primal: AttackCost,
    pub dual: AttackCost,
}

impl SecurityEstimate {
    pub fn classical_bits(&self) -> u32 {
        self.primal.classical_bits.min(self.dual.classical_bits)
    }

    pub fn quantum_bits(&self) -> u32 {
        self.primal.quantum_bits.min(self.dual.quantum_bits)
    }
}

/// Root Hermite factor reached by BKZ with block size `b`.
pub fn rhf_delta(b: u32) -> f64 {
    let b = b as f64;
    ((PI * b).powf(1.0 / b) * b / (2.0 * PI * E)).powf(1.0 / (2.0 * (b - 1.0)))
}

/// Log-domain slack of the unique-SVP condition; non-negative when BKZ-`b`
/// with `m` samples succeeds.
pub fn primal_margin(input: &EstimatorInput, m: u32, b: u32) -> f64 {
    let d = (m + input.n_bar + input.conventions.primal_dim_offset) as f64;
    let bf = b as f64;
    let rhs = (2.0 * bf - d - 1.0) * rhf_delta(b).ln() + (m as f64 / d) * (input.q as f64).ln();
    let lhs = input.zeta.ln() + 0.5 * bf.ln();
    rhs - lhs
}

pub fn primal_cost(input: &EstimatorInput) -> Result<AttackCost> {
    input.validate()?;
    for b in MIN_BLOCK..=MAX_BLOCK {
        if let Some(m) = (1..=input.m_max).find(|&m| primal_margin(input, m, b) >= 0.0) {
            let bf = b as f64;
            return Ok(AttackCost {
                attack: Attack::Primal,
                m,
                b,
                classical_bits: (CLASSICAL_SIEVE * bf).floor() as u32,
                quantum_bits: (QUANTUM_SIEVE * bf).floor() as u32,
                quantum_m: m,
                quantum_b: b,
            });
        }
    }
    Err(Error::Infeasible { attack: "primal" })
}

/// Total log2 cost of the dual attack at `(m, b)` with sieve exponent `c`.
pub fn dual_bits(input: &EstimatorInput, m: u32, b: u32, c: f64) -> f64 {
    let conv = &input.conventions;
    let n = input.n_bar as f64;
    let d = (m + input.n_bar) as f64;
    let q = input.q as f64;
    let log2_len = (d - conv.dual_len_offset as f64) * rhf_delta(b).log2() + (n / d) * q.log2();
    let tau = (log2_len + input.zeta.log2() - q.log2()).exp2();
    let log2_eps = conv.dual_advantage_factor.log2() - 2.0 * PI * PI * tau * tau / LN_2;
    let log2_repeats = (-2.0 * log2_eps - conv.sieve_amortization * b as f64).max(0.0);
    c * b as f64 + log2_repeats
}

fn dual_search(input: &EstimatorInput, c: f64) -> Option<(f64, u32, u32)> {
    let mut best: Option<(f64, u32, u32)> = None;
    for b in MIN_BLOCK..=MAX_BLOCK {
        if best.is_some_and(|(cost, _, _)| c * b as f64 > cost) {
            break;
        }
        for m in 1..=input.m_max {
            let cost = dual_bits(input, m, b, c);
            if cost.is_finite() && best.is_none_or(|(bc, _, _)| cost < bc) {
                best = Some((cost, m, b));
            }
        }
    }
    best
}

pub fn dual_cost(input: &EstimatorInput) -> Result<AttackCost> {
    input.validate()?;
    let infeasible = || Error::Infeasible { attack: "dual" };
    let (cc, m, b) = dual_search(input, CLASSICAL_SIEVE).ok_or_else(infeasible)?;
    let (qc, qm, qb) = dual_search(input, QUANTUM_SIEVE).ok_or_else(infeasible)?;
    Ok(AttackCost {
        attack: Attack::Dual,
        m,
        b,
        classical_bits: cc.floor() as u32,
        quantum_bits: qc.floor() as u32,
        quantum_m: qm,
        quantum_b: qb,
    })
}

pub fn estimate(input: &EstimatorInput) -> Result<SecurityEstimate> {
    let (primal, dual) = rayon::join(|| primal_cost(input), || dual_cost(input));
    Ok(SecurityEstimate {
        n_bar: input.n_bar,
        zeta: input.zeta,
        primal: primal?,
        dual: dual?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub recovered: u32,
    pub estimate: SecurityEstimate,
}

/// Evaluate rows of `(recovered coefficients, zeta)` against a full
/// dimension of `n`, keeping the input order.
pub fn sweep(n: u32, rows: &[(u32, f64)], base: &EstimatorInput) -> Result<Vec<SweepRow>> {
    rows.par_iter()
        .map(|&(recovered, zeta)| {
            let input = EstimatorInput {
                n_bar: n.saturating_sub(recovered),
                zeta,
                ..*base
            };
            Ok(SweepRow {
                recovered,
                estimate: estimate(&input)?,
            })
        })
        .collect()
}

pub fn render_table(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:>6} {:>9} | {:>5} {:>4} {:>9} {:>7} | {:>5} {:>4} {:>9} {:>7}",
        "#rec", "n_bar", "zeta", "m", "b", "classical", "quantum", "m", "b", "classical", "quantum"
    );
    for r in rows {
        let e = &r.estimate;
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:>9.5} | {:>5} {:>4} {:>9} {:>7} | {:>5} {:>4} {:>9} {:>7}",
            r.recovered,
            e.n_bar,
            e.zeta,
            e.primal.m,
            e.primal.b,
            e.primal.classical_bits,
            e.primal.quantum_bits,
            e.dual.m,
            e.dual.b,
            e.dual.classical_bits,
            e.dual.quantum_bits
        );
    }
    s
}
