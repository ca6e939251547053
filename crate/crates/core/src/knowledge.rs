//! Aggregation of recovered bits into per-coefficient knowledge.
//!
//! A coefficient in `[-eta, eta]` stored as a 32-bit two's-complement word
//! is determined by its low `w` bits; every higher bit repeats the sign.
//! Observations at positions `>= w - 1` therefore all land on the sign bit,
//! and the candidate values are whatever valid encodings agree with the
//! known bits.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::correction::RecoveredRecord;
use crate::error::{Error, Result};
use crate::params::{ParameterSet, N};

/// Bit width that holds every value of `[-eta, eta]` in two's complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    pub eta: i32,
    pub width: u32,
}

impl Encoding {
    pub fn new(eta: i32) -> Self {
        let mut width = 1;
        while -(1i32 << (width - 1)) > -eta || (1i32 << (width - 1)) - 1 < eta {
            width += 1;
        }
        Self { eta, width }
    }

    pub fn for_params(p: &ParameterSet) -> Self {
        Self::new(p.eta)
    }

    pub fn values(&self) -> impl Iterator<Item = i32> {
        -self.eta..=self.eta
    }

    /// Position that an observation at word bit `bit_pos` informs.
    pub fn fold(&self, bit_pos: u32) -> u32 {
        bit_pos.min(self.width - 1)
    }

    /// Unknown bits left when `candidates` values remain.
    pub fn remaining_bits(&self, candidates: usize) -> u32 {
        match candidates {
            0 | 1 => 0,
            c => usize::BITS - (c - 1).leading_zeros(),
        }
    }

    /// Known-bit count under the "set size to bits" convention: the full
    /// width minus the bits needed to index the remaining candidates.
    pub fn known_bits(&self, candidates: usize) -> u32 {
        self.width - self.remaining_bits(candidates).min(self.width)
    }
}

/// Values of `[-eta, eta]` consistent with `known[i]` for every known bit.
pub fn candidate_set(enc: &Encoding, known: &[Option<u8>]) -> Vec<i32> {
    enc.values()
        .filter(|&v| {
            known
                .iter()
                .enumerate()
                .all(|(i, k)| k.is_none_or(|b| (v as u32 >> i) & 1 == b as u32))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitObservation {
    pub row: usize,
    pub col: usize,
    pub bit_pos: u32,
    pub value: u8,
}

impl From<&RecoveredRecord> for BitObservation {
    fn from(r: &RecoveredRecord) -> Self {
        Self {
            row: r.row,
            col: r.col,
            bit_pos: r.bit_index - 1,
            value: r.value,
        }
    }
}

/// Folded position and value of one observation.
pub fn fold_observation(enc: &Encoding, obs: &BitObservation) -> (u32, u8) {
    (enc.fold(obs.bit_pos), obs.value)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientKnowledge {
    /// Indexed by folded bit position, LSB first.
    pub known: Vec<Option<u8>>,
    pub candidates: Vec<i32>,
    pub conflict: bool,
}

impl CoefficientKnowledge {
    fn unknown(enc: &Encoding) -> Self {
        Self {
            known: vec![None; enc.width as usize],
            candidates: enc.values().collect(),
            conflict: false,
        }
    }

    /// Candidates usable downstream: a conflicted coefficient carries no
    /// information.
    pub fn effective_candidates(&self, enc: &Encoding) -> usize {
        if self.conflict {
            enc.values().count()
        } else {
            self.candidates.len()
        }
    }

    pub fn is_full(&self) -> bool {
        !self.conflict && self.candidates.len() == 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeMap {
    pub encoding: Encoding,
    pub l: usize,
    pub n: usize,
    /// Row-major, `l * n` entries.
    pub coeffs: Vec<CoefficientKnowledge>,
    pub observations: usize,
}

impl KnowledgeMap {
    pub fn empty(enc: Encoding, l: usize) -> Self {
        Self {
            encoding: enc,
            l,
            n: N,
            coeffs: vec![CoefficientKnowledge::unknown(&enc); l * N],
            observations: 0,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> &CoefficientKnowledge {
        &self.coeffs[row * self.n + col]
    }

    pub fn conflicts(&self) -> Vec<(usize, usize)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.conflict)
            .map(|(i, _)| (i / self.n, i % self.n))
            .collect()
    }

    /// Add one observation. A contradiction marks the coefficient as
    /// conflicted and is reported; the rest of the map is unaffected.
    pub fn observe(&mut self, obs: &BitObservation) -> Result<()> {
        if obs.row >= self.l || obs.col >= self.n || obs.bit_pos >= 32 || obs.value > 1 {
            return Err(Error::InvalidParameter(format!(
                "observation ({}, {}, {}, {}) out of range",
                obs.row, obs.col, obs.bit_pos, obs.value
            )));
        }
        self.observations += 1;
        let enc = self.encoding;
        let (pos, value) = fold_observation(&enc, obs);
        let c = &mut self.coeffs[obs.row * self.n + obs.col];
        let clash = matches!(c.known[pos as usize], Some(v) if v != value);
        if !clash {
            c.known[pos as usize] = Some(value);
            c.candidates = candidate_set(&enc, &c.known);
        }
        if clash || c.candidates.is_empty() {
            c.conflict = true;
            return Err(Error::ConflictingObservation {
                row: obs.row,
                col: obs.col,
            });
        }
        Ok(())
    }
}

/// Build a map, failing on the first contradiction.
pub fn ingest(enc: Encoding, l: usize, observations: &[BitObservation]) -> Result<KnowledgeMap> {
    let mut map = KnowledgeMap::empty(enc, l);
    for o in observations {
        map.observe(o)?;
    }
    Ok(map)
}

/// Build a map, recording contradictions instead of stopping.
pub fn ingest_lenient(enc: Encoding, l: usize, observations: &[BitObservation]) -> Result<KnowledgeMap> {
    let mut map = KnowledgeMap::empty(enc, l);
    for o in observations {
        match map.observe(o) {
            Ok(()) | Err(Error::ConflictingObservation { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(map)
}

/// Coefficient counts by number of known bits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    /// `by_known_bits[b]` = coefficients with `b` known bits; the last
    /// entry counts full recoveries.
    pub by_known_bits: Vec<usize>,
    pub conflicts: usize,
}

impl Tally {
    pub fn none(&self) -> usize {
        self.by_known_bits[0]
    }

    pub fn full(&self) -> usize {
        *self.by_known_bits.last().expect("non-empty")
    }

    pub fn total(&self) -> usize {
        self.by_known_bits.iter().sum()
    }

    /// Total known bits under the set-size convention.
    pub fn known_bits_total(&self) -> usize {
        self.by_known_bits.iter().enumerate().map(|(b, c)| b * c).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub per_poly: Vec<Tally>,
    pub total: Tally,
}

pub fn classify(map: &KnowledgeMap) -> GroupCounts {
    let enc = map.encoding;
    let blank = Tally {
        by_known_bits: vec![0; enc.width as usize + 1],
        conflicts: 0,
    };
    let mut per_poly = vec![blank.clone(); map.l];
    let mut total = blank;
    for (i, c) in map.coeffs.iter().enumerate() {
        let b = enc.known_bits(c.effective_candidates(&enc));
        for t in [&mut per_poly[i / map.n], &mut total] {
            t.by_known_bits[b as usize] += 1;
            t.conflicts += usize::from(c.conflict);
        }
    }
    GroupCounts { per_poly, total }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub n_bar: usize,
    pub zeta: f64,
    /// Set when every coefficient is known and `zeta` is meaningless.
    pub degenerate: bool,
    /// Bits of entropy removed, `sum log2(|values| / |candidates|)`.
    pub entropy_bits_known: f64,
}

impl ReducedParams {
    /// From coefficient counts indexed by known bits. Each unrecovered
    /// coefficient weighs its remaining unknown bits.
    pub fn from_tally(enc: &Encoding, tally: &Tally) -> Self {
        let w = enc.width as usize;
        let n_bar = tally.total() - tally.full();
        let weighted: usize = (0..w).map(|b| (w - b) * tally.by_known_bits[b]).sum();
        let degenerate = n_bar == 0;
        Self {
            n_bar,
            zeta: if degenerate { 0.0 } else { weighted as f64 / n_bar as f64 },
            degenerate,
            entropy_bits_known: 0.0,
        }
    }
}

pub fn reduced_params(map: &KnowledgeMap) -> ReducedParams {
    let enc = map.encoding;
    let mut r = ReducedParams::from_tally(&enc, &classify(map).total);
    let all = enc.values().count() as f64;
    r.entropy_bits_known = map
        .coeffs
        .iter()
        .map(|c| (all / c.effective_candidates(&enc) as f64).log2())
        .sum();
    r
}

fn bit_names(width: u32) -> Vec<String> {
    if width == 3 {
        vec!["z".into(), "y".into(), "x".into()]
    } else {
        (0..width).map(|i| format!("b{i}")).collect()
    }
}

/// CSV grid, one row per coefficient, preceded by `#` summary lines.
pub fn export_bitmap<W: Write>(map: &KnowledgeMap, mut out: W) -> Result<()> {
    let groups = classify(map);
    let known_cells: usize = map.coeffs.iter().map(|c| c.known.iter().flatten().count()).sum();
    writeln!(out, "# coefficients={} observations={}", map.coeffs.len(), map.observations)?;
    writeln!(
        out,
        "# known_cells={} known_bits={} full={} none={} conflicts={}",
        known_cells,
        groups.total.known_bits_total(),
        groups.total.full(),
        groups.total.none(),
        groups.total.conflicts
    )?;
    let mut w = csv::Writer::from_writer(out);
    let names = bit_names(map.encoding.width);
    let mut header = vec!["row".to_string(), "col".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["candidates".to_string(), "conflict".to_string()]);
    w.write_record(&header)?;
    for (i, c) in map.coeffs.iter().enumerate() {
        let mut rec = vec![(i / map.n).to_string(), (i % map.n).to_string()];
        rec.extend(c.known.iter().map(|k| match k {
            Some(b) => b.to_string(),
            None => "unknown".to_string(),
        }));
        rec.push(
            c.candidates
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        rec.push(c.conflict.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Unique observations, with the number of times each was reported.
pub fn deduplicate(observations: &[BitObservation]) -> BTreeMap<BitObservation, usize> {
    let mut out = BTreeMap::new();
    for o in observations {
        *out.entry(*o).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc() -> Encoding {
        Encoding::new(2)
    }

    /// Known bits from an `xyz` pattern string, `x` first.
    fn pattern(p: &str) -> Vec<Option<u8>> {
        let mut k: Vec<Option<u8>> = p
            .chars()
            .map(|ch| match ch {
                '0' => Some(0),
                '1' => Some(1),
                _ => None,
            })
            .collect();
        k.reverse();
        k
    }

    fn obs(row: usize, col: usize, bit_pos: u32, value: u8) -> BitObservation {
        BitObservation {
            row,
            col,
            bit_pos,
            value,
        }
    }

    #[test]
    fn widths() {
        assert_eq!(Encoding::new(2).width, 3);
        assert_eq!(Encoding::new(4).width, 4);
        assert_eq!(Encoding::new(1).width, 2);
    }

    #[test]
    fn valid_encodings_are_the_low_bits() {
        let e = enc();
        let enc_of = |v: i32| (v as u32) & 0b111;
        assert_eq!(
            e.values().map(enc_of).collect::<Vec<_>>(),
            vec![0b110, 0b111, 0b000, 0b001, 0b010]
        );
    }

    fn set_of(p: &str) -> Vec<u32> {
        candidate_set(&enc(), &pattern(p))
            .into_iter()
            .map(|v| v as u32 & 0b111)
            .collect()
    }

    #[test]
    fn two_known_bits_rows() {
        let rows: [(&str, &[u32]); 12] = [
            ("00z", &[0b000, 0b001]),
            ("01z", &[0b010]),
            ("10z", &[]),
            ("11z", &[0b110, 0b111]),
            ("0y0", &[0b000, 0b010]),
            ("0y1", &[0b001]),
            ("1y0", &[0b110]),
            ("1y1", &[0b111]),
            ("x00", &[0b000]),
            ("x01", &[0b001]),
            ("x10", &[0b110, 0b010]),
            ("x11", &[0b111]),
        ];
        for (p, want) in rows {
            let mut got = set_of(p);
            let mut want = want.to_vec();
            got.sort();
            want.sort();
            assert_eq!(got, want, "{p}");
        }
    }

    #[test]
    fn one_known_bit_rows() {
        let rows = [
            ("1yz", 2, 2),
            ("0yz", 3, 1),
            ("x1z", 3, 1),
            ("x0z", 2, 2),
            ("xy1", 2, 2),
            ("xy0", 3, 1),
        ];
        let e = enc();
        for (p, n, known) in rows {
            let got = candidate_set(&e, &pattern(p)).len();
            assert_eq!(got, n, "{p}");
            assert_eq!(e.known_bits(got), known, "{p}");
        }
        assert_eq!(set_of("1yz"), vec![0b110, 0b111]);
        assert_eq!(set_of("xy1"), vec![0b111, 0b001]);
    }

    #[test]
    fn candidate_sizes_exhaustive() {
        let e = enc();
        for mask in 0..27u32 {
            let mut known = vec![None; 3];
            let mut m = mask;
            for k in known.iter_mut() {
                *k = match m % 3 {
                    0 => None,
                    1 => Some(0),
                    _ => Some(1),
                };
                m /= 3;
            }
            let n = candidate_set(&e, &known).len();
            assert!([0, 1, 2, 3, 5].contains(&n), "{known:?} -> {n}");
        }
    }

    #[test]
    fn fold_positions() {
        let e = enc();
        assert_eq!(fold_observation(&e, &obs(0, 0, 0, 1)), (0, 1));
        assert_eq!(fold_observation(&e, &obs(0, 0, 1, 0)), (1, 0));
        assert_eq!(fold_observation(&e, &obs(0, 0, 2, 1)), (2, 1));
        assert_eq!(fold_observation(&e, &obs(0, 0, 31, 1)), (2, 1));
    }

    #[test]
    fn ingest_semantics() {
        let e = enc();
        let m = ingest(e, 4, &[obs(1, 2, 2, 0), obs(1, 2, 1, 1)]).unwrap();
        assert_eq!(m.get(1, 2).candidates, vec![2]);
        assert_eq!(m.get(0, 0).candidates.len(), 5);
        let err = ingest(e, 4, &[obs(1, 2, 2, 1), obs(1, 2, 1, 0)]).unwrap_err();
        assert!(matches!(err, Error::ConflictingObservation { row: 1, col: 2 }));
        let err = ingest(e, 4, &[obs(0, 0, 0, 1), obs(0, 0, 0, 0)]).unwrap_err();
        assert!(matches!(err, Error::ConflictingObservation { .. }));
        let lenient = ingest_lenient(e, 4, &[obs(0, 0, 5, 0), obs(0, 0, 9, 1), obs(0, 1, 0, 1)]).unwrap();
        assert_eq!(lenient.conflicts(), vec![(0, 0)]);
        assert_eq!(lenient.get(0, 1).candidates, vec![-1, 1]);
    }

    #[test]
    fn ingest_order_independent_and_idempotent() {
        let e = enc();
        let base = vec![obs(0, 1, 0, 1), obs(0, 1, 7, 1), obs(3, 4, 1, 0), obs(2, 9, 2, 0)];
        let a = ingest(e, 4, &base).unwrap();
        let mut rev = base.clone();
        rev.reverse();
        rev.extend(base.iter().copied());
        let b = ingest(e, 4, &rev).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
    }

    #[test]
    fn classification_examples() {
        let e = enc();
        let empty = KnowledgeMap::empty(e, 4);
        let g = classify(&empty);
        assert_eq!(g.total.by_known_bits, vec![1024, 0, 0, 0]);
        let one = ingest(e, 4, &[obs(0, 0, 2, 1)]).unwrap();
        assert_eq!(classify(&one).total.by_known_bits, vec![1023, 0, 1, 0]);
        let r = reduced_params(&empty);
        assert_eq!((r.n_bar, r.zeta), (1024, 3.0));
    }

    #[test]
    fn zeta_from_counts() {
        let e = enc();
        let t = Tally {
            by_known_bits: vec![68, 289, 439, 228],
            conflicts: 0,
        };
        let r = ReducedParams::from_tally(&e, &t);
        assert_eq!(r.n_bar, 796);
        assert!((r.zeta - 1.53392).abs() < 1e-5);
    }

    #[test]
    fn all_full_is_degenerate() {
        let e = enc();
        let mut all = Vec::new();
        for row in 0..4 {
            for col in 0..N {
                all.extend([obs(row, col, 0, 0), obs(row, col, 1, 0)]);
            }
        }
        let r = reduced_params(&ingest(e, 4, &all).unwrap());
        assert_eq!(r.n_bar, 0);
        assert!(r.degenerate);
    }

    #[test]
    fn bitmap_counts() {
        let e = enc();
        let m = ingest(e, 4, &[obs(3, 200, 1, 1)]).unwrap();
        let mut buf = Vec::new();
        export_bitmap(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), 1024);
        let known: usize = rows.iter().map(|r| r.split(',').skip(2).take(3).filter(|c| *c != "unknown").count()).sum();
        assert_eq!(known, 1);
        assert!(text.contains("3,200,unknown,1,unknown,-2 -1 2,false"));
    }

    fn weight(m: &KnowledgeMap) -> f64 {
        let r = reduced_params(m);
        r.zeta * r.n_bar as f64
    }

    #[test]
    fn n_bar_and_unknown_weight_never_grow() {
        let e = enc();
        let mut rng = 12345u64;
        let mut map = KnowledgeMap::empty(e, 4);
        let (mut n_bar, mut w) = (1024, weight(&map));
        for _ in 0..3000 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let row = (rng >> 60) as usize % 4;
            let col = (rng >> 40) as usize % N;
            let bit = (rng >> 30) as u32 % 32;
            let value = ((((row * N + col) as u64 * 2654435761) >> 7) % 5) as i32 - 2;
            let o = obs(row, col, bit, ((value as u32) >> bit & 1) as u8);
            map.observe(&o).unwrap();
            let r = reduced_params(&map);
            assert!(r.n_bar <= n_bar);
            assert!(weight(&map) <= w + 1e-9);
            n_bar = r.n_bar;
            w = weight(&map);
        }
    }

    #[test]
    fn zeta_can_rise_when_a_coefficient_completes() {
        let e = enc();
        let before = ingest(e, 1, &[obs(0, 0, 2, 0), obs(0, 0, 1, 0), obs(0, 1, 1, 1)]).unwrap();
        let after = ingest(e, 1, &[obs(0, 0, 2, 0), obs(0, 0, 1, 0), obs(0, 1, 1, 1), obs(0, 0, 0, 1)]).unwrap();
        assert!(reduced_params(&after).zeta > reduced_params(&before).zeta);
        assert!(reduced_params(&after).n_bar < reduced_params(&before).n_bar);
    }

    #[test]
    fn eta4_generic() {
        let e = Encoding::new(4);
        assert_eq!(candidate_set(&e, &[None; 4]).len(), 9);
        // sign bit 1 -> negatives only
        assert_eq!(candidate_set(&e, &[None, None, None, Some(1)]), vec![-4, -3, -2, -1]);
        assert_eq!(e.remaining_bits(9), 4);
    }
}
