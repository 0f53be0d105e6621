//! Two-part-program path ensembles, coarse-grained amplitudes, the
//! decoherence functional, the ε-consistency test, and probability
//! assignment.
//!
//! A path ensemble is a header `p0` together with a path length `k`: the
//! machine reads `p0` first, then `k` more bits select one path `w`, and the
//! output of the halted run, read as a binary fraction of a turn, is the
//! action `S(w)`. Construction validates that every one of the `2^k` paths
//! halts within the declared budget consuming exactly `p0·w`, so the paths
//! are `2^k` distinct programs of measure `2^-(|p0|+k)` each and the ensemble
//! covers measure `2^-|p0|`.

use std::fmt;

use crate::bitcore::{BitString, DyadicRational, PhaseFraction};
use crate::machine::{run, Dialect, ExecResult};
use crate::pathsum::{ExactAmplitude, SignedDyadic};

/// Hard cap on `k`; ensembles materialize all `2^k` paths.
pub const MAX_PATH_BITS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EventsError {
    #[error("path bits k={0} exceeds the supported maximum {MAX_PATH_BITS}")]
    TooManyPathBits(usize),
    #[error("path {w} did not halt within {budget} steps")]
    PathDidNotHalt { w: BitString, budget: u64 },
    #[error("path {w} halted consuming {consumed} bits instead of the full {expected}")]
    PathConsumedWrongLength { w: BitString, consumed: usize, expected: usize },
    #[error("grain over {found} path bits cannot apply to an ensemble with k={expected}")]
    GrainEnsembleMismatch { found: usize, expected: usize },
    #[error("grains overlap on path {0}; events must be mutually exclusive")]
    OverlappingGrains(BitString),
    #[error("partition does not cover path {0}")]
    NonExhaustivePartition(BitString),
    #[error("grain pattern {0:?} is malformed; want bits, '*' wildcards, or a comma list")]
    BadGrainSpec(String),
    #[error("consistency ratio is undefined for a zero amplitude")]
    ZeroAmplitude,
}

/// A validated two-part-program path ensemble.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathEnsemble {
    header: BitString,
    path_len: usize,
    max_steps: u64,
    dialect: Dialect,
    /// Action table indexed by the path bits read MSB-first as an integer.
    actions: Vec<PhaseFraction>,
    outputs: Vec<BitString>,
}

impl PathEnsemble {
    /// Run all `2^k` paths and validate the two-part-program contract.
    pub fn new(
        header: BitString,
        path_len: usize,
        max_steps: u64,
        dialect: Dialect,
    ) -> Result<Self, EventsError> {
        if path_len > MAX_PATH_BITS {
            return Err(EventsError::TooManyPathBits(path_len));
        }
        let expected = header.len() + path_len;
        let mut actions = Vec::with_capacity(1 << path_len);
        let mut outputs = Vec::with_capacity(1 << path_len);
        for raw in 0u64..1 << path_len {
            let w = BitString::from_u64_msb(raw, path_len);
            let program = header.concat(&w);
            match run(&program, max_steps, dialect) {
                ExecResult::Halted { program: consumed, output, phase, .. } => {
                    if consumed.len() != expected {
                        return Err(EventsError::PathConsumedWrongLength {
                            w,
                            consumed: consumed.len(),
                            expected,
                        });
                    }
                    actions.push(phase);
                    outputs.push(output);
                }
                ExecResult::OutOfGas { .. } => {
                    return Err(EventsError::PathDidNotHalt { w, budget: max_steps })
                }
            }
        }
        Ok(PathEnsemble { header, path_len, max_steps, dialect, actions, outputs })
    }

    pub fn header(&self) -> &BitString {
        &self.header
    }

    pub fn path_len(&self) -> usize {
        self.path_len
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }

    pub fn max_steps(&self) -> u64 {
        self.max_steps
    }

    /// The action `S(w)` in turns.
    pub fn action(&self, w: &BitString) -> PhaseFraction {
        self.actions[path_index(w)].clone()
    }

    /// The raw machine output along path `w`.
    pub fn output(&self, w: &BitString) -> &BitString {
        &self.outputs[path_index(w)]
    }

    /// Measure of a single path: `2^-(|p0|+k)`.
    pub fn path_measure(&self) -> DyadicRational {
        DyadicRational::pow2_neg((self.header.len() + self.path_len) as u64)
    }

    fn check_grain(&self, g: &CoarseGrain) -> Result<(), EventsError> {
        if g.path_len != self.path_len {
            return Err(EventsError::GrainEnsembleMismatch {
                found: g.path_len,
                expected: self.path_len,
            });
        }
        Ok(())
    }
}

fn path_index(w: &BitString) -> usize {
    let mut idx = 0usize;
    for b in w.iter() {
        idx = (idx << 1) | b as usize;
    }
    idx
}

/// A finite predicate over the path space `{0,1}^k`, stored as the explicit
/// sorted subset it selects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseGrain {
    path_len: usize,
    /// Sorted, deduplicated path indices (paths read MSB-first).
    members: Vec<u64>,
}

impl CoarseGrain {
    pub fn empty(path_len: usize) -> Self {
        CoarseGrain { path_len, members: Vec::new() }
    }

    pub fn full(path_len: usize) -> Self {
        CoarseGrain { path_len, members: (0..1u64 << path_len).collect() }
    }

    pub fn from_paths<'a>(
        path_len: usize,
        paths: impl IntoIterator<Item = &'a BitString>,
    ) -> Result<Self, EventsError> {
        let mut members = Vec::new();
        for w in paths {
            if w.len() != path_len {
                return Err(EventsError::GrainEnsembleMismatch { found: w.len(), expected: path_len });
            }
            members.push(path_index(w) as u64);
        }
        members.sort_unstable();
        members.dedup();
        Ok(CoarseGrain { path_len, members })
    }

    /// Parse a grain spec: either a fixed-bit mask like `0**1` (with `*`
    /// wildcards) or an explicit comma-separated list of paths.
    pub fn parse(path_len: usize, spec: &str) -> Result<Self, EventsError> {
        let bad = || EventsError::BadGrainSpec(spec.to_owned());
        if spec.contains(',') || !spec.contains('*') {
            let paths: Result<Vec<BitString>, _> =
                spec.split(',').map(|s| s.trim().parse::<BitString>().map_err(|_| bad())).collect();
            return Self::from_paths(path_len, &paths?);
        }
        if spec.len() != path_len {
            return Err(bad());
        }
        let mut fixed_mask = 0u64;
        let mut fixed_bits = 0u64;
        for (i, c) in spec.chars().enumerate() {
            let bit = 1u64 << (path_len - 1 - i);
            match c {
                '*' => {}
                '0' => fixed_mask |= bit,
                '1' => {
                    fixed_mask |= bit;
                    fixed_bits |= bit;
                }
                _ => return Err(bad()),
            }
        }
        let members =
            (0..1u64 << path_len).filter(|w| w & fixed_mask == fixed_bits).collect();
        Ok(CoarseGrain { path_len, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn paths(&self) -> impl Iterator<Item = BitString> + '_ {
        let k = self.path_len;
        self.members.iter().map(move |&w| BitString::from_u64_msb(w, k))
    }

    pub fn complement(&self) -> CoarseGrain {
        let all: Vec<u64> =
            (0..1u64 << self.path_len).filter(|w| self.members.binary_search(w).is_err()).collect();
        CoarseGrain { path_len: self.path_len, members: all }
    }

    pub fn intersects(&self, other: &CoarseGrain) -> Option<u64> {
        self.members.iter().copied().find(|w| other.members.binary_search(w).is_ok())
    }

    /// Disjoint union; overlapping grains are an error.
    pub fn union_disjoint(&self, other: &CoarseGrain) -> Result<CoarseGrain, EventsError> {
        if other.path_len != self.path_len {
            return Err(EventsError::GrainEnsembleMismatch {
                found: other.path_len,
                expected: self.path_len,
            });
        }
        if let Some(w) = self.intersects(other) {
            return Err(EventsError::OverlappingGrains(BitString::from_u64_msb(w, self.path_len)));
        }
        let mut members = [self.members.as_slice(), other.members.as_slice()].concat();
        members.sort_unstable();
        Ok(CoarseGrain { path_len: self.path_len, members })
    }
}

impl fmt::Display for CoarseGrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for w in self.paths() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{w}")?;
            first = false;
        }
        Ok(())
    }
}

/// The coarse-grained amplitude `Σ_{w in g} 2^-(|p0|+k) e^{2πi S(w)}`, exact.
pub fn grain_amplitude(e: &PathEnsemble, g: &CoarseGrain) -> Result<ExactAmplitude, EventsError> {
    e.check_grain(g)?;
    let weight = SignedDyadic::from_unsigned(&e.path_measure());
    let terms = g.members.iter().map(|&w| (e.actions[w as usize].clone(), weight.clone()));
    Ok(ExactAmplitude::with_scale(terms, 0))
}

/// Amplitude of a disjoint union, which is exactly the sum of the grain
/// amplitudes (additivity).
pub fn grain_union_amplitude(
    e: &PathEnsemble,
    g1: &CoarseGrain,
    g2: &CoarseGrain,
) -> Result<ExactAmplitude, EventsError> {
    let union = g1.union_disjoint(g2)?;
    grain_amplitude(e, &union)
}

/// The decoherence functional `Re A(w̃)·conj(A(w̃'))`. When the phase-grid
/// product cancels syntactically the result is exactly 0; otherwise it is
/// evaluated in floats.
pub fn decoherence(a1: &ExactAmplitude, a2: &ExactAmplitude) -> f64 {
    let product = a1.mul(&a2.conj());
    if product.real_part_symbolically_zero() {
        0.0
    } else {
        product.to_complex().re
    }
}

/// Verdict of the ε-accuracy probability-sum-rule test.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyVerdict {
    /// `Re A(w̃)·conj(A(w̃'))`.
    pub d: f64,
    /// `d^2 / (|A(w̃)|^2 |A(w̃')|^2)`.
    pub ratio: f64,
    pub epsilon: f64,
    pub consistent: bool,
    /// The decoherence functional cancelled on the phase grid itself.
    pub symbolic_zero: bool,
}

/// Test the pair against the sum rule at accuracy `epsilon`. A zero
/// amplitude on either side leaves the ratio undefined.
pub fn consistency(
    a1: &ExactAmplitude,
    a2: &ExactAmplitude,
    epsilon: f64,
) -> Result<ConsistencyVerdict, EventsError> {
    let m1 = a1.to_complex().norm_sqr();
    let m2 = a2.to_complex().norm_sqr();
    if a1.is_zero() || a2.is_zero() || m1 == 0.0 || m2 == 0.0 {
        return Err(EventsError::ZeroAmplitude);
    }
    let product = a1.mul(&a2.conj());
    let symbolic_zero = product.real_part_symbolically_zero();
    let d = if symbolic_zero { 0.0 } else { product.to_complex().re };
    let ratio = (d * d) / (m1 * m2);
    Ok(ConsistencyVerdict { d, ratio, epsilon, consistent: ratio <= epsilon, symbolic_zero })
}

/// Per-grain numbers for a full partition of the path space.
#[derive(Debug, Clone)]
pub struct ProbabilityReport {
    /// `|A(g_i)|^2`, unnormalized (the paper fixes no constant).
    pub unnormalized: Vec<f64>,
    /// Normalized within the partition: each entry divided by the
    /// partition's total `|A|^2`.
    pub normalized: Vec<f64>,
    /// Pairwise sum-rule verdicts for `i < j`; `None` when a zero amplitude
    /// leaves the ratio undefined.
    pub pairwise: Vec<(usize, usize, Option<ConsistencyVerdict>)>,
    /// `|A(∪ g_i)|^2 − Σ |A(g_i)|^2`: the residual that vanishes exactly
    /// when every pair decoheres.
    pub sum_rule_residual: f64,
    pub epsilon: f64,
    /// True iff every defined pairwise verdict is consistent.
    pub all_consistent: bool,
}

/// Evaluate a disjoint, jointly exhaustive partition of the path space:
/// unnormalized and normalized squared amplitudes, all pairwise consistency
/// verdicts, and the sum-rule residual.
pub fn probabilities(
    e: &PathEnsemble,
    partition: &[CoarseGrain],
    epsilon: f64,
) -> Result<ProbabilityReport, EventsError> {
    let mut covered = CoarseGrain::empty(e.path_len());
    for g in partition {
        e.check_grain(g)?;
        covered = covered.union_disjoint(g)?;
    }
    if covered.len() != 1 << e.path_len() {
        let missing = covered
            .complement()
            .paths()
            .next()
            .expect("non-full cover misses some path");
        return Err(EventsError::NonExhaustivePartition(missing));
    }
    let amps: Vec<ExactAmplitude> =
        partition.iter().map(|g| grain_amplitude(e, g)).collect::<Result<_, _>>()?;
    let unnormalized: Vec<f64> = amps.iter().map(|a| a.to_complex().norm_sqr()).collect();
    let total: f64 = unnormalized.iter().sum();
    let normalized: Vec<f64> =
        unnormalized.iter().map(|u| if total > 0.0 { u / total } else { 0.0 }).collect();
    let mut pairwise = Vec::new();
    let mut all_consistent = true;
    for i in 0..amps.len() {
        for j in i + 1..amps.len() {
            let verdict = match consistency(&amps[i], &amps[j], epsilon) {
                Ok(v) => {
                    all_consistent &= v.consistent;
                    Some(v)
                }
                Err(EventsError::ZeroAmplitude) => None,
                Err(other) => return Err(other),
            };
            pairwise.push((i, j, verdict));
        }
    }
    let full = grain_amplitude(e, &CoarseGrain::full(e.path_len()))?;
    let sum_rule_residual = full.to_complex().norm_sqr() - total;
    Ok(ProbabilityReport {
        unnormalized,
        normalized,
        pairwise,
        sum_rule_residual,
        epsilon,
        all_consistent,
    })
}

/// Fixed ensemble headers used by tests and documentation. Each drives the
/// final taken jump's offset bits with the path bits, landing on overlapped
/// decode chains that all halt. The action tables are validated by
/// construction.
pub mod known_headers {
    /// k=1: S(0) = 0 (output ""), S(1) = 1/2 (output "1").
    pub const K1_HALF: &str = "110001111100000010001100111";
    /// k=1: S(0) = S(1) = 0 (both halt with empty output).
    pub const K1_DEGENERATE: &str = "110011111100000010001100111";
    /// k=1: S(0) = 0 (output "0"), S(1) = 1/4 (output "01").
    pub const K1_QUARTER: &str = "00110001111100000010001100111";
    /// k=2 double slit: S(00) = 1/2, S(01) = 0, S(10) = 3/4, S(11) = 0.
    pub const K2_DOUBLE_SLIT: &str = "11000011110001111000110011";
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn ensemble(header: &str, k: usize) -> PathEnsemble {
        PathEnsemble::new(bs(header), k, 1000, Dialect::A).unwrap()
    }

    /// Independent float route: rerun the machine per path and sum complex
    /// phasors directly.
    fn float_oracle(e: &PathEnsemble, g: &CoarseGrain) -> Complex64 {
        let weight = e.path_measure().to_f64();
        g.paths()
            .map(|w| {
                let program = e.header().concat(&w);
                let phase = match run(&program, e.max_steps(), e.dialect()) {
                    ExecResult::Halted { phase, .. } => phase.to_f64(),
                    ExecResult::OutOfGas { .. } => panic!("validated path failed to halt"),
                };
                Complex64::from_polar(weight, std::f64::consts::TAU * phase)
            })
            .sum()
    }

    #[test]
    fn known_header_action_tables() {
        let e = ensemble(known_headers::K1_HALF, 1);
        assert!(e.action(&bs("0")).is_zero());
        assert_eq!(e.action(&bs("1")).to_f64(), 0.5);
        assert_eq!(e.output(&bs("1")), &bs("1"));

        let e = ensemble(known_headers::K1_DEGENERATE, 1);
        assert!(e.action(&bs("0")).is_zero());
        assert!(e.action(&bs("1")).is_zero());

        let e = ensemble(known_headers::K1_QUARTER, 1);
        assert!(e.action(&bs("0")).is_zero());
        assert_eq!(e.action(&bs("1")).to_f64(), 0.25);
        assert_eq!(e.output(&bs("1")), &bs("01"));

        let e = ensemble(known_headers::K2_DOUBLE_SLIT, 2);
        assert_eq!(e.action(&bs("00")).to_f64(), 0.5);
        assert!(e.action(&bs("01")).is_zero());
        assert_eq!(e.action(&bs("10")).to_f64(), 0.75);
        assert!(e.action(&bs("11")).is_zero());
    }

    #[test]
    fn validation_rejects_bad_headers() {
        // An empty header cannot make every 4-bit path halt.
        assert!(matches!(
            PathEnsemble::new(bs(""), 4, 100, Dialect::A),
            Err(EventsError::PathDidNotHalt { .. })
        ));
        // 1111 halts before reading any path bit.
        assert!(matches!(
            PathEnsemble::new(bs("1111"), 1, 100, Dialect::A),
            Err(EventsError::PathConsumedWrongLength { .. })
        ));
    }

    #[test]
    fn grain_amplitude_examples() {
        // S(0)=0, S(1)=1/2: the full space cancels, singletons do not.
        let e = ensemble(known_headers::K1_HALF, 1);
        let full = grain_amplitude(&e, &CoarseGrain::full(1)).unwrap();
        assert!(full.is_zero() || full.to_complex().norm() == 0.0);

        let zero_only = grain_amplitude(&e, &CoarseGrain::parse(1, "0").unwrap()).unwrap();
        let expected = ExactAmplitude::term(
            PhaseFraction::zero(),
            SignedDyadic::from_unsigned(&e.path_measure()),
        );
        assert_eq!(zero_only, expected);

        let empty = grain_amplitude(&e, &CoarseGrain::empty(1)).unwrap();
        assert!(empty.is_zero());
    }

    #[test]
    fn union_additivity_exact() {
        let e = ensemble(known_headers::K2_DOUBLE_SLIT, 2);
        let g1 = CoarseGrain::parse(2, "0*").unwrap();
        let g2 = CoarseGrain::parse(2, "1*").unwrap();
        let union = grain_union_amplitude(&e, &g1, &g2).unwrap();
        let sum = grain_amplitude(&e, &g1)
            .unwrap()
            .add(&grain_amplitude(&e, &g2).unwrap())
            .unwrap();
        assert_eq!(union, sum);

        // Overlap is an error.
        let overlapping = CoarseGrain::parse(2, "00,01,10").unwrap();
        assert!(matches!(
            grain_union_amplitude(&e, &g1, &overlapping),
            Err(EventsError::OverlappingGrains(_))
        ));

        // Union with the empty grain is the identity.
        let with_empty = grain_union_amplitude(&e, &g1, &CoarseGrain::empty(2)).unwrap();
        assert_eq!(with_empty, grain_amplitude(&e, &g1).unwrap());
    }

    #[test]
    fn complement_covers_full_space() {
        let e = ensemble(known_headers::K2_DOUBLE_SLIT, 2);
        let g = CoarseGrain::parse(2, "*1").unwrap();
        let total = grain_amplitude(&e, &g)
            .unwrap()
            .add(&grain_amplitude(&e, &g.complement()).unwrap())
            .unwrap();
        assert_eq!(total, grain_amplitude(&e, &CoarseGrain::full(2)).unwrap());
    }

    #[test]
    fn decoherence_examples() {
        // Orthogonal quarter-turn pair.
        let a1 = ExactAmplitude::term(PhaseFraction::zero(), "3/2^5".parse().unwrap());
        let a2 = ExactAmplitude::term("1/2^2".parse().unwrap(), "3/2^5".parse().unwrap());
        assert_eq!(decoherence(&a1, &a2), 0.0);

        // Equal amplitudes of weight c give c^2.
        let c = ExactAmplitude::term(PhaseFraction::zero(), "1/2^3".parse().unwrap());
        assert!((decoherence(&c, &c) - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn decoherence_matches_float_oracle_on_double_slit() {
        let e = ensemble(known_headers::K2_DOUBLE_SLIT, 2);
        let g1 = CoarseGrain::parse(2, "*0").unwrap();
        let g2 = CoarseGrain::parse(2, "*1").unwrap();
        let a1 = grain_amplitude(&e, &g1).unwrap();
        let a2 = grain_amplitude(&e, &g2).unwrap();
        let exact = decoherence(&a1, &a2);
        let float = (float_oracle(&e, &g1) * float_oracle(&e, &g2).conj()).re;
        assert!((exact - float).abs() < 1e-24);
    }

    #[test]
    fn consistency_examples() {
        let a = ExactAmplitude::term(PhaseFraction::zero(), "1/2^2".parse().unwrap());
        let b = ExactAmplitude::term("1/2^2".parse().unwrap(), "1/2^2".parse().unwrap());
        let v = consistency(&a, &b, 1e-9).unwrap();
        assert_eq!(v.ratio, 0.0);
        assert!(v.consistent && v.symbolic_zero);

        let v = consistency(&a, &a, 0.5).unwrap();
        assert!((v.ratio - 1.0).abs() < 1e-12);
        assert!(!v.consistent);

        // One-eighth turn apart with equal moduli: ratio = cos²(π/4) = 1/2.
        let rotated = ExactAmplitude::term("1/2^3".parse().unwrap(), "1/2^2".parse().unwrap());
        let v = consistency(&a, &rotated, 0.6).unwrap();
        assert!((v.ratio - 0.5).abs() < 1e-12);
        assert!(v.consistent);

        assert!(matches!(
            consistency(&a, &ExactAmplitude::zero(), 0.5),
            Err(EventsError::ZeroAmplitude)
        ));
    }

    #[test]
    fn probabilities_quarter_turn_pair() {
        // S(0)=0, S(1)=1/4: orthogonal phases, equal weights.
        let e = ensemble(known_headers::K1_QUARTER, 1);
        let partition = [CoarseGrain::parse(1, "0").unwrap(), CoarseGrain::parse(1, "1").unwrap()];
        let report = probabilities(&e, &partition, 1e-9).unwrap();
        assert!((report.normalized[0] - 0.5).abs() < 1e-12);
        assert!((report.normalized[1] - 0.5).abs() < 1e-12);
        assert!(report.all_consistent);
        assert!(report.sum_rule_residual.abs() < 1e-24);
    }

    #[test]
    fn probabilities_equal_phase_pair_is_inconsistent() {
        // S(0)=S(1)=0: ratio 1, residual 2|A_0|^2.
        let e = ensemble(known_headers::K1_DEGENERATE, 1);
        let partition = [CoarseGrain::parse(1, "0").unwrap(), CoarseGrain::parse(1, "1").unwrap()];
        let report = probabilities(&e, &partition, 0.5).unwrap();
        let (_, _, verdict) = &report.pairwise[0];
        let verdict = verdict.as_ref().unwrap();
        assert!((verdict.ratio - 1.0).abs() < 1e-12);
        assert!(!report.all_consistent);
        assert!((report.sum_rule_residual - 2.0 * report.unnormalized[0]).abs() < 1e-24);
    }

    #[test]
    fn probabilities_single_grain_partition() {
        let e = ensemble(known_headers::K1_QUARTER, 1);
        let report = probabilities(&e, &[CoarseGrain::full(1)], 1e-9).unwrap();
        assert_eq!(report.normalized, vec![1.0]);
        assert!(report.pairwise.is_empty());
    }

    #[test]
    fn probabilities_rejects_bad_partitions() {
        let e = ensemble(known_headers::K2_DOUBLE_SLIT, 2);
        let partial = [CoarseGrain::parse(2, "00").unwrap()];
        assert!(matches!(
            probabilities(&e, &partial, 1e-9),
            Err(EventsError::NonExhaustivePartition(_))
        ));
        let overlapping = [CoarseGrain::parse(2, "0*").unwrap(), CoarseGrain::parse(2, "00,10,11").unwrap()];
        assert!(matches!(
            probabilities(&e, &overlapping, 1e-9),
            Err(EventsError::OverlappingGrains(_))
        ));
    }

    #[test]
    fn grain_parsing() {
        let g = CoarseGrain::parse(4, "0**1").unwrap();
        let paths: Vec<String> = g.paths().map(|w| w.to_string()).collect();
        assert_eq!(paths, vec!["0001", "0011", "0101", "0111"]);

        let list = CoarseGrain::parse(2, "10,01").unwrap();
        assert_eq!(list.len(), 2);

        assert!(CoarseGrain::parse(3, "0*").is_err());
        assert!(CoarseGrain::parse(2, "0x").is_err());
        assert!(matches!(
            grain_amplitude(
                &ensemble(known_headers::K1_HALF, 1),
                &CoarseGrain::parse(2, "0*").unwrap()
            ),
            Err(EventsError::GrainEnsembleMismatch { .. })
        ));
    }

    #[test]
    fn brute_force_equivalence_rescaled() {
        // Compare the exact amplitude against the independent float route at
        // unit path weight.
        let cases = [
            (known_headers::K2_DOUBLE_SLIT, 2, vec!["00", "0*", "*1", "00,11", "1*", "01,10"]),
            (known_headers::K1_HALF, 1, vec!["0", "1", "0,1"]),
            (known_headers::K1_QUARTER, 1, vec!["0", "1", "0,1"]),
            (known_headers::K1_DEGENERATE, 1, vec!["0", "1", "0,1"]),
        ];
        for (header, k, specs) in cases {
            let e = ensemble(header, k);
            let rescale = 1.0 / e.path_measure().to_f64();
            for spec in specs {
                let g = CoarseGrain::parse(k, spec).unwrap();
                let exact = grain_amplitude(&e, &g).unwrap().to_complex() * rescale;
                let float = float_oracle(&e, &g) * rescale;
                assert!((exact - float).norm() < 1e-10, "grain {spec}: {exact} vs {float}");
            }
        }
    }
}
