//! The dialect-translation prefix and the sub-integral containment check.
//!
//! The XLATE opcode `1110` is the translation program between the two
//! dialects: inputs beginning with it are interpreted, after one step, as
//! dialect-B programs. Restricting exploration to the `1110` interval and
//! comparing against a plain dialect-B exploration at the step-shifted
//! budget therefore tests, record by record, that the restricted sum is the
//! B-sum scaled by exactly `2^-4`.
//!
//! The identity is stated for budgets where no dialect-B halting program
//! executes a jump clamped at bit 0 (a clamped target shifts differently
//! under the 4-bit embedding). Such a program needs at least 16 bits, so
//! every budget with `max_len <= 19` is safe; mismatches at larger budgets
//! would be reported, not hidden.

use crate::bitcore::{BitString, DyadicRational};
use crate::enumerator::{explore, explore_from, ExploreBudget, ExplorationReport, ExploreError};
use crate::machine::Dialect;
use crate::pathsum::{sigma_halted, ExactAmplitude};

/// The program prefix realizing dialect translation, with its measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationPrefix {
    pub bits: BitString,
    pub measure: DyadicRational,
}

/// `1110`, measure `2^-4`.
pub fn translation_prefix() -> TranslationPrefix {
    let bits: BitString = "1110".parse().expect("literal bits");
    let measure = DyadicRational::pow2_neg(bits.len() as u64);
    TranslationPrefix { bits, measure }
}

/// Explore only programs extending `prefix`; masses stay relative to the
/// whole unit interval.
pub fn restricted_report(
    budget: ExploreBudget,
    prefix: &BitString,
    dialect: Dialect,
) -> Result<ExplorationReport, ExploreError> {
    explore_from(prefix, budget, dialect)
}

/// Outcome of [`subintegral_check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubintegralVerdict {
    pub pass: bool,
    /// Description of the first difference, when failing.
    pub first_mismatch: Option<String>,
    /// Number of halting records matched pairwise.
    pub matched_records: usize,
    /// The `1110`-restricted halted phase sum.
    pub restricted_sum: ExactAmplitude,
    /// The dialect-B halted phase sum scaled by `2^-4`.
    pub scaled_inner_sum: ExactAmplitude,
}

/// Compare a restricted report against an inner report that should embed
/// into it behind `prefix` with one extra step. Exposed so a deliberately
/// mismatched pairing can serve as a negative control.
pub fn compare_embedding(
    prefix: &BitString,
    restricted: &ExplorationReport,
    inner: &ExplorationReport,
) -> SubintegralVerdict {
    let scale = DyadicRational::pow2_neg(prefix.len() as u64);
    let restricted_sum = sigma_halted(restricted);
    let scaled_inner_sum = sigma_halted(inner).scale_by(&scale);
    let fail = |msg: String, matched: usize| SubintegralVerdict {
        pass: false,
        first_mismatch: Some(msg),
        matched_records: matched,
        restricted_sum: restricted_sum.clone(),
        scaled_inner_sum: scaled_inner_sum.clone(),
    };
    if restricted.halted.len() != inner.halted.len() {
        return fail(
            format!(
                "restricted side has {} halting records, inner side has {}",
                restricted.halted.len(),
                inner.halted.len()
            ),
            0,
        );
    }
    for (i, (outer, inner_rec)) in restricted.halted.iter().zip(&inner.halted).enumerate() {
        let expected_program = prefix.concat(&inner_rec.program);
        if outer.program != expected_program {
            return fail(
                format!("record {i}: program {} vs embedded {}", outer.program, expected_program),
                i,
            );
        }
        if outer.output != inner_rec.output {
            return fail(
                format!(
                    "record {i} ({}): output {} vs {}",
                    outer.program, outer.output, inner_rec.output
                ),
                i,
            );
        }
        if outer.steps != inner_rec.steps + 1 {
            return fail(
                format!(
                    "record {i} ({}): steps {} vs {} + 1",
                    outer.program, outer.steps, inner_rec.steps
                ),
                i,
            );
        }
        if outer.measure != inner_rec.measure.mul(&scale) {
            return fail(
                format!(
                    "record {i} ({}): measure {} vs {} scaled",
                    outer.program, outer.measure, inner_rec.measure
                ),
                i,
            );
        }
    }
    if restricted.unresolved_mass != inner.unresolved_mass.mul(&scale) {
        return fail(
            format!(
                "unresolved mass {} vs {} scaled",
                restricted.unresolved_mass, inner.unresolved_mass
            ),
            restricted.halted.len(),
        );
    }
    if restricted_sum != scaled_inner_sum {
        return fail("halted phase sums differ".to_owned(), restricted.halted.len());
    }
    SubintegralVerdict {
        pass: true,
        first_mismatch: None,
        matched_records: restricted.halted.len(),
        restricted_sum,
        scaled_inner_sum,
    }
}

/// Verify that the `1110`-restricted sub-integral of dialect A equals the
/// dialect-B integral scaled by `2^-4`: same programs behind the prefix,
/// same outputs, one extra step for XLATE, and the exact amplitude identity.
/// Budgets too small to fit any B-program behind the prefix pass vacuously.
pub fn subintegral_check(budget: ExploreBudget) -> SubintegralVerdict {
    let prefix = translation_prefix().bits;
    let restricted = explore_from(&prefix, budget, Dialect::A)
        .expect("the XLATE prefix is live within any valid budget");
    if budget.max_len <= prefix.len() || budget.max_steps < 2 {
        let empty = restricted.halted.is_empty();
        return SubintegralVerdict {
            pass: empty,
            first_mismatch: (!empty)
                .then(|| "halting records inside a budget with no room for them".to_owned()),
            matched_records: 0,
            restricted_sum: sigma_halted(&restricted),
            scaled_inner_sum: ExactAmplitude::zero(),
        };
    }
    let inner_budget = ExploreBudget::new(budget.max_len - prefix.len(), budget.max_steps - 1);
    let inner = explore(inner_budget, Dialect::B);
    compare_embedding(&prefix, &restricted, &inner)
}
