//! Exploration of the binary program tree.
//!
//! A tree node is a consumed prefix on which the machine is paused demanding
//! the next input bit. Extending a node by one bit runs the machine forward
//! until it halts (closing the subtree as a program), demands another bit
//! (branching), or gives up (step budget exhausted or a proven control-state
//! cycle). Leaves therefore partition the interval mass of the root exactly:
//! `halted_mass + unresolved_mass = 2^-|root|` as a dyadic identity.
//!
//! Subtrees are independent tasks; partial results merge by concatenation and
//! exact addition, and the assembled report is sorted into interval order, so
//! the outcome is bit-identical no matter how many workers run it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bitcore::{bits_to_phase, BitString, DyadicRational, PhaseFraction};
use crate::machine::{check_prefix_free, machine_hash, Dialect, MachineState, StepOutcome};

/// Exploration limits: maximum program length in bits and the uniform step
/// budget applied to every prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreBudget {
    pub max_len: usize,
    pub max_steps: u64,
}

impl ExploreBudget {
    pub fn new(max_len: usize, max_steps: u64) -> Self {
        assert!(max_len >= 1 && max_steps >= 1, "budgets must be at least 1");
        ExploreBudget { max_len, max_steps }
    }
}

/// A discovered halting program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaltingRecord {
    pub program: BitString,
    pub output: BitString,
    pub phase: PhaseFraction,
    pub steps: u64,
    pub measure: DyadicRational,
}

impl HaltingRecord {
    fn from_halted_state(st: &MachineState) -> Self {
        HaltingRecord {
            measure: DyadicRational::pow2_neg(st.tape.len() as u64),
            phase: bits_to_phase(&st.out),
            program: st.tape.clone(),
            output: st.out.clone(),
            steps: st.steps,
        }
    }
}

/// Exhaustive, exact description of a budgeted exploration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationReport {
    pub budget: ExploreBudget,
    pub dialect: Dialect,
    /// The restriction prefix; empty for a full exploration.
    pub root: BitString,
    /// Halting programs in interval (lexicographic) order.
    pub halted: Vec<HaltingRecord>,
    /// Shallowest unexplored prefixes, in interval order: subtrees stopped by
    /// the step budget or by reaching `max_len` while still demanding bits.
    pub unresolved: Vec<BitString>,
    pub halted_mass: DyadicRational,
    pub unresolved_mass: DyadicRational,
}

impl ExplorationReport {
    /// Total interval mass governed by this report: `2^-|root|`.
    pub fn interval_mass(&self) -> DyadicRational {
        DyadicRational::pow2_neg(self.root.len() as u64)
    }
}

/// Why a restricted exploration could not run.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExploreError {
    #[error("restriction prefix {prefix} is interior to halting program {program}")]
    PrefixInsideProgram { prefix: BitString, program: BitString },
    #[error("max_len {max_len} is smaller than the restriction prefix length {prefix_len}")]
    BudgetBelowPrefix { max_len: usize, prefix_len: usize },
}

#[derive(Default)]
struct Partial {
    halted: Vec<HaltingRecord>,
    unresolved: Vec<BitString>,
}

impl Partial {
    fn merge(mut self, mut right: Partial) -> Partial {
        self.halted.append(&mut right.halted);
        self.unresolved.append(&mut right.unresolved);
        self
    }
}

enum NodeOutcome {
    Halted(HaltingRecord),
    /// Step budget exhausted or a control-state cycle proved non-termination.
    Unresolved(BitString),
    /// Demands another bit while within both budgets.
    Branch(MachineState),
}

/// Run a node forward on its fixed tape until it halts, branches, or is
/// abandoned. A repeat of the full control state `(ip, r0, r1, dialect)`
/// without any new bit consumed proves the run never halts, so the node can
/// be classified unresolved early; the classification is identical to burning
/// the remaining budget. Brent's scheme keeps the check O(1) per step.
fn advance(mut st: MachineState, budget: &ExploreBudget) -> NodeOutcome {
    let mut anchor = (st.ip, st.r0, st.r1, st.dialect);
    let mut anchor_step = st.steps;
    let mut window = 16u64;
    loop {
        if st.steps == budget.max_steps {
            return NodeOutcome::Unresolved(st.tape);
        }
        match st.step() {
            StepOutcome::Halted => return NodeOutcome::Halted(HaltingRecord::from_halted_state(&st)),
            StepOutcome::NeedMoreBits => return NodeOutcome::Branch(st),
            StepOutcome::Executed(_) => {
                let state = (st.ip, st.r0, st.r1, st.dialect);
                if state == anchor {
                    return NodeOutcome::Unresolved(st.tape);
                }
                if st.steps - anchor_step == window {
                    anchor = state;
                    anchor_step = st.steps;
                    window = window.saturating_mul(2);
                }
            }
        }
    }
}

/// Below this prefix length, child subtrees are offered to other workers.
const PARALLEL_DEPTH: usize = 16;

fn explore_subtree(st: MachineState, budget: &ExploreBudget) -> Partial {
    debug_assert!(st.tape.len() < budget.max_len);
    let mut zero = st.clone();
    zero.push_bit(false);
    let mut one = st;
    one.push_bit(true);
    let (left, right) = if zero.tape.len() <= PARALLEL_DEPTH {
        rayon::join(|| handle(zero, budget), || handle(one, budget))
    } else {
        (handle(zero, budget), handle(one, budget))
    };
    left.merge(right)
}

fn handle(st: MachineState, budget: &ExploreBudget) -> Partial {
    match advance(st, budget) {
        NodeOutcome::Halted(rec) => Partial { halted: vec![rec], unresolved: Vec::new() },
        NodeOutcome::Unresolved(prefix) => Partial { halted: Vec::new(), unresolved: vec![prefix] },
        NodeOutcome::Branch(st) => {
            if st.tape.len() == budget.max_len {
                Partial { halted: Vec::new(), unresolved: vec![st.tape] }
            } else {
                explore_subtree(st, budget)
            }
        }
    }
}

fn assemble(root: &BitString, budget: ExploreBudget, dialect: Dialect, mut partial: Partial) -> ExplorationReport {
    partial.halted.sort_by(|a, b| a.program.cmp(&b.program));
    partial.unresolved.sort();
    let halted_mass = partial
        .halted
        .iter()
        .fold(DyadicRational::zero(), |acc, r| acc.add(&r.measure));
    let unresolved_mass = partial
        .unresolved
        .iter()
        .fold(DyadicRational::zero(), |acc, p| {
            acc.add(&DyadicRational::pow2_neg(p.len() as u64))
        });
    ExplorationReport {
        budget,
        dialect,
        root: root.clone(),
        halted: partial.halted,
        unresolved: partial.unresolved,
        halted_mass,
        unresolved_mass,
    }
}

/// Explore the subtree of programs extending `root`. Masses are reported
/// relative to the whole unit interval. Fails if the budget cannot reach the
/// prefix or if the machine halts strictly inside it (the interval then
/// carries no program mass at all).
pub fn explore_from(
    root: &BitString,
    budget: ExploreBudget,
    dialect: Dialect,
) -> Result<ExplorationReport, ExploreError> {
    if budget.max_len < root.len() {
        return Err(ExploreError::BudgetBelowPrefix {
            max_len: budget.max_len,
            prefix_len: root.len(),
        });
    }
    let mut st = MachineState::new(dialect);
    let mut fed = 0usize;
    let partial = loop {
        if st.steps == budget.max_steps {
            // Out of gas while the root interval is still one unresolved node.
            break Partial { halted: Vec::new(), unresolved: vec![root.clone()] };
        }
        match st.step() {
            StepOutcome::Halted => {
                if fed == root.len() {
                    break Partial {
                        halted: vec![HaltingRecord::from_halted_state(&st)],
                        unresolved: Vec::new(),
                    };
                }
                return Err(ExploreError::PrefixInsideProgram {
                    prefix: root.clone(),
                    program: st.tape,
                });
            }
            StepOutcome::NeedMoreBits => {
                if fed < root.len() {
                    st.push_bit(root.get(fed));
                    fed += 1;
                } else if root.len() == budget.max_len {
                    break Partial { halted: Vec::new(), unresolved: vec![root.clone()] };
                } else {
                    break explore_subtree(st, &budget);
                }
            }
            StepOutcome::Executed(_) => {}
        }
    };
    Ok(assemble(root, budget, dialect, partial))
}

/// Explore the whole program tree under the given budgets.
pub fn explore(budget: ExploreBudget, dialect: Dialect) -> ExplorationReport {
    explore_from(&BitString::new(), budget, dialect)
        .expect("unrestricted exploration cannot fail")
}

/// Kraft certificate: the leaf masses tile the root interval exactly and the
/// halting set is prefix-free.
pub fn kraft_check(report: &ExplorationReport) -> bool {
    let programs: Vec<BitString> = report.halted.iter().map(|r| r.program.clone()).collect();
    let total = report.halted_mass.add(&report.unresolved_mass);
    total == report.interval_mass() && check_prefix_free(&programs)
}

/// Cache file problems. `HashMismatch` means the machine definition changed
/// since the cache was written.
#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cache version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("machine definition hash mismatch: cache has {found}, this build is {expected}")]
    HashMismatch { found: String, expected: String },
    #[error("cache field {field} does not parse: {value}")]
    Field { field: &'static str, value: String },
    #[error("cache is internally inconsistent: {0}")]
    Integrity(String),
    #[error("cached budget {cached:?} exceeds requested budget {requested:?}")]
    BudgetNotMonotone { cached: ExploreBudget, requested: ExploreBudget },
    #[error("cached dialect {cached} does not match requested dialect {requested}")]
    DialectMismatch { cached: Dialect, requested: Dialect },
}

pub const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    program: String,
    output: String,
    steps: u64,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    machine_hash: String,
    dialect: Dialect,
    max_len: usize,
    max_steps: u64,
    root: String,
    halted: Vec<CacheRecord>,
    unresolved: Vec<String>,
    halted_mass: String,
    unresolved_mass: String,
}

/// Serialize a report into the versioned, self-describing cache form.
pub fn cache_to_string(report: &ExplorationReport) -> String {
    let file = CacheFile {
        version: CACHE_VERSION,
        machine_hash: machine_hash(),
        dialect: report.dialect,
        max_len: report.budget.max_len,
        max_steps: report.budget.max_steps,
        root: report.root.to_string(),
        halted: report
            .halted
            .iter()
            .map(|r| CacheRecord {
                program: r.program.to_string(),
                output: r.output.to_string(),
                steps: r.steps,
            })
            .collect(),
        unresolved: report.unresolved.iter().map(|p| p.to_string()).collect(),
        halted_mass: report.halted_mass.to_string(),
        unresolved_mass: report.unresolved_mass.to_string(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("cache serialization cannot fail");
    s.push('\n');
    s
}

pub fn save_cache(report: &ExplorationReport, path: &Path) -> Result<(), CacheError> {
    fs::write(path, cache_to_string(report))?;
    Ok(())
}

fn parse_bits(field: &'static str, s: &str) -> Result<BitString, CacheError> {
    s.parse()
        .map_err(|_| CacheError::Field { field, value: s.to_owned() })
}

/// Parse and validate a cache. Derived quantities (phases, measures, masses)
/// are recomputed and cross-checked against the stored ones.
pub fn cache_from_str(text: &str) -> Result<ExplorationReport, CacheError> {
    let file: CacheFile = serde_json::from_str(text)?;
    if file.version != CACHE_VERSION {
        return Err(CacheError::Version { found: file.version, expected: CACHE_VERSION });
    }
    let expected = machine_hash();
    if file.machine_hash != expected {
        return Err(CacheError::HashMismatch { found: file.machine_hash, expected });
    }
    let root = parse_bits("root", &file.root)?;
    let mut halted = Vec::with_capacity(file.halted.len());
    for rec in &file.halted {
        let program = parse_bits("program", &rec.program)?;
        let output = parse_bits("output", &rec.output)?;
        halted.push(HaltingRecord {
            measure: DyadicRational::pow2_neg(program.len() as u64),
            phase: bits_to_phase(&output),
            program,
            output,
            steps: rec.steps,
        });
    }
    let mut unresolved = Vec::with_capacity(file.unresolved.len());
    for p in &file.unresolved {
        unresolved.push(parse_bits("unresolved", p)?);
    }
    let halted_mass: DyadicRational = file
        .halted_mass
        .parse()
        .map_err(|_| CacheError::Field { field: "halted_mass", value: file.halted_mass.clone() })?;
    let unresolved_mass: DyadicRational = file.unresolved_mass.parse().map_err(|_| CacheError::Field {
        field: "unresolved_mass",
        value: file.unresolved_mass.clone(),
    })?;
    let report = ExplorationReport {
        budget: ExploreBudget::new(file.max_len, file.max_steps),
        dialect: file.dialect,
        root,
        halted,
        unresolved,
        halted_mass,
        unresolved_mass,
    };
    let recomputed_halted = report
        .halted
        .iter()
        .fold(DyadicRational::zero(), |acc, r| acc.add(&r.measure));
    if recomputed_halted != report.halted_mass {
        return Err(CacheError::Integrity("halted_mass does not match records".into()));
    }
    let recomputed_unresolved = report
        .unresolved
        .iter()
        .fold(DyadicRational::zero(), |acc, p| acc.add(&DyadicRational::pow2_neg(p.len() as u64)));
    if recomputed_unresolved != report.unresolved_mass {
        return Err(CacheError::Integrity("unresolved_mass does not match frontier".into()));
    }
    if !kraft_check(&report) {
        return Err(CacheError::Integrity("report fails the Kraft certificate".into()));
    }
    Ok(report)
}

pub fn load_cache(path: &Path) -> Result<ExplorationReport, CacheError> {
    cache_from_str(&fs::read_to_string(path)?)
}

/// Continue a cached exploration under a larger budget, reusing every closed
/// subtree. The result is bit-identical to a fresh exploration at the new
/// budget: halting is monotone, so cached records stand, and each unresolved
/// frontier prefix is re-explored under the new limits.
pub fn resume(cached: &ExplorationReport, budget: ExploreBudget) -> Result<ExplorationReport, CacheError> {
    if budget.max_len < cached.budget.max_len || budget.max_steps < cached.budget.max_steps {
        return Err(CacheError::BudgetNotMonotone { cached: cached.budget, requested: budget });
    }
    use rayon::prelude::*;
    let reopened: Vec<Partial> = cached
        .unresolved
        .par_iter()
        .map(|prefix| {
            let report = explore_from(prefix, budget, cached.dialect)
                .expect("frontier prefixes never sit inside a halting program");
            Partial { halted: report.halted, unresolved: report.unresolved }
        })
        .collect();
    let mut merged = Partial { halted: cached.halted.clone(), unresolved: Vec::new() };
    for part in reopened {
        merged = merged.merge(part);
    }
    Ok(assemble(&cached.root, budget, cached.dialect, merged))
}
