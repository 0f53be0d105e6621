//! A concrete prefix-free universal machine: a self-delimiting two-counter
//! bytecode interpreter.
//!
//! Input bits are consumed only at instruction decode, so the set of halting
//! input prefixes is prefix-free by construction. The opcode table (dialect A):
//!
//! ```text
//! 00          OUT0    append 0 to the output
//! 01          OUT1    append 1 to the output
//! 100 r       INC r   increment counter r (1 selector bit: r0 or r1)
//! 101 r       DEC r   decrement counter r, saturating at 0
//! 110 r dddd  JNZ     if counter r != 0, ip <- max(0, S - (d+1)) where S is
//!                     the bit index where this instruction began and d is the
//!                     4-bit offset, MSB first; otherwise fall through
//! 1110        XLATE   switch to dialect B for the remainder of the run
//! 1111        HALT
//! ```
//!
//! Dialect B differs from A only in that OUT0 and OUT1 exchange meanings.
//! Every instruction, including XLATE and HALT, costs exactly one step. Jump
//! targets may land mid-opcode; decoding simply restarts from that bit
//! position, which keeps execution a deterministic function of the consumed
//! prefix.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bitcore::{bits_to_phase, BitString, PhaseFraction};

/// Which of the two OUT-swapped languages the machine is speaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dialect {
    A,
    B,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::A => "A",
            Dialect::B => "B",
        })
    }
}

impl std::str::FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Dialect::A),
            "B" | "b" => Ok(Dialect::B),
            other => Err(format!("unknown dialect {other:?}; expected A or B")),
        }
    }
}

/// Counter selector carried by INC/DEC/JNZ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reg {
    R0,
    R1,
}

/// A decoded instruction. `Out` carries the bit actually emitted, with the
/// dialect swap already applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instr {
    Out(bool),
    Inc(Reg),
    Dec(Reg),
    Jnz { reg: Reg, offset: u8 },
    Xlate,
    Halt,
}

impl Instr {
    /// Mnemonic used in the textual trace.
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Instr::Out(false) => "OUT0",
            Instr::Out(true) => "OUT1",
            Instr::Inc(Reg::R0) => "INC0",
            Instr::Inc(Reg::R1) => "INC1",
            Instr::Dec(Reg::R0) => "DEC0",
            Instr::Dec(Reg::R1) => "DEC1",
            Instr::Jnz { .. } => "JNZ",
            Instr::Xlate => "XLATE",
            Instr::Halt => "HALT",
        }
    }
}

/// Outcome of decoding at a bit position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decode {
    /// A complete instruction and the number of bits it occupies.
    Complete { instr: Instr, width: usize },
    /// The tape ends mid-opcode; the caller must supply more bits.
    NeedMoreBits,
}

/// Decode the unique prefix-free opcode beginning at `ip`, or signal that
/// more input bits are required.
pub fn decode_instruction(tape: &BitString, ip: usize, dialect: Dialect) -> Decode {
    let bit = |i: usize| tape.try_get(i);
    macro_rules! need {
        ($e:expr) => {
            match $e {
                Some(b) => b,
                None => return Decode::NeedMoreBits,
            }
        };
    }
    let b0 = need!(bit(ip));
    if !b0 {
        // 0x: OUT
        let b1 = need!(bit(ip + 1));
        let emitted = match dialect {
            Dialect::A => b1,
            Dialect::B => !b1,
        };
        return Decode::Complete { instr: Instr::Out(emitted), width: 2 };
    }
    let b1 = need!(bit(ip + 1));
    let b2 = need!(bit(ip + 2));
    if !b1 {
        // 10x r: INC / DEC
        let r = if need!(bit(ip + 3)) { Reg::R1 } else { Reg::R0 };
        let instr = if b2 { Instr::Dec(r) } else { Instr::Inc(r) };
        return Decode::Complete { instr, width: 4 };
    }
    if !b2 {
        // 110 r dddd: JNZ
        let r = if need!(bit(ip + 3)) { Reg::R1 } else { Reg::R0 };
        let mut d = 0u8;
        for k in 0..4 {
            d = (d << 1) | need!(bit(ip + 4 + k)) as u8;
        }
        return Decode::Complete { instr: Instr::Jnz { reg: r, offset: d }, width: 8 };
    }
    // 111x: XLATE / HALT
    let b3 = need!(bit(ip + 3));
    let instr = if b3 { Instr::Halt } else { Instr::Xlate };
    Decode::Complete { instr, width: 4 }
}

/// Live interpreter state. The tape holds exactly the bits consumed so far
/// and only ever grows; `ip` stays within it at fetch time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    pub tape: BitString,
    pub ip: usize,
    pub r0: u64,
    pub r1: u64,
    pub out: BitString,
    pub steps: u64,
    pub dialect: Dialect,
}

/// What a single `step` call did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// Executed one non-halting instruction.
    Executed(Instr),
    /// Executed HALT.
    Halted,
    /// Decode ran off the tape; push a bit and retry. State is unchanged.
    NeedMoreBits,
}

impl MachineState {
    pub fn new(dialect: Dialect) -> Self {
        MachineState {
            tape: BitString::new(),
            ip: 0,
            r0: 0,
            r1: 0,
            out: BitString::new(),
            steps: 0,
            dialect,
        }
    }

    /// Append one consumed input bit to the tape.
    pub fn push_bit(&mut self, bit: bool) {
        self.tape.push(bit);
    }

    fn counter(&mut self, r: Reg) -> &mut u64 {
        match r {
            Reg::R0 => &mut self.r0,
            Reg::R1 => &mut self.r1,
        }
    }

    /// Execute at most one instruction. Counts one step for any executed
    /// instruction, HALT included.
    pub fn step(&mut self) -> StepOutcome {
        let decoded = match decode_instruction(&self.tape, self.ip, self.dialect) {
            Decode::Complete { instr, width } => (instr, width),
            Decode::NeedMoreBits => return StepOutcome::NeedMoreBits,
        };
        let (instr, width) = decoded;
        let start = self.ip;
        self.steps += 1;
        match instr {
            Instr::Out(bit) => {
                self.out.push(bit);
                self.ip = start + width;
            }
            Instr::Inc(r) => {
                *self.counter(r) += 1;
                self.ip = start + width;
            }
            Instr::Dec(r) => {
                let c = self.counter(r);
                *c = c.saturating_sub(1);
                self.ip = start + width;
            }
            Instr::Jnz { reg, offset } => {
                if *self.counter(reg) != 0 {
                    self.ip = start.saturating_sub(offset as usize + 1);
                } else {
                    self.ip = start + width;
                }
            }
            Instr::Xlate => {
                self.dialect = Dialect::B;
                self.ip = start + width;
            }
            Instr::Halt => {
                self.ip = start + width;
                return StepOutcome::Halted;
            }
        }
        StepOutcome::Executed(instr)
    }
}

/// Outcome of a budgeted run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecResult {
    /// The machine executed HALT within the budget. `program` is exactly the
    /// consumed input prefix and `phase` is the output read as a binary
    /// fraction of a turn.
    Halted {
        program: BitString,
        output: BitString,
        phase: PhaseFraction,
        steps_used: u64,
    },
    /// The step budget ran out, or the bit source was exhausted mid-decode.
    /// The prefix is unresolved at this budget; no program is reported.
    OutOfGas { steps_used: u64 },
}

impl ExecResult {
    pub fn is_halted(&self) -> bool {
        matches!(self, ExecResult::Halted { .. })
    }
}

/// One line of the debugging trace: state after executing an instruction.
#[derive(Debug, Clone)]
pub struct TraceLine {
    pub step: u64,
    pub ip: usize,
    pub opcode: &'static str,
    pub r0: u64,
    pub r1: u64,
    pub out: BitString,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.step, self.ip, self.opcode, self.r0, self.r1, self.out
        )
    }
}

fn run_inner(
    source: &BitString,
    budget: u64,
    dialect: Dialect,
    mut trace: Option<&mut Vec<TraceLine>>,
) -> ExecResult {
    assert!(budget >= 1, "step budget must be at least 1");
    let mut st = MachineState::new(dialect);
    let mut next_bit = 0usize;
    loop {
        if st.steps == budget {
            return ExecResult::OutOfGas { steps_used: st.steps };
        }
        let fetch_ip = st.ip;
        match st.step() {
            StepOutcome::NeedMoreBits => match source.try_get(next_bit) {
                Some(b) => {
                    st.push_bit(b);
                    next_bit += 1;
                }
                None => return ExecResult::OutOfGas { steps_used: st.steps },
            },
            StepOutcome::Executed(instr) => {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(TraceLine {
                        step: st.steps,
                        ip: fetch_ip,
                        opcode: instr.mnemonic(),
                        r0: st.r0,
                        r1: st.r1,
                        out: st.out.clone(),
                    });
                }
            }
            StepOutcome::Halted => {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(TraceLine {
                        step: st.steps,
                        ip: fetch_ip,
                        opcode: "HALT",
                        r0: st.r0,
                        r1: st.r1,
                        out: st.out.clone(),
                    });
                }
                return ExecResult::Halted {
                    phase: bits_to_phase(&st.out),
                    program: st.tape,
                    output: st.out,
                    steps_used: st.steps,
                };
            }
        }
    }
}

/// Run the machine on bits drawn from `source`, executing at most `budget`
/// instructions. Bits are consumed only when decode demands them, so the
/// result is a deterministic function of the consumed prefix alone.
pub fn run(source: &BitString, budget: u64, dialect: Dialect) -> ExecResult {
    run_inner(source, budget, dialect, None)
}

/// As [`run`], also collecting the step-by-step trace.
pub fn run_traced(source: &BitString, budget: u64, dialect: Dialect) -> (ExecResult, Vec<TraceLine>) {
    let mut trace = Vec::new();
    let result = run_inner(source, budget, dialect, Some(&mut trace));
    (result, trace)
}

/// True iff no element is a proper prefix of another. A repeated element
/// counts as a violation: the halting set is a set, and every string is a
/// prefix of itself.
pub fn check_prefix_free(halting_set: &[BitString]) -> bool {
    let mut sorted: Vec<&BitString> = halting_set.iter().collect();
    sorted.sort();
    sorted
        .windows(2)
        .all(|w| w[0] != w[1] && !w[0].is_prefix_of(w[1]))
}

/// Canonical description of the machine definition; hashed into cache files
/// so a changed opcode table refuses to load stale exploration state.
pub const MACHINE_DEFINITION: &str = "upsum machine v1\n\
    A: 00=OUT0 01=OUT1 100r=INC 101r=DEC 110r.dddd=JNZ(ip<-max(0,S-(d+1))) 1110=XLATE>B 1111=HALT\n\
    B: as A with OUT0/OUT1 swapped\n\
    one step per instruction; DEC saturates at 0; counters start at 0\n";

/// Hex SHA-256 of [`MACHINE_DEFINITION`].
pub fn machine_hash() -> String {
    let digest = Sha256::digest(MACHINE_DEFINITION.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcore::DyadicRational;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn decode_examples() {
        assert_eq!(
            decode_instruction(&bs("1111"), 0, Dialect::A),
            Decode::Complete { instr: Instr::Halt, width: 4 }
        );
        assert_eq!(
            decode_instruction(&bs("00"), 0, Dialect::A),
            Decode::Complete { instr: Instr::Out(false), width: 2 }
        );
        assert_eq!(
            decode_instruction(&bs("00"), 0, Dialect::B),
            Decode::Complete { instr: Instr::Out(true), width: 2 }
        );
    }

    #[test]
    fn decode_incomplete_requests_bits() {
        assert_eq!(decode_instruction(&bs(""), 0, Dialect::A), Decode::NeedMoreBits);
        assert_eq!(decode_instruction(&bs("1"), 0, Dialect::A), Decode::NeedMoreBits);
        assert_eq!(decode_instruction(&bs("110"), 0, Dialect::A), Decode::NeedMoreBits);
        assert_eq!(decode_instruction(&bs("1100110"), 0, Dialect::A), Decode::NeedMoreBits);
        // Decode at a mid-tape position can also run off the end.
        assert_eq!(decode_instruction(&bs("0011"), 2, Dialect::A), Decode::NeedMoreBits);
    }

    #[test]
    fn jnz_decode_offset_msb_first() {
        // 110 0 1010 -> JNZ r0, d = 10
        assert_eq!(
            decode_instruction(&bs("11001010"), 0, Dialect::A),
            Decode::Complete { instr: Instr::Jnz { reg: Reg::R0, offset: 10 }, width: 8 }
        );
    }

    #[test]
    fn run_halt_immediately() {
        let r = run(&bs("1111"), 10, Dialect::A);
        match r {
            ExecResult::Halted { program, output, phase, steps_used } => {
                assert_eq!(program, bs("1111"));
                assert_eq!(output, bs(""));
                assert!(phase.is_zero());
                assert_eq!(steps_used, 1);
            }
            other => panic!("expected halt, got {other:?}"),
        }
    }

    #[test]
    fn run_out1_then_halt() {
        let r = run(&bs("011111"), 10, Dialect::A);
        match r {
            ExecResult::Halted { program, output, phase, .. } => {
                assert_eq!(program, bs("011111"));
                assert_eq!(output, bs("1"));
                assert_eq!(phase.turn(), &DyadicRational::pow2_neg(1));
            }
            other => panic!("expected halt, got {other:?}"),
        }
    }

    #[test]
    fn run_inc_jnz_loops_forever() {
        // INC r0 then JNZ r0 back to bit 0: burns the whole budget.
        let r = run(&bs("100011000011"), 10_000, Dialect::A);
        assert_eq!(r, ExecResult::OutOfGas { steps_used: 10_000 });
    }

    #[test]
    fn exhausted_source_is_out_of_gas() {
        let r = run(&bs("00"), 10, Dialect::A);
        assert!(matches!(r, ExecResult::OutOfGas { .. }));
    }

    #[test]
    fn prefix_free_check_examples() {
        assert!(check_prefix_free(&[bs("1111"), bs("001111"), bs("011111")]));
        assert!(!check_prefix_free(&[bs("11"), bs("1111")]));
        assert!(check_prefix_free(&[]));
        // Duplicates violate set-level prefix-freeness.
        assert!(!check_prefix_free(&[bs("1111"), bs("1111")]));
    }

    #[test]
    fn dialect_b_swaps_outputs() {
        let r = run(&bs("011111"), 10, Dialect::B);
        match r {
            ExecResult::Halted { output, .. } => assert_eq!(output, bs("0")),
            other => panic!("expected halt, got {other:?}"),
        }
    }

    #[test]
    fn xlate_switches_out_meaning() {
        // XLATE, then OUT0-coded bits emit 1 in dialect B, then HALT.
        let r = run(&bs("1110001111"), 10, Dialect::A);
        match r {
            ExecResult::Halted { output, steps_used, .. } => {
                assert_eq!(output, bs("1"));
                assert_eq!(steps_used, 3);
            }
            other => panic!("expected halt, got {other:?}"),
        }
    }

    #[test]
    fn trace_format() {
        let (_, trace) = run_traced(&bs("011111"), 10, Dialect::A);
        let lines: Vec<String> = trace.iter().map(|l| l.to_string()).collect();
        assert_eq!(lines, vec!["1 0 OUT1 0 0 1", "2 2 HALT 0 0 1"]);
    }

    #[test]
    fn machine_hash_is_stable() {
        assert_eq!(machine_hash(), machine_hash());
        assert_eq!(machine_hash().len(), 64);
    }

    /// Every halting A-program halts in dialect B at the same step, with the
    /// output complemented exactly at the bits emitted before the first
    /// XLATE (after it both runs speak dialect B).
    #[test]
    fn dialect_b_symmetry_over_halting_set() {
        let budget = 300u64;
        let report = crate::enumerator::explore(
            crate::enumerator::ExploreBudget::new(12, budget),
            Dialect::A,
        );
        assert!(!report.halted.is_empty());
        let mut with_xlate = 0;
        for rec in &report.halted {
            let (res_a, trace_a) = run_traced(&rec.program, budget, Dialect::A);
            let (out_a, steps_a) = match res_a {
                ExecResult::Halted { output, steps_used, .. } => (output, steps_used),
                other => panic!("A-run lost {}: {other:?}", rec.program),
            };
            let (out_b, steps_b) = match run(&rec.program, budget, Dialect::B) {
                ExecResult::Halted { output, steps_used, .. } => (output, steps_used),
                other => panic!("B-run diverged on {}: {other:?}", rec.program),
            };
            assert_eq!(steps_a, steps_b, "step counts differ on {}", rec.program);
            assert_eq!(out_a.len(), out_b.len(), "output lengths differ on {}", rec.program);
            let flipped_prefix = trace_a
                .iter()
                .find(|line| line.opcode == "XLATE")
                .map(|line| line.out.len())
                .unwrap_or(out_a.len());
            if flipped_prefix < out_a.len() {
                with_xlate += 1;
            }
            for i in 0..out_a.len() {
                if i < flipped_prefix {
                    assert_ne!(out_a.get(i), out_b.get(i), "bit {i} of {} not flipped", rec.program);
                } else {
                    assert_eq!(out_a.get(i), out_b.get(i), "bit {i} of {} flipped", rec.program);
                }
            }
        }
        // The set is large enough to exercise the post-XLATE case.
        assert!(with_xlate > 0, "no program emitted output after an XLATE");
    }

    proptest! {
        /// The result depends only on the consumed prefix: junk appended
        /// after a halting program changes nothing.
        #[test]
        fn determinism_over_unconsumed_bits(junk in proptest::collection::vec(any::<bool>(), 0..32)) {
            let program = bs("011111");
            let extended: BitString = program.iter().chain(junk.into_iter()).collect();
            prop_assert_eq!(run(&program, 100, Dialect::A), run(&extended, 100, Dialect::A));
        }

        /// Halting is monotone in the budget.
        #[test]
        fn monotone_halting(extra in 1u64..500) {
            let program = bs("001111");
            let r = run(&program, 3, Dialect::A);
            prop_assert!(r.is_halted());
            prop_assert_eq!(run(&program, 3 + extra, Dialect::A), r);
        }
    }
}
