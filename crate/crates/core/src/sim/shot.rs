//! Executing one shot of a program, optionally pinned to a recorded
//! transcript prefix.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::rng::{derive_shot_seed, RngStream};
use super::state::StateVector;
use super::SimError;
use crate::circuit_ir::{BitRef, InstructionKind, Program};
use crate::scalar::Real;

/// Creg name to bit array.
pub type Registers = BTreeMap<String, Vec<u8>>;

/// One measurement or reset outcome. Resets record the pre-reset bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementEvent {
    pub shot_index: u64,
    pub op_index: usize,
    pub qubit: usize,
    pub outcome: u8,
    pub forced: bool,
}

pub type Transcript = Vec<MeasurementEvent>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlFlowEntry {
    pub op_index: usize,
    pub taken: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotContext {
    pub shot_index: u64,
    pub rng: RngStream,
    pub registers: Registers,
    pub transcript: Transcript,
    /// Next op to execute.
    pub pc: usize,
    pub control_flow: Vec<ControlFlowEntry>,
}

impl ShotContext {
    pub fn new(program: &Program, shot_index: u64, shot_seed: u64) -> Self {
        ShotContext {
            shot_index,
            rng: RngStream::new(shot_seed),
            registers: program.empty_registers(),
            transcript: Vec::new(),
            pc: 0,
            control_flow: Vec::new(),
        }
    }

    fn bit(&self, bit: &BitRef) -> Result<u8, SimError> {
        self.registers
            .get(&bit.creg)
            .and_then(|r| r.get(bit.index))
            .copied()
            .ok_or_else(|| SimError::UndeclaredBit {
                creg: bit.creg.clone(),
                index: bit.index,
            })
    }

    fn set_bit(&mut self, bit: &BitRef, value: u8) -> Result<(), SimError> {
        let slot = self
            .registers
            .get_mut(&bit.creg)
            .and_then(|r| r.get_mut(bit.index))
            .ok_or_else(|| SimError::UndeclaredBit {
                creg: bit.creg.clone(),
                index: bit.index,
            })?;
        *slot = value;
        Ok(())
    }
}

/// Context and quantum state of a shot, finished or paused.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotRun<T: Real = f64> {
    pub context: ShotContext,
    pub state: StateVector<T>,
}

/// Step-wise executor for a single shot. Pinned events are consumed in order
/// by the measurements and resets they name; once exhausted, outcomes are
/// sampled.
pub struct ShotExecutor<'p, T: Real = f64> {
    program: &'p Program,
    state: StateVector<T>,
    ctx: ShotContext,
    pinned: VecDeque<MeasurementEvent>,
}

impl<'p, T: Real> ShotExecutor<'p, T> {
    pub fn new(
        program: &'p Program,
        shot_index: u64,
        shot_seed: u64,
        pinned: impl IntoIterator<Item = MeasurementEvent>,
    ) -> Result<Self, SimError> {
        Ok(ShotExecutor {
            program,
            state: StateVector::new(program.num_qubits)?,
            ctx: ShotContext::new(program, shot_index, shot_seed),
            pinned: pinned.into_iter().collect(),
        })
    }

    pub fn for_master_seed(
        program: &'p Program,
        shot_index: u64,
        master_seed: u64,
        pinned: impl IntoIterator<Item = MeasurementEvent>,
    ) -> Result<Self, SimError> {
        Self::new(program, shot_index, derive_shot_seed(master_seed, shot_index), pinned)
    }

    /// Continue a shot from a previously captured context and state.
    pub fn resume(program: &'p Program, run: ShotRun<T>) -> Self {
        ShotExecutor {
            program,
            state: run.state,
            ctx: run.context,
            pinned: VecDeque::new(),
        }
    }

    pub fn context(&self) -> &ShotContext {
        &self.ctx
    }

    pub fn state(&self) -> &StateVector<T> {
        &self.state
    }

    pub fn pc(&self) -> usize {
        self.ctx.pc
    }

    pub fn is_finished(&self) -> bool {
        self.ctx.pc >= self.program.len()
    }

    pub fn pinned_remaining(&self) -> usize {
        self.pinned.len()
    }

    /// Execute the op at `pc`. Returns false once the program is exhausted.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let Some(instr) = self.program.instructions.get(self.ctx.pc) else {
            return Ok(false);
        };
        let op_index = self.ctx.pc;
        match &instr.kind {
            InstructionKind::Guarded { condition, inner } => {
                let taken = self.ctx.bit(&condition.bit)? == condition.value;
                self.ctx.control_flow.push(ControlFlowEntry { op_index, taken });
                if taken {
                    self.execute(op_index, inner)?;
                }
            }
            kind => self.execute(op_index, kind)?,
        }
        self.ctx.pc += 1;
        Ok(true)
    }

    /// Run until `pc == op_index` (or the end of the program).
    pub fn run_until(&mut self, op_index: usize) -> Result<(), SimError> {
        while self.ctx.pc < op_index && self.step()? {}
        Ok(())
    }

    /// Run the rest of the shot. Any pinned events left over mean the
    /// transcript does not belong to this program.
    pub fn run_to_end(mut self) -> Result<ShotRun<T>, SimError> {
        while self.step()? {}
        if let Some(ev) = self.pinned.front() {
            return Err(SimError::TranscriptOrderMismatch {
                pinned_op: ev.op_index,
                reached: None,
            });
        }
        Ok(self.into_run())
    }

    pub fn into_run(self) -> ShotRun<T> {
        ShotRun {
            context: self.ctx,
            state: self.state,
        }
    }

    fn take_pinned(&mut self, op_index: usize, qubit: usize) -> Result<Option<u8>, SimError> {
        match self.pinned.front() {
            None => Ok(None),
            Some(ev) if ev.op_index == op_index && ev.qubit == qubit => {
                let outcome = ev.outcome;
                self.pinned.pop_front();
                Ok(Some(outcome))
            }
            Some(ev) => Err(SimError::TranscriptOrderMismatch {
                pinned_op: ev.op_index,
                reached: Some(op_index),
            }),
        }
    }

    fn observe(&mut self, op_index: usize, qubit: usize) -> Result<(u8, bool), SimError> {
        let with_op = |e: SimError| match e {
            SimError::ZeroProbabilityOutcome {
                qubit,
                outcome,
                probability,
                ..
            } => SimError::ZeroProbabilityOutcome {
                qubit,
                outcome,
                probability,
                op_index: Some(op_index),
            },
            e => e,
        };
        match self.take_pinned(op_index, qubit)? {
            Some(outcome) => {
                self.state
                    .force_measure(qubit, outcome, &mut self.ctx.rng)
                    .map_err(with_op)?;
                Ok((outcome, true))
            }
            None => Ok((self.state.measure(qubit, &mut self.ctx.rng)?, false)),
        }
    }

    fn execute(&mut self, op_index: usize, kind: &InstructionKind) -> Result<(), SimError> {
        match kind {
            InstructionKind::Gate { gate, qubits } => self.state.apply_gate(gate, qubits)?,
            InstructionKind::Measure { qubit, target } => {
                let (outcome, forced) = self.observe(op_index, *qubit)?;
                self.ctx.set_bit(target, outcome)?;
                self.record(op_index, *qubit, outcome, forced);
            }
            InstructionKind::Reset { qubit } => {
                let (outcome, forced) = self.observe(op_index, *qubit)?;
                if outcome == 1 {
                    self.state.apply_gate(&crate::circuit_ir::Gate::X, &[*qubit])?;
                }
                self.record(op_index, *qubit, outcome, forced);
            }
            InstructionKind::Guarded { .. } => {
                return Err(SimError::UnknownGate(format!("nested guard at op {op_index}")));
            }
            InstructionKind::RegionStart { .. } | InstructionKind::CheckpointMarker { .. } => {}
        }
        Ok(())
    }

    fn record(&mut self, op_index: usize, qubit: usize, outcome: u8, forced: bool) {
        self.ctx.transcript.push(MeasurementEvent {
            shot_index: self.ctx.shot_index,
            op_index,
            qubit,
            outcome,
            forced,
        });
    }
}

/// Final registers of a shot, rebuilt from its transcript events without
/// simulating. Reset events leave registers untouched.
pub fn registers_from_events<'a>(
    program: &Program,
    events: impl IntoIterator<Item = &'a MeasurementEvent>,
) -> Registers {
    let mut regs = program.empty_registers();
    for ev in events {
        let kind = match program.instructions.get(ev.op_index).map(|i| &i.kind) {
            Some(InstructionKind::Guarded { inner, .. }) => inner.as_ref(),
            Some(k) => k,
            None => continue,
        };
        if let InstructionKind::Measure { target, .. } = kind {
            if let Some(slot) = regs.get_mut(&target.creg).and_then(|r| r.get_mut(target.index)) {
                *slot = ev.outcome;
            }
        }
    }
    regs
}

/// Run a whole shot from `|0…0⟩` with the given seed.
pub fn run_shot<T: Real>(
    program: &Program,
    shot_index: u64,
    shot_seed: u64,
    pinned: &[MeasurementEvent],
) -> Result<ShotRun<T>, SimError> {
    ShotExecutor::new(program, shot_index, shot_seed, pinned.iter().copied())?.run_to_end()
}
