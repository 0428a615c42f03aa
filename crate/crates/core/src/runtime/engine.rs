//! The orchestrator: runs a workload under a checkpoint policy, commits
//! checkpoints as triggers fire, injects failures and recovers from them.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;

use super::falqon::{FalqonConfig, FalqonOutput};
use super::policy::{on_failure, FailureEvent, FailureKind, FailureSpec, Policy, Recovery, Trigger, DEFAULT_BACKEND};
use super::report::{
    outcome_key, CheckpointSummary, Counts, DecodedShot, FailureRecord, RunReport, RunStatus, Timing, WorkloadOutput,
};
use super::vqe::{self, VqeConfig, VqeOutput};
use super::workload::{decode_frame, decoder_state_at, logical_readout, syndrome_history, ShotKind, Workload};
use super::RuntimeError;
use crate::checkpoint_store::{CheckpointRecord, ShotCursor, Store, StoreError};
use crate::circuit_ir::{region_boundaries, Boundary, CheckpointClass, Position, Program};
use crate::restoration::{self, RestoreError};
use crate::sim::{registers_from_events, MeasurementEvent, Registers, ShotExecutor, ShotRun, StateVector, Transcript};

/// Settings of a fresh run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Shot count; ignored by iterative workloads.
    pub shots: u64,
    pub master_seed: u64,
    pub policy: Policy,
    pub failure: Option<FailureSpec>,
}

/// Run `workload` from scratch, checkpointing into `store`.
pub fn run_workflow(workload: &Workload, config: &RunConfig, store: &Store) -> Result<RunReport, RuntimeError> {
    let shots_total = if workload.is_iterative() { 0 } else { config.shots };
    if !workload.is_iterative() && shots_total == 0 {
        return Err(RuntimeError::Config("at least one shot is needed".into()));
    }
    let mut engine = Engine::new(workload, &config.policy, store, config.master_seed, shots_total);
    engine.set_failure(config.failure)?;
    engine.drive(Start::Fresh)
}

/// Continue from checkpoint `checkpoint`, or the store's latest.
pub fn resume_workflow(
    workload: &Workload,
    policy: &Policy,
    failure: Option<FailureSpec>,
    store: &Store,
    checkpoint: Option<&str>,
) -> Result<RunReport, RuntimeError> {
    let id = match checkpoint {
        Some(id) => id.to_string(),
        None => store
            .latest()?
            .ok_or_else(|| StoreError::NotFound("no checkpoint in store".into()))?,
    };
    let record = store.get(&id)?;
    let mut engine = Engine::new(
        workload,
        policy,
        store,
        record.master_seed,
        record.shot_cursor.shots_total,
    );
    engine.backend = record
        .calibration_metadata
        .get("backend")
        .cloned()
        .unwrap_or_else(|| DEFAULT_BACKEND.to_string());
    engine.report.resumed = true;
    engine.report.resumed_from = Some(id.clone());
    engine.parent = Some(id);
    engine.set_failure(failure)?;
    engine.drive(Start::Record(Box::new(record)))
}

enum Start {
    Fresh,
    Record(Box<CheckpointRecord>),
}

enum Flow<T> {
    Done(T),
    Killed(String),
    Down(FailureEvent),
}

struct InFlight {
    run: ShotRun,
    /// Recorded events of this shot, as they appear in the output.
    carried: Vec<MeasurementEvent>,
    /// Boundary the shot was restored at; no checkpoint or kill fires there.
    at: usize,
}

#[derive(Default)]
struct ShotProgress {
    completed: u64,
    registers: Vec<Registers>,
    transcript: Transcript,
    fidelity: Vec<f64>,
    in_flight: Option<InFlight>,
}

struct VqeProgress {
    iteration: u64,
    theta: Vec<f64>,
    energies: Vec<f64>,
    grad_norms: Vec<f64>,
    trajectory: Vec<Vec<f64>>,
    done: bool,
}

struct FalqonProgress {
    iteration: u64,
    betas: Vec<f64>,
    hp: Vec<f64>,
    feedback: Vec<f64>,
    state: StateVector,
}

struct Engine<'a> {
    workload: &'a Workload,
    program: &'a Program,
    policy: &'a Policy,
    store: &'a Store,
    failure: Option<FailureSpec>,
    down_fired: bool,
    master_seed: u64,
    shots_total: u64,
    backend: String,
    /// Newest checkpoint of the current chain.
    parent: Option<String>,
    report: RunReport,
    started: Instant,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn out_of_range(msg: String) -> RuntimeError {
    RuntimeError::SpecOutOfRange(msg)
}

impl<'a> Engine<'a> {
    fn new(workload: &'a Workload, policy: &'a Policy, store: &'a Store, master_seed: u64, shots_total: u64) -> Self {
        Engine {
            workload,
            program: workload.program(),
            policy,
            store,
            failure: None,
            down_fired: false,
            master_seed,
            shots_total,
            backend: DEFAULT_BACKEND.to_string(),
            parent: None,
            report: RunReport {
                workload: workload.name().to_string(),
                program_digest: workload.digest().to_string(),
                master_seed: master_seed.to_string(),
                policy: policy.to_string(),
                status: RunStatus::Completed,
                resumed: false,
                resumed_from: None,
                output: None,
                checkpoints: Vec::new(),
                failures: Vec::new(),
                timing: Timing::default(),
                counts: Counts::default(),
            },
            started: Instant::now(),
        }
    }

    fn max_iterations(&self) -> u64 {
        match self.workload {
            Workload::Vqe { config, .. } => config.max_iterations,
            Workload::Falqon { config, .. } => config.layers,
            Workload::Shots { .. } => 0,
        }
    }

    /// Reject failure coordinates outside the workload.
    fn set_failure(&mut self, failure: Option<FailureSpec>) -> Result<(), RuntimeError> {
        let Some(spec) = failure else {
            return Ok(());
        };
        let iterative = self.workload.is_iterative();
        match spec.kind {
            FailureKind::KillAtOp { region, op, shot } => {
                if iterative {
                    return Err(out_of_range(format!(
                        "{spec}: iterative workloads have no op kill points"
                    )));
                }
                let r = self
                    .program
                    .regions
                    .get(region)
                    .ok_or_else(|| out_of_range(format!("{spec}: no region {region}")))?;
                if !(r.start_op..r.end_op).contains(&op) {
                    return Err(out_of_range(format!(
                        "{spec}: op {op} is outside region {region} (ops {}..{})",
                        r.start_op, r.end_op
                    )));
                }
                if shot >= self.shots_total {
                    return Err(out_of_range(format!("{spec}: only {} shots", self.shots_total)));
                }
            }
            FailureKind::KillAtShot { shot } => {
                if iterative || shot >= self.shots_total {
                    return Err(out_of_range(format!("{spec}: only {} shots", self.shots_total)));
                }
            }
            FailureKind::KillAtIteration { iteration } => {
                if !iterative || iteration > self.max_iterations() {
                    return Err(out_of_range(format!(
                        "{spec}: workload runs at most {} iterations",
                        self.max_iterations()
                    )));
                }
            }
            FailureKind::BackendUnavailable { first, .. } => {
                let ok = if iterative {
                    (1..=self.max_iterations()).contains(&first)
                } else {
                    first < self.shots_total
                };
                if !ok {
                    return Err(out_of_range(format!("{spec}: range starts outside the workload")));
                }
            }
        }
        self.failure = Some(spec);
        Ok(())
    }

    fn drive(mut self, mut start: Start) -> Result<RunReport, RuntimeError> {
        loop {
            let flow = match self.workload {
                Workload::Shots { .. } => self.run_shots(start)?,
                Workload::Vqe { config, program } => self.run_vqe(config, program, start)?,
                Workload::Falqon { config, .. } => self.run_falqon(config, start)?,
            };
            match flow {
                Flow::Done(output) => {
                    self.report.output = Some(output);
                    self.report.status = RunStatus::Completed;
                    break;
                }
                Flow::Killed(at) => {
                    self.report.failures.push(FailureRecord {
                        kind: self.failure.map(|f| f.to_string()).unwrap_or_default(),
                        at,
                        action: "crash".into(),
                        resumed_from: None,
                    });
                    self.report.status = RunStatus::Killed;
                    break;
                }
                Flow::Down(event) => start = self.recover(event)?,
            }
        }
        self.report.timing.total_ms = ms(self.started);
        Ok(self.report)
    }

    /// Apply the policy's failure action in-process.
    fn recover(&mut self, event: FailureEvent) -> Result<Start, RuntimeError> {
        let latest = self.parent.as_deref().map(|id| (id, self.backend.as_str()));
        let recovery = on_failure(&event, self.policy, latest);
        let (action, from, start) = match recovery {
            Recovery::ResumeFrom { checkpoint } => {
                let record = self.store.get(&checkpoint)?;
                ("rollback", Some(checkpoint), Start::Record(Box::new(record)))
            }
            Recovery::RescheduleFrom { checkpoint, backend } => {
                let record = self.store.get(&checkpoint)?;
                self.backend = backend;
                ("reschedule", Some(checkpoint), Start::Record(Box::new(record)))
            }
            Recovery::Restart { fallback } => {
                self.parent = None;
                let action = if fallback { "restart_fallback" } else { "restart" };
                (action, None, Start::Fresh)
            }
        };
        if let Some(id) = &from {
            self.parent = Some(id.clone());
        }
        self.report.failures.push(FailureRecord {
            kind: event.spec.to_string(),
            at: event.at,
            action: action.into(),
            resumed_from: from,
        });
        Ok(start)
    }

    /// Fires at most once, when unit `index` is about to start.
    fn backend_down(&mut self, index: u64, unit: &str) -> Option<FailureEvent> {
        let spec = self.failure?;
        match spec.kind {
            FailureKind::BackendUnavailable { first, last } if !self.down_fired && (first..=last).contains(&index) => {
                self.down_fired = true;
                Some(FailureEvent {
                    spec,
                    at: format!("{unit} {index}"),
                })
            }
            _ => None,
        }
    }

    fn seal_and_put(&mut self, mut record: CheckpointRecord) -> Result<(), RuntimeError> {
        let t0 = Instant::now();
        record.parent_id = self.parent.clone();
        record.calibration_metadata = BTreeMap::from([
            ("backend".to_string(), self.backend.clone()),
            ("precision".to_string(), "f64".to_string()),
        ]);
        let record = record.seal()?;
        let id = self.store.put(&record)?;
        let create_ms = ms(t0);
        self.report.checkpoints.push(CheckpointSummary {
            id: id.clone(),
            parent_id: record.parent_id.clone(),
            class: record.class,
            iteration: record.iteration,
            position: record.position,
            completed_shots: record.shot_cursor.completed_shots,
            in_flight_shot: record.shot_cursor.in_flight_shot,
            bytes: self.store.record_size(&id)?,
            create_ms,
        });
        self.report.counts.checkpoints_created += 1;
        self.parent = Some(id);
        Ok(())
    }

    fn base_record(&self, class: CheckpointClass) -> CheckpointRecord {
        let mut r = CheckpointRecord::new(class, self.workload.digest(), self.master_seed);
        r.shot_cursor.shots_total = self.shots_total;
        r
    }

    // Shot workloads.

    fn shot_kind(&self) -> &ShotKind {
        match self.workload {
            Workload::Shots { kind, .. } => kind,
            _ => unreachable!("shot loop on an iterative workload"),
        }
    }

    fn boundary_due(&self, b: &Boundary) -> bool {
        let marker = !b.is_region_start || b.class_hint.is_some();
        self.policy.has(|t| matches!(t, Trigger::RegionBoundary))
            || (marker && self.policy.has(|t| matches!(t, Trigger::OnEvent)))
    }

    /// The marker's class, else the policy default. Logical needs a decoder
    /// and algorithmic has no meaning mid-shot, so both fall back to
    /// classicalized where they cannot apply.
    fn shot_class(&self, hint: Option<CheckpointClass>) -> CheckpointClass {
        let repcode = matches!(self.shot_kind(), ShotKind::RepetitionCode { .. });
        match hint.unwrap_or(self.policy.checkpoint_class_default) {
            CheckpointClass::Logical if repcode => CheckpointClass::Logical,
            _ => CheckpointClass::Classicalized,
        }
    }

    fn kill_at_op(&self, shot: u64, position: Position) -> bool {
        matches!(
            self.failure.map(|f| f.kind),
            Some(FailureKind::KillAtOp { region, op, shot: s })
                if s == shot && op == position.op_index && region == position.region_index
        )
    }

    fn restore_shots(&mut self, record: &CheckpointRecord) -> Result<ShotProgress, RuntimeError> {
        let t0 = Instant::now();
        let state = restoration::resume(record, self.program)?;
        if state.shot_cursor.shots_total != self.shots_total || self.shots_total == 0 {
            return Err(RuntimeError::Config(format!(
                "checkpoint covers {} shots, run expects {}",
                state.shot_cursor.shots_total, self.shots_total
            )));
        }
        let completed = state.shot_cursor.completed_shots;
        let mut by_shot: BTreeMap<u64, Vec<MeasurementEvent>> = BTreeMap::new();
        for ev in &record.transcript {
            by_shot.entry(ev.shot_index).or_default().push(*ev);
        }
        let registers = (0..completed)
            .map(|s| registers_from_events(self.program, by_shot.get(&s).into_iter().flatten()))
            .collect();
        let transcript = record
            .transcript
            .iter()
            .filter(|e| e.shot_index < completed)
            .copied()
            .collect();
        let fidelity = match self.shot_kind() {
            ShotKind::Ghz { .. } => {
                let f = record.histories.get("fidelity").cloned().unwrap_or_default();
                if f.len() as u64 != completed {
                    return Err(RestoreError::ReplayDiverged(format!(
                        "{} fidelity values for {completed} completed shots",
                        f.len()
                    ))
                    .into());
                }
                f
            }
            _ => Vec::new(),
        };
        let in_flight = state.in_flight.map(|run| {
            let carried = by_shot.remove(&run.context.shot_index).unwrap_or_default();
            self.report.counts.shots_replayed += 1;
            self.report.counts.replayed_measurements += carried.len() as u64;
            InFlight {
                run,
                carried,
                at: record.position.op_index,
            }
        });
        self.report.timing.restore_ms.push(ms(t0));
        Ok(ShotProgress {
            completed,
            registers,
            transcript,
            fidelity,
            in_flight,
        })
    }

    fn run_shots(&mut self, start: Start) -> Result<Flow<WorkloadOutput>, RuntimeError> {
        let mut progress = match start {
            Start::Fresh => ShotProgress::default(),
            Start::Record(record) => self.restore_shots(&record)?,
        };
        let program = self.program;
        let boundaries: BTreeMap<usize, Boundary> = region_boundaries(program)
            .into_iter()
            .filter(|b| b.checkpointable)
            .map(|b| (b.position.op_index, b))
            .collect();
        while progress.completed < self.shots_total {
            let shot = progress.completed;
            let (mut ex, carried, restored_at) = match progress.in_flight.take() {
                Some(f) => (ShotExecutor::resume(program, f.run), f.carried, Some(f.at)),
                None => {
                    if let Some(FailureKind::KillAtShot { shot: k }) = self.failure.map(|f| f.kind) {
                        if k == shot {
                            return Ok(Flow::Killed(format!("before shot {shot}")));
                        }
                    }
                    if let Some(ev) = self.backend_down(shot, "shot") {
                        return Ok(Flow::Down(ev));
                    }
                    (
                        ShotExecutor::for_master_seed(program, shot, self.master_seed, [])?,
                        Vec::new(),
                        None,
                    )
                }
            };
            while !ex.is_finished() {
                let pc = ex.pc();
                if restored_at != Some(pc) {
                    if let Some(b) = boundaries.get(&pc) {
                        if self.boundary_due(b) {
                            let record = self.in_shot_record(&progress, ex.context(), &carried, b);
                            self.seal_and_put(record)?;
                        }
                    }
                    let position = program.position_of(pc).expect("pc lies inside the program");
                    if self.kill_at_op(shot, position) {
                        return Ok(Flow::Killed(format!("shot {shot} {position}")));
                    }
                }
                ex.step()?;
            }
            let run = ex.into_run();
            let fresh = &run.context.transcript[carried.len()..];
            self.report.counts.measurements += fresh.len() as u64;
            let mut events = carried;
            events.extend_from_slice(fresh);
            if let ShotKind::Ghz { n } = self.shot_kind() {
                progress.fidelity.push(run.state.fidelity(&ghz_target(*n))?);
            }
            progress.registers.push(run.context.registers);
            progress.transcript.extend(events);
            progress.completed += 1;
            self.report.counts.shots_executed += 1;
            if let Some(k) = self.policy.every_k_shots() {
                if progress.completed % k == 0 {
                    let record = self.shot_boundary_record(&progress);
                    self.seal_and_put(record)?;
                }
            }
        }
        Ok(Flow::Done(self.shot_output(progress)))
    }

    fn in_shot_record(
        &self,
        progress: &ShotProgress,
        ctx: &crate::sim::ShotContext,
        carried: &[MeasurementEvent],
        b: &Boundary,
    ) -> CheckpointRecord {
        let mut r = self.base_record(self.shot_class(b.class_hint));
        r.position = b.position;
        r.shot_cursor = ShotCursor {
            completed_shots: progress.completed,
            shots_total: self.shots_total,
            in_flight_shot: Some(ctx.shot_index),
        };
        r.registers = ctx.registers.clone();
        r.control_flow = ctx.control_flow.clone();
        r.transcript = progress.transcript.clone();
        r.transcript.extend_from_slice(carried);
        r.transcript.extend_from_slice(&ctx.transcript[carried.len()..]);
        if matches!(self.shot_kind(), ShotKind::Ghz { .. }) {
            r.histories.insert("fidelity".into(), progress.fidelity.clone());
        }
        if r.class == CheckpointClass::Logical {
            r.decoder_state = Some(decoder_state_at(self.program, b.position, &ctx.registers));
        }
        r
    }

    /// Checkpoint between shots: nothing in flight.
    fn shot_boundary_record(&self, progress: &ShotProgress) -> CheckpointRecord {
        let mut r = self.base_record(CheckpointClass::Classicalized);
        r.shot_cursor.completed_shots = progress.completed;
        r.transcript = progress.transcript.clone();
        if matches!(self.shot_kind(), ShotKind::Ghz { .. }) {
            r.histories.insert("fidelity".into(), progress.fidelity.clone());
        }
        r
    }

    fn shot_output(&self, progress: ShotProgress) -> WorkloadOutput {
        let order: Vec<String> = self.program.cregs.iter().map(|c| c.name.clone()).collect();
        let mut histogram = BTreeMap::new();
        for regs in &progress.registers {
            *histogram.entry(outcome_key(regs, &order)).or_insert(0) += 1;
        }
        let decoder = match self.shot_kind() {
            ShotKind::RepetitionCode { rounds, .. } => Some(
                progress
                    .registers
                    .iter()
                    .map(|regs| {
                        let history = syndrome_history(regs, *rounds);
                        let frame = decode_frame(&history);
                        DecodedShot {
                            logical: logical_readout(&regs["out"], &frame),
                            pauli_frame: frame,
                            syndrome_history: history,
                        }
                    })
                    .collect(),
            ),
            _ => None,
        };
        let ghz = matches!(self.shot_kind(), ShotKind::Ghz { .. });
        WorkloadOutput::Shots {
            shots: progress.completed,
            registers: progress.registers,
            histogram,
            transcript: progress.transcript,
            ghz_fidelity: ghz.then_some(progress.fidelity),
            decoder,
        }
    }

    // Iterative workloads.

    fn iteration_due(&self, history: &[f64]) -> bool {
        if self
            .policy
            .has(|t| matches!(t, Trigger::IterationBoundary | Trigger::RegionBoundary))
        {
            return true;
        }
        match (self.policy.convergence_tolerance(), history) {
            (Some(tol), [.., a, b]) => (b - a).abs() < tol,
            _ => false,
        }
    }

    fn kill_at_iteration(&self, iteration: u64) -> bool {
        matches!(
            self.failure.map(|f| f.kind),
            Some(FailureKind::KillAtIteration { iteration: i }) if i == iteration
        )
    }

    fn algorithmic_record(
        &self,
        iteration: u64,
        parameters: &[f64],
        histories: BTreeMap<String, Vec<f64>>,
    ) -> CheckpointRecord {
        let mut r = self.base_record(CheckpointClass::Algorithmic);
        r.iteration = iteration;
        r.parameters = parameters.to_vec();
        r.histories = histories;
        r
    }

    fn check_algorithmic(&self, record: &CheckpointRecord) -> Result<(), RuntimeError> {
        restoration::plan_restoration(record, self.program)?;
        if record.class != CheckpointClass::Algorithmic {
            return Err(RuntimeError::Config(format!(
                "{} checkpoint cannot restore an iterative workload",
                record.class
            )));
        }
        if record.iteration > self.max_iterations() {
            return Err(RestoreError::ReplayDiverged(format!(
                "checkpoint at iteration {} beyond the configured {}",
                record.iteration,
                self.max_iterations()
            ))
            .into());
        }
        Ok(())
    }

    fn restore_vqe(&mut self, config: &VqeConfig, record: &CheckpointRecord) -> Result<VqeProgress, RuntimeError> {
        let t0 = Instant::now();
        self.check_algorithmic(record)?;
        let k = record.iteration as usize;
        let series = |name: &str| record.histories.get(name).cloned().unwrap_or_default();
        let energies = series("energy");
        let grad_norms = series("grad_norm");
        let flat = series("trajectory");
        let p = config.parameter_count();
        if energies.len() != k || grad_norms.len() != k || flat.len() % p.max(1) != 0 || record.parameters.len() != p {
            return Err(RestoreError::ReplayDiverged("VQE histories do not match the iteration count".into()).into());
        }
        let trajectory: Vec<Vec<f64>> = flat.chunks(p).map(<[f64]>::to_vec).collect();
        let converged = grad_norms.last().is_some_and(|g| *g < config.tolerance);
        self.report.timing.restore_ms.push(ms(t0));
        Ok(VqeProgress {
            iteration: record.iteration,
            theta: record.parameters.clone(),
            energies,
            grad_norms,
            trajectory,
            done: converged || record.iteration >= config.max_iterations,
        })
    }

    fn run_vqe(
        &mut self,
        config: &VqeConfig,
        template: &Program,
        start: Start,
    ) -> Result<Flow<WorkloadOutput>, RuntimeError> {
        let mut st = match start {
            Start::Record(record) => self.restore_vqe(config, &record)?,
            Start::Fresh => {
                if self.kill_at_iteration(0) {
                    return Ok(Flow::Killed("before iteration 1".into()));
                }
                let theta = config.initial_parameters(self.master_seed);
                VqeProgress {
                    iteration: 0,
                    trajectory: vec![theta.clone()],
                    theta,
                    energies: Vec::new(),
                    grad_norms: Vec::new(),
                    done: false,
                }
            }
        };
        while !st.done {
            let k = st.iteration + 1;
            if let Some(ev) = self.backend_down(k, "iteration") {
                return Ok(Flow::Down(ev));
            }
            let e = vqe::energy(config, template, &st.theta)?;
            let g = vqe::gradient(config, template, &st.theta)?;
            let gn = vqe::norm(&g);
            st.energies.push(e);
            st.grad_norms.push(gn);
            if gn < config.tolerance {
                st.done = true;
            } else {
                for (t, gi) in st.theta.iter_mut().zip(&g) {
                    *t -= config.learning_rate * gi;
                }
                st.trajectory.push(st.theta.clone());
                st.done = k >= config.max_iterations;
            }
            st.iteration = k;
            self.report.counts.iterations_executed += 1;
            if self.iteration_due(&st.energies) {
                let histories = BTreeMap::from([
                    ("energy".to_string(), st.energies.clone()),
                    ("grad_norm".to_string(), st.grad_norms.clone()),
                    ("trajectory".to_string(), st.trajectory.concat()),
                ]);
                let record = self.algorithmic_record(k, &st.theta, histories);
                self.seal_and_put(record)?;
            }
            if self.kill_at_iteration(k) {
                return Ok(Flow::Killed(format!("after iteration {k}")));
            }
        }
        let converged = st.grad_norms.last().is_some_and(|g| *g < config.tolerance);
        let final_energy = if converged {
            *st.energies.last().expect("at least one iteration ran")
        } else {
            vqe::energy(config, template, &st.theta)?
        };
        Ok(Flow::Done(WorkloadOutput::Vqe(VqeOutput {
            iterations: st.iteration,
            converged,
            final_energy,
            final_parameters: st.theta,
            energies: st.energies,
            grad_norms: st.grad_norms,
            trajectory: st.trajectory,
        })))
    }

    fn restore_falqon(
        &mut self,
        config: &FalqonConfig,
        record: &CheckpointRecord,
    ) -> Result<FalqonProgress, RuntimeError> {
        let t0 = Instant::now();
        self.check_algorithmic(record)?;
        let k = record.iteration as usize;
        let hp = record.histories.get("hp_expectation").cloned().unwrap_or_default();
        let feedback = record.histories.get("feedback").cloned().unwrap_or_default();
        let betas = record.parameters.clone();
        if betas.len() != k + 1 || hp.len() != k + 1 || feedback.len() != k {
            return Err(RestoreError::ReplayDiverged("FALQON histories do not match the layer count".into()).into());
        }
        // The adaptive circuit is rebuilt from the stored coefficients; no
        // feedback value is measured again.
        let mut state = config.initial_state()?;
        for beta in &betas[..k] {
            config.apply_layer(&mut state, *beta)?;
        }
        self.report.timing.restore_ms.push(ms(t0));
        Ok(FalqonProgress {
            iteration: record.iteration,
            betas,
            hp,
            feedback,
            state,
        })
    }

    fn run_falqon(&mut self, config: &FalqonConfig, start: Start) -> Result<Flow<WorkloadOutput>, RuntimeError> {
        let mut st = match start {
            Start::Record(record) => self.restore_falqon(config, &record)?,
            Start::Fresh => {
                if self.kill_at_iteration(0) {
                    return Ok(Flow::Killed("before layer 1".into()));
                }
                let state = config.initial_state()?;
                FalqonProgress {
                    iteration: 0,
                    betas: vec![0.0],
                    hp: vec![config.hp.expectation(&state)?],
                    feedback: Vec::new(),
                    state,
                }
            }
        };
        while st.iteration < config.layers {
            let k = st.iteration + 1;
            if let Some(ev) = self.backend_down(k, "iteration") {
                return Ok(Flow::Down(ev));
            }
            let beta = st.betas[st.iteration as usize];
            config.apply_layer(&mut st.state, beta)?;
            st.hp.push(config.hp.expectation(&st.state)?);
            let a = config.feedback(&st.state)?;
            st.feedback.push(a);
            st.betas.push(-a);
            st.iteration = k;
            self.report.counts.iterations_executed += 1;
            if self.iteration_due(&st.hp) {
                let histories = BTreeMap::from([
                    ("feedback".to_string(), st.feedback.clone()),
                    ("hp_expectation".to_string(), st.hp.clone()),
                ]);
                let record = self.algorithmic_record(k, &st.betas, histories);
                self.seal_and_put(record)?;
            }
            if self.kill_at_iteration(k) {
                return Ok(Flow::Killed(format!("after layer {k}")));
            }
        }
        Ok(Flow::Done(WorkloadOutput::Falqon(FalqonOutput {
            layers: st.iteration,
            final_hp: *st.hp.last().expect("initial value present"),
            hp_expectation: st.hp,
            betas: st.betas,
            feedback: st.feedback,
        })))
    }
}

/// GHZ on the even (data) qubits, ancillas in `|0⟩`.
pub fn ghz_target(n: usize) -> StateVector {
    let ones: usize = super::workload::ghz_data_qubits(n).iter().map(|q| 1 << q).sum();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    amps[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[ones] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    StateVector::from_amplitudes(amps).expect("normalized by construction")
}
