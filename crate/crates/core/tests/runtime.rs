use qcr_core::checkpoint_store::{FaultPoint, Store};
use qcr_core::circuit_ir::{parse_program, CheckpointClass};
use qcr_core::restoration::RestoreError;
use qcr_core::runtime::report::DecodedShot;
use qcr_core::runtime::{
    resume_workflow, run_workflow, FalqonConfig, Policy, RunConfig, RunReport, RunStatus, RuntimeError, VqeConfig,
    Workload, WorkloadOutput,
};
use tempfile::TempDir;

const BELL: &str =
    "qubits 2\ncreg m 2\nregion prep\nh 0\ncx 0 1\nregion measure\nmeasure 0 -> m[0]\nckpt\nmeasure 1 -> m[1]\n";

fn store() -> (TempDir, Store) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    (dir, store)
}

fn config(shots: u64, seed: u64, policy: &str, fail: Option<&str>) -> RunConfig {
    RunConfig {
        shots,
        master_seed: seed,
        policy: policy.parse().unwrap(),
        failure: fail.map(|f| f.parse().unwrap()),
    }
}

fn run(w: &Workload, c: &RunConfig) -> (TempDir, Store, RunReport) {
    let (dir, s) = store();
    let r = run_workflow(w, c, &s).unwrap();
    (dir, s, r)
}

fn vqe_zz(max_iterations: u64) -> Workload {
    let mut c = VqeConfig::new("1*ZZ".parse().unwrap());
    c.max_iterations = max_iterations;
    Workload::vqe(c).unwrap()
}

#[test]
fn vqe_one_checkpoint_per_iteration() {
    let w = vqe_zz(10);
    let (_d, s, r) = run(&w, &config(0, 0, "iter", None));
    assert_eq!(r.status, RunStatus::Completed);
    assert_eq!(r.checkpoints.len(), 10);
    let latest = s.latest().unwrap().unwrap();
    assert_eq!(s.lineage(&latest).unwrap().len(), 10);
    for (i, c) in r.checkpoints.iter().enumerate() {
        assert_eq!(c.iteration, i as u64 + 1);
        assert_eq!(c.class, CheckpointClass::Algorithmic);
    }
}

#[test]
fn vqe_kill_and_resume_runs_remaining_iterations_once() {
    let w = vqe_zz(10);
    let (_d, _s, full) = run(&w, &config(0, 0, "iter", None));
    let (_d2, s, killed) = run(&w, &config(0, 0, "iter", Some("iter:5")));
    assert_eq!(killed.status, RunStatus::Killed);
    assert_eq!(killed.counts.iterations_executed, 5);
    assert!(killed.output.is_none());
    let resumed = resume_workflow(&w, &"iter".parse().unwrap(), None, &s, None).unwrap();
    assert!(resumed.resumed);
    assert_eq!(resumed.counts.iterations_executed, 5);
    assert_eq!(resumed.checkpoints.first().unwrap().iteration, 6);
    assert_eq!(resumed.output, full.output);
}

#[test]
fn vqe_stationary_start_stops_at_first_iteration() {
    // ZI with every angle 0 sits in the ground state |00⟩.
    let mut c = VqeConfig::new("1*ZI".parse().unwrap());
    c.initial = Some(vec![0.0; 4]);
    c.learning_rate = 0.1;
    let w = Workload::vqe(c).unwrap();
    let (_d, _s, r) = run(&w, &config(0, 0, "iter", None));
    let Some(WorkloadOutput::Vqe(out)) = r.output else {
        panic!()
    };
    assert_eq!(out.iterations, 1);
    assert!(out.converged);
    assert_eq!(out.final_energy, 1.0);
}

#[test]
fn policy_and_spec_validation() {
    assert!(matches!("shots:0".parse::<Policy>(), Err(RuntimeError::Config(_))));
    let (_d, s) = store();
    let err = run_workflow(&vqe_zz(10), &config(0, 0, "iter", Some("iter:11")), &s).unwrap_err();
    assert!(matches!(err, RuntimeError::SpecOutOfRange(_)));
    let bell = Workload::plain(parse_program(BELL).unwrap());
    for spec in ["shot:10", "op:0:5:0", "op:7:0:0", "op:1:3:10", "iter:1"] {
        let err = run_workflow(&bell, &config(10, 0, "region", Some(spec)), &s).unwrap_err();
        assert!(matches!(err, RuntimeError::SpecOutOfRange(_)), "{spec}");
    }
}

#[test]
fn kill_at_shot_zero_leaves_nothing_completed() {
    let bell = Workload::plain(parse_program(BELL).unwrap());
    let (_d, s, r) = run(&bell, &config(5, 0, "shots:1", Some("shot:0")));
    assert_eq!(r.status, RunStatus::Killed);
    assert_eq!(r.counts.shots_executed, 0);
    assert_eq!(s.latest().unwrap(), None);
}

#[test]
fn kill_at_boundary_commits_that_checkpoint_first() {
    let bell = Workload::plain(parse_program(BELL).unwrap());
    // Op 5 is the ckpt marker after the first measurement.
    let (_d, s, r) = run(&bell, &config(4, 3, "event", Some("op:1:5:2")));
    assert_eq!(r.status, RunStatus::Killed);
    let latest = s.latest_record().unwrap();
    assert_eq!(latest.position.op_index, 5);
    assert_eq!(latest.shot_cursor.in_flight_shot, Some(2));
    assert_eq!(latest.checkpoint_id, r.checkpoints.last().unwrap().id);
}

#[test]
fn bell_resume_is_transparent_at_every_op() {
    let bell = Workload::plain(parse_program(BELL).unwrap());
    let full = run(&bell, &config(4, 7, "region,event", None)).2;
    let p = bell.program();
    for shot in 0..4 {
        for (ri, region) in p.regions.iter().enumerate() {
            for op in region.start_op..region.end_op {
                let spec = format!("op:{ri}:{op}:{shot}");
                let (_d, s, killed) = run(&bell, &config(4, 7, "region,event", Some(&spec)));
                assert_eq!(killed.status, RunStatus::Killed);
                let resumed = resume_workflow(&bell, &"region,event".parse().unwrap(), None, &s, None).unwrap();
                assert_eq!(resumed.output, full.output, "{spec}");
                assert!(resumed.counts.shots_replayed <= 1);
                let ids: Vec<_> = killed
                    .checkpoints
                    .iter()
                    .chain(&resumed.checkpoints)
                    .map(|c| c.id.clone())
                    .collect();
                let full_ids: Vec<_> = full.checkpoints.iter().map(|c| c.id.clone()).collect();
                assert_eq!(ids, full_ids, "{spec}");
            }
        }
    }
}

#[test]
fn backend_outage_recovers_in_process() {
    let bell = Workload::plain(parse_program(BELL).unwrap());
    let full = run(&bell, &config(6, 1, "region", None)).2;
    for (policy, action) in [
        ("region,fail:rollback", "rollback"),
        ("region,fail:restart", "restart"),
        ("region,fail:reschedule", "reschedule"),
    ] {
        let (_d, s, r) = run(&bell, &config(6, 1, policy, Some("down:3-4")));
        assert_eq!(r.status, RunStatus::Completed);
        assert_eq!(r.output, full.output, "{policy}");
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].action, action);
        let latest = s.latest_record().unwrap();
        let backend = &latest.calibration_metadata["backend"];
        if action == "reschedule" {
            assert_eq!(backend, "statevector-sim#1");
        } else {
            assert_eq!(backend, "statevector-sim#0");
        }
        if action == "restart" {
            assert_eq!(r.counts.shots_executed, 6 + 3);
        }
    }
}

#[test]
fn rollback_with_empty_store_falls_back_to_restart() {
    let w = vqe_zz(5);
    let full = run(&w, &config(0, 2, "iter", None)).2;
    // Only convergence checkpoints, none of which fire this early.
    let (_d, s, r) = run(&w, &config(0, 2, "conv:1e-12", Some("down:2")));
    assert_eq!(r.failures[0].action, "restart_fallback");
    assert_eq!(r.output, full.output);
    assert_eq!(s.latest().unwrap(), None);
}

#[test]
fn resume_refuses_other_program() {
    let bell = Workload::plain(parse_program(BELL).unwrap());
    let (_d, s, _) = run(&bell, &config(3, 0, "region", Some("shot:2")));
    let edited = Workload::plain(parse_program(&BELL.replace("h 0", "x 0")).unwrap());
    let err = resume_workflow(&edited, &"region".parse().unwrap(), None, &s, None).unwrap_err();
    assert!(matches!(
        err,
        RuntimeError::Restore(RestoreError::ProgramMismatch { .. })
    ));
}

#[test]
fn torn_put_leaves_previous_latest() {
    let bell = Workload::plain(parse_program(BELL).unwrap());
    let (_d, mut s) = store();
    let before = run_workflow(&bell, &config(1, 0, "region", None), &s).unwrap();
    s.inject_fault(Some(FaultPoint::BeforeRename));
    let err = run_workflow(&bell, &config(2, 0, "region", None), &s).unwrap_err();
    assert!(matches!(err, RuntimeError::Store(_)));
    assert_eq!(s.latest().unwrap(), Some(before.checkpoints.last().unwrap().id.clone()));
    assert_eq!(s.list().unwrap().len(), before.checkpoints.len());
}

#[test]
fn ghz_every_shot_has_unit_fidelity() {
    for n in [3, 5] {
        let w = Workload::ghz(n).unwrap();
        let (_d, _s, r) = run(&w, &config(40, 0, "region", None));
        let Some(WorkloadOutput::Shots {
            ghz_fidelity,
            histogram,
            ..
        }) = r.output
        else {
            panic!()
        };
        assert!(ghz_fidelity.unwrap().iter().all(|f| (f - 1.0).abs() < 1e-10));
        assert!(histogram.len() > 1, "both branches show up in 40 shots");
    }
}

#[test]
fn reuse_records_pre_reset_bits() {
    let w = Workload::reuse(2).unwrap();
    let (_d, s, r) = run(&w, &config(3, 0, "event", None));
    let Some(WorkloadOutput::Shots {
        transcript, registers, ..
    }) = r.output
    else {
        panic!()
    };
    // Two measurements, two resets and a final measurement per shot.
    assert_eq!(transcript.len(), 15);
    assert!(transcript.iter().all(|e| !e.forced));
    for (shot, regs) in registers.iter().enumerate() {
        let c0 = transcript
            .iter()
            .find(|e| e.shot_index == shot as u64 && e.op_index == 3)
            .unwrap();
        assert_eq!(regs["c"][0], c0.outcome);
    }
    // Marker checkpoints right after each pre-reset measurement.
    let rec = s.get(&r.checkpoints[0].id).unwrap();
    assert_eq!(rec.class, CheckpointClass::Classicalized);
    assert_eq!(rec.transcript.len(), 1);
}

#[test]
fn repcode_frames_and_logical_checkpoints() {
    let clean = Workload::repetition_code(3, None).unwrap();
    let (_d, _s, r) = run(&clean, &config(2, 0, "region", None));
    let Some(WorkloadOutput::Shots { decoder, .. }) = r.output else {
        panic!()
    };
    for d in decoder.unwrap() {
        assert_eq!(
            d,
            DecodedShot {
                syndrome_history: vec![vec![0, 0]; 3],
                pauli_frame: "III".into(),
                logical: 0
            }
        );
    }
    let w = Workload::repetition_code(3, Some((1, 1))).unwrap();
    let (_d, s, r) = run(&w, &config(1, 0, "region", None));
    let Some(WorkloadOutput::Shots { decoder, .. }) = &r.output else {
        panic!()
    };
    let d = &decoder.as_ref().unwrap()[0];
    assert_eq!(d.syndrome_history, vec![vec![1, 1]; 3]);
    assert_eq!(d.pauli_frame, "IXI");
    assert_eq!(d.logical, 0);
    let logical: Vec<_> = r
        .checkpoints
        .iter()
        .filter(|c| c.class == CheckpointClass::Logical)
        .collect();
    assert_eq!(logical.len(), 4);
    let last = s.get(&logical[3].id).unwrap();
    assert_eq!(last.decoder_state.unwrap().pauli_frame, "IXI");
}

#[test]
fn falqon_resume_reproduces_betas() {
    let mut c = FalqonConfig::two_qubit_default();
    c.layers = 12;
    let w = Workload::falqon(c).unwrap();
    let full = run(&w, &config(0, 0, "iter", None)).2;
    for k in 0..=12 {
        let (_d, s, killed) = run(&w, &config(0, 0, "iter", Some(&format!("iter:{k}"))));
        assert_eq!(killed.status, RunStatus::Killed);
        let resumed = match resume_workflow(&w, &"iter".parse().unwrap(), None, &s, None) {
            Ok(r) => r,
            Err(RuntimeError::Store(_)) if k == 0 => continue,
            Err(e) => panic!("{e}"),
        };
        assert_eq!(resumed.counts.iterations_executed, 12 - k);
        assert_eq!(resumed.output, full.output, "layer {k}");
    }
}

#[test]
fn identical_runs_give_identical_reports() {
    let w = Workload::ghz(5).unwrap();
    let a = run(&w, &config(20, 9, "region,shots:5", None)).2;
    let b = run(&w, &config(20, 9, "region,shots:5", None)).2;
    assert_eq!(a.without_timing(), b.without_timing());
}
