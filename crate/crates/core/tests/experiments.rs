use std::fs;
use std::path::Path;

use adafw::experiments::{run_experiment, ExperimentKind, ExperimentSpec};
use adafw::solver::TRACE_HEADER;

fn small(kind: ExperimentKind, dir: &Path) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(kind, dir);
    match kind {
        ExperimentKind::DOptimal => {
            spec.m = 4;
            spec.n = 12;
        }
        ExperimentKind::Poisson => {
            spec.m = 30;
            spec.n = 10;
        }
        ExperimentKind::Distributed => {
            spec.n = 6;
            spec.nodes = 4;
            spec.max_iterations = 2000;
            spec.gap_tolerance = 1e-5;
        }
    }
    if kind != ExperimentKind::Distributed {
        spec.max_iterations = 80;
    }
    spec
}

/// CSV contents with the trailing elapsed-seconds column removed.
fn without_timing(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|line| match line.rsplit_once(',') {
            Some((head, _)) if !line.starts_with('#') => head.to_string(),
            _ => line.to_string(),
        })
        .collect()
}

fn summary_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("summary.txt")).unwrap();
    let table = text.split("\n\n").nth(1).unwrap();
    table.lines().skip(1).map(|l| l.split_whitespace().map(str::to_string).collect()).collect()
}

#[test]
fn simplex_experiments_write_one_trace_per_variant() {
    for kind in [ExperimentKind::DOptimal, ExperimentKind::Poisson] {
        let dir = tempfile::tempdir().unwrap();
        let spec = small(kind, dir.path());
        let outcome = run_experiment(&spec).unwrap();
        assert!(!outcome.any_failed());
        for variant in &spec.variants {
            let path = dir.path().join(format!("{}.csv", variant.name()));
            let text = fs::read_to_string(&path).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next(), Some(TRACE_HEADER));
            let rows = lines.count();
            assert!(rows >= 1 && rows <= spec.max_iterations + 1, "{kind}: {rows} rows");
            let run = outcome.get(variant.name()).unwrap();
            assert!(run.best_value() >= outcome.f_star);
        }
        assert!(dir.path().join("summary.txt").exists());
    }
}

#[test]
fn summary_agrees_with_traces() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small(ExperimentKind::DOptimal, dir.path());
    let outcome = run_experiment(&spec).unwrap();
    let rows = summary_rows(dir.path());
    assert_eq!(rows.len(), spec.variants.len());
    for row in rows {
        let label = &row[0];
        let csv = fs::read_to_string(dir.path().join(format!("{label}.csv"))).unwrap();
        let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
        let final_f: f64 = row[2].parse().unwrap();
        assert_eq!(final_f, last[1].parse::<f64>().unwrap());
        let residual: f64 = row[3].parse().unwrap();
        assert_eq!(residual, final_f - outcome.f_star);
        assert_eq!(row[4], last[7], "cumulative inner checks of {label}");
        let run = outcome.get(label).unwrap();
        assert_eq!(row[1].parse::<usize>().unwrap(), run.iterations());
    }
}

#[test]
fn same_seed_gives_identical_traces() {
    for kind in [ExperimentKind::DOptimal, ExperimentKind::Poisson, ExperimentKind::Distributed] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&small(kind, a.path())).unwrap();
        run_experiment(&small(kind, b.path())).unwrap();
        let mut compared = 0;
        for entry in fs::read_dir(a.path()).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "csv") {
                let twin = b.path().join(path.file_name().unwrap());
                assert_eq!(without_timing(&path), without_timing(&twin), "{}", path.display());
                compared += 1;
            }
        }
        assert!(compared >= 2, "{kind}");
    }
}

#[test]
fn different_seeds_give_different_instances() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut spec = small(ExperimentKind::DOptimal, a.path());
    spec.save_instance = Some(a.path().join("instance.txt"));
    run_experiment(&spec).unwrap();
    spec.seed = 1;
    spec.output_dir = b.path().to_path_buf();
    spec.save_instance = Some(b.path().join("instance.txt"));
    run_experiment(&spec).unwrap();
    assert_ne!(
        fs::read_to_string(a.path().join("instance.txt")).unwrap(),
        fs::read_to_string(b.path().join("instance.txt")).unwrap()
    );
}

#[test]
fn saved_instances_reload_to_the_same_run() {
    for kind in [ExperimentKind::DOptimal, ExperimentKind::Poisson, ExperimentKind::Distributed] {
        let first = tempfile::tempdir().unwrap();
        let second = tempfile::tempdir().unwrap();
        let instance = first.path().join("instance.txt");
        let mut spec = small(kind, first.path());
        spec.save_instance = Some(instance.clone());
        let original = run_experiment(&spec).unwrap();

        let mut reload = small(kind, second.path());
        reload.seed = 99;
        reload.load_instance = Some(instance);
        let replay = run_experiment(&reload).unwrap();
        assert_eq!(original.f_star, replay.f_star, "{kind}");
        for o in &original.outcomes {
            let a = o.run.as_ref().unwrap();
            let b = replay.get(&o.label).unwrap();
            assert_eq!(a.trace.len(), b.trace.len(), "{kind} {}", o.label);
            assert_eq!(a.final_value(), b.final_value(), "{kind} {}", o.label);
        }
    }
}

#[test]
fn distributed_traces_carry_ledger_footers() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&small(ExperimentKind::Distributed, dir.path())).unwrap();
    assert!(!outcome.any_failed());
    for label in ["similarity", "euclidean"] {
        let text = fs::read_to_string(dir.path().join(format!("{label}.csv"))).unwrap();
        let footer = text.lines().last().unwrap();
        assert!(footer.starts_with("# rounds="), "{footer}");
        let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
        let rounds: usize = footer.split_whitespace().nth(1).unwrap().trim_start_matches("rounds=").parse().unwrap();
        // one aggregation per trace row, plus none for inner checks
        assert_eq!(rounds, rows, "{label}");
    }
}

#[test]
fn invalid_specs_are_rejected_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let mut spec = small(ExperimentKind::DOptimal, &out);
    spec.n = spec.m;
    assert!(run_experiment(&spec).is_err());
    assert!(!out.exists());
}
