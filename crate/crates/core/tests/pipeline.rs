use cslearn::baselines::StlsqParams;
use cslearn::dynsys::{finite_difference, integrate_rk4, lorenz_rhs, OdeSystem, ScenarioConfig, SystemKind, Trajectory};
use cslearn::experiments::bench::{run_scenario_grid, write_results_csv, BenchConfig};
use cslearn::experiments::{equations_correct, fit_dynamics, Method, MethodSettings};
use cslearn::build_dictionary;

fn bench_config(seed: u64) -> BenchConfig {
    serde_json::from_value(serde_json::json!({
        "master_seed": seed,
        "dictionary": { "features": 3, "max_individual": 2, "max_collective": 4 },
        "scenarios": [
            { "kind": "dynamics", "id": "lz-a", "system": "lorenz", "n": 1200, "dt": 0.002, "sigma": 0.001 },
            { "kind": "dynamics", "id": "lz-b", "system": "lorenz", "n": 600, "dt": 0.005, "sigma": 0.01 },
            { "kind": "polynomial", "id": "poly-a", "size": 2, "n": 60, "sigma": 0.01 },
            { "kind": "polynomial", "id": "poly-b", "size": 3, "n": 60, "sigma": 0.01 }
        ],
        "methods": ["stlsq", "frols"],
        "forecast": { "initial_values": 3, "burn_in": 1.0, "span": 5.0 }
    }))
    .unwrap()
}

fn csv_of(config: &BenchConfig) -> String {
    let results = run_scenario_grid(config).unwrap();
    let mut buf = Vec::new();
    write_results_csv(&results, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn stlsq_learns_lorenz_from_clean_fine_grained_data() {
    let traj = ScenarioConfig {
        system: SystemKind::Lorenz,
        n: 15_000,
        dt: 2e-4,
        sigma: 0.0,
        seed: 0,
    }
    .simulate()
    .unwrap();
    let dict = build_dictionary(3, 2, 3);
    let settings = MethodSettings {
        stlsq: StlsqParams::default(),
        ..MethodSettings::default()
    };
    let (learnt, _) = fit_dynamics(&Method::Stlsq, &traj, &dict, &settings).unwrap();
    assert_eq!(equations_correct(&OdeSystem::lorenz(), &learnt), 3);
    // Weights close to the true parameters.
    let dx = &learnt.equations[0];
    let w: Vec<f64> = dx.iter().map(|(_, w)| *w).collect();
    assert!(w.iter().all(|v| (v.abs() - 10.0).abs() < 0.2), "{w:?}");
}

#[test]
fn forward_differences_track_the_vector_field() {
    let traj = integrate_rk4(
        |s, out| out.copy_from_slice(&lorenz_rhs(s)),
        &SystemKind::Lorenz.initial_state(),
        1e-4,
        2000,
    )
    .unwrap();
    let data = finite_difference(&traj).unwrap();
    for (i, state) in data.states.iter().enumerate().step_by(97) {
        let f = lorenz_rhs(state);
        for d in 0..3 {
            // Forward differences carry an O(dt) bias of (dt/2)·J·f.
            assert!((data.targets[d][i] - f[d]).abs() < 0.05 * (1.0 + f[d].abs()));
        }
    }
}

#[test]
fn trajectory_csv_roundtrip() {
    let traj = ScenarioConfig {
        system: SystemKind::RabinovichFabrikant,
        n: 600,
        dt: 0.01,
        sigma: 0.01,
        seed: 9,
    }
    .simulate()
    .unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    traj.write_csv(std::fs::File::create(file.path()).unwrap()).unwrap();
    let back = Trajectory::read_csv(std::io::BufReader::new(std::fs::File::open(file.path()).unwrap())).unwrap();
    assert_eq!(back.len(), traj.len());
    assert_eq!(back.states, traj.states);
    assert!((back.dt - traj.dt).abs() < 1e-12);
}

#[test]
fn bench_rows_and_determinism() {
    let config = bench_config(17);
    let a = csv_of(&config);
    let b = csv_of(&config);
    assert_eq!(a, b);

    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "scenario_id,method,metric,value");
    // Dynamics cells report six metrics, polynomial cells four.
    assert_eq!(lines.len() - 1, 2 * 2 * 6 + 2 * 2 * 4);
    let groups: std::collections::BTreeSet<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(groups.len(), 8);

    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    assert_eq!(pool.install(|| csv_of(&config)), a);
    assert_ne!(csv_of(&bench_config(18)), a);
}

#[test]
fn unknown_config_fields_are_rejected() {
    let err = serde_json::from_value::<BenchConfig>(serde_json::json!({
        "master_seed": 1,
        "methods": ["bsr"],
        "mehtods": ["bsr"]
    }));
    assert!(err.is_err());
}

#[test]
fn failing_cells_are_recorded_not_fatal() {
    let mut config = bench_config(5);
    // Too small to hold the generator's degree-4 terms.
    config.dictionary.max_collective = 3;
    let results = run_scenario_grid(&config).unwrap();
    // The truth cannot be expressed in this dictionary, so those scenarios never run.
    assert_eq!(results.scenarios_executed, 2);
    for cell in &results.cells {
        let failed = cell.metrics.iter().find(|(m, _)| m == "failed").unwrap().1;
        if cell.scenario_id.starts_with("poly") {
            assert_eq!(failed, 1.0);
            assert!(cell.error.is_some());
        } else {
            assert_eq!(failed, 0.0);
        }
    }
}
