use phctl_core::harness::{
    compute_metrics, experiment_1, experiment_2, run_experiment, ExperimentConfig, SetpointSchedule, SimTrace,
};
use phctl_core::{ControllerKind, Error};

#[test]
fn resting_plant_stays_put() {
    for ph in [6.0, 7.0, 9.0] {
        let mut cfg = experiment_1();
        cfg.schedule = SetpointSchedule::constant(ph);
        cfg.initial_ph = ph;
        cfg.duration = 200.0;
        let tr = run_experiment(&cfg).unwrap();
        assert_eq!(tr.len(), 2000);
        let worst = tr.rows.iter().map(|r| (r.ph - ph).abs()).fold(0.0, f64::max);
        assert!(worst <= 0.05, "pH {ph}: drift {worst}");
    }
}

#[test]
fn config_file_to_csv_and_back() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = experiment_2();
    cfg.duration = 400.0;
    cfg.noise_sigma = 0.01;
    cfg.seed = 7;
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, cfg.to_json()).unwrap();
    let loaded = ExperimentConfig::load(&cfg_path).unwrap();
    assert_eq!(loaded, cfg);
    assert_eq!(loaded.to_json(), cfg.to_json());

    let tr = run_experiment(&loaded).unwrap();
    tr.check_uniform().unwrap();
    let csv = dir.path().join("trace.csv");
    tr.write_csv(&csv).unwrap();
    let back = SimTrace::read_csv(&csv).unwrap();
    assert_eq!(back, tr);
    let m = compute_metrics(&back, &loaded.schedule).unwrap();
    assert_eq!(m.segments.len(), 2);
    assert!(m.rmse_ph <= 3.0);
}

#[test]
fn commands_and_flows_respect_limits() {
    for kind in [ControllerKind::Hybrid, ControllerKind::FuzzyOnly] {
        let mut cfg = experiment_1();
        cfg.cascade.controller_kind = kind;
        let tr = run_experiment(&cfg).unwrap();
        let fmax = cfg.plant.f_max;
        for r in &tr.rows {
            for f in [r.f1_cmd, r.f2_cmd, r.f1, r.f2] {
                assert!((0.0..=fmax).contains(&f), "{kind:?} t={}: {f}", r.t);
            }
            assert!(r.alpha >= 0.0 && r.beta >= 0.0);
        }
    }
}

#[test]
fn missing_config_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    match ExperimentConfig::load(dir.path().join("nope.json")) {
        Err(Error::Io { .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn fine_step_square_wave_has_all_segments() {
    let mut cfg = experiment_2();
    cfg.dt = 0.05;
    let tr = run_experiment(&cfg).unwrap();
    assert_eq!(tr.len(), 48000);
    let m = compute_metrics(&tr, &cfg.schedule).unwrap();
    assert_eq!(m.segments.len(), 8);
}
