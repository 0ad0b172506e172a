use fdtm::experiments::{max_distance_to_circle, run, ExperimentConfig, ExperimentKind};
use fdtm::measures::{sample_circle, sample_ring, RingSpec};
use fdtm::{fdtm_distance, DtmParams, GraphTopology, WeightMode};

#[test]
fn smaller_mass_keeps_geodesics_closer_to_the_circle() {
    let n = 1024;
    let seeds = 20;
    let mut mean_gap = Vec::new();
    for m in [0.2, 0.1, 0.05] {
        let params = DtmParams::new(m, 2.0, 2.0).unwrap();
        let total: f64 = (0..seeds)
            .map(|seed| {
                let cloud = sample_circle(n, 1000 + seed).unwrap();
                let geo = fdtm_distance(
                    &cloud,
                    &GraphTopology::Complete,
                    &WeightMode::subdivided_default(n),
                    &params,
                    &[1.0, 0.0],
                    &[-1.0, 0.0],
                )
                .unwrap();
                max_distance_to_circle(&geo.polyline, 1.0)
            })
            .sum();
        mean_gap.push(total / seeds as f64);
    }
    assert!(
        mean_gap[0] > mean_gap[1] && mean_gap[1] > mean_gap[2],
        "{mean_gap:?}"
    );
}

#[test]
fn single_repetition_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(ExperimentKind::CircleConvergence);
    config.sample_sizes = vec![64, 128, 256];
    config.repetitions = 1;
    config.seed = 3;
    config.output_path = dir.path().join("circle.csv");
    let first = run(&config).unwrap();
    let a = std::fs::read(&first[0]).unwrap();
    run(&config).unwrap();
    let b = std::fs::read(&first[0]).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 3);
    assert!(text.contains("# metric: mean absolute error"));
}

#[test]
fn geodesic_sweep_writes_paths_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(ExperimentKind::GeodesicDump);
    config.sample_sizes = vec![200];
    config.grid_resolution = 9;
    config.output_path = dir.path().join("geo.csv");
    let written = run(&config).unwrap();
    assert_eq!(written.len(), 12);
    let grid = std::fs::read_to_string(dir.path().join("geo_m0.05_beta2_dtm.csv")).unwrap();
    let rows: Vec<&str> = grid.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 81);
    assert!(rows.iter().all(|r| r.split(',').count() == 3));
    let geo = std::fs::read_to_string(dir.path().join("geo_m0.2_beta1.csv")).unwrap();
    let last = geo.lines().last().unwrap();
    assert_eq!(last, "-1,0");
}

#[test]
fn shortcut_takes_round_sqrt_n_points() {
    for n in [256, 1000, 4096] {
        let spec = RingSpec::new(n).with_default_shortcut();
        assert_eq!(spec.shortcut, Some((n as f64).sqrt().round() as usize));
        let plain = sample_ring(&RingSpec::new(n), 5).unwrap();
        let cut = sample_ring(&spec, 5).unwrap();
        let k = spec.shortcut.unwrap();
        // paired seeds: only the shortcut points differ
        for i in 0..n - k {
            assert_eq!(plain.point(i), cut.point(i));
        }
        let inner = spec.inner;
        let in_hole = (n - k..n)
            .filter(|&i| cut.point(i)[0].hypot(cut.point(i)[1]) < inner)
            .count();
        assert_eq!(in_hole, k);
    }
}
