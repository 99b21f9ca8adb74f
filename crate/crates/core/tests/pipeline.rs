//! End-to-end use of the library: generate, persist, factorize, score.

use ngmca::algorithms::{self, AlgorithmConfig, AlgorithmId};
use ngmca::bench::{self, BenchmarkConfig, InstanceGrid, Metric};
use ngmca::container;
use ngmca::datagen::{gen_instance, InstanceSpec, NoiseLevel, SourceModel};
use ngmca::metrics;

#[test]
fn persisted_instance_gives_the_same_scores() {
    let dir = tempfile::tempdir().unwrap();
    let spec = InstanceSpec {
        m: 40,
        n: 80,
        r: 5,
        p_s: 0.15,
        snr_db: NoiseLevel::SnrDb(30.0),
        seed: 21,
        ..Default::default()
    };
    let inst = gen_instance(&spec).unwrap();
    let path = dir.path().join("inst.bin");
    container::save_instance(&path, &inst).unwrap();
    let loaded = container::load_instance(&path).unwrap();
    assert_eq!(loaded, inst);

    let cfg = AlgorithmConfig::new(AlgorithmId::NgmcaS, 5);
    let report = algorithms::run(&loaded.y, &cfg, None).unwrap();
    let fpath = dir.path().join("f.bin");
    container::save_factors(&fpath, &report.pair, &cfg).unwrap();
    let (pair, cfg_back) = container::load_factors(&fpath).unwrap();
    assert_eq!(cfg_back, cfg);
    assert_eq!(pair, report.pair);

    let score = metrics::pair_sources(&pair.s, &inst.s_ref, &inst.z).unwrap();
    assert!(score.mean_sdr_db > 20.0, "{}", score.mean_sdr_db);
}

#[test]
fn sparse_methods_beat_plain_least_squares_on_sparse_data() {
    let inst = gen_instance(&InstanceSpec {
        m: 60,
        n: 120,
        r: 6,
        p_s: 0.1,
        snr_db: NoiseLevel::SnrDb(15.0),
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let sdr = |id: AlgorithmId| {
        let cfg = AlgorithmConfig::new(id, 6);
        let report = algorithms::run(&inst.y, &cfg, Some(&inst.a_ref)).unwrap();
        metrics::pair_sources(&report.pair.s, &inst.s_ref, &inst.z).unwrap().mean_sdr_db
    };
    let (ngmca, als, oracle) = (sdr(AlgorithmId::NgmcaS), sdr(AlgorithmId::Als), sdr(AlgorithmId::Oracle));
    assert!(ngmca > als, "ngmca {ngmca} vs als {als}");
    assert!(oracle > als, "oracle {oracle} vs als {als}");
}

#[test]
fn nmr_instances_use_the_bundled_corpus() {
    let inst = gen_instance(&InstanceSpec {
        m: 15,
        n: 1200,
        r: 15,
        snr_db: NoiseLevel::SnrDb(15.0),
        seed: 0,
        source_model: SourceModel::Nmr {
            corpus: None,
            fwhm_samples: 3.0,
        },
        ..Default::default()
    })
    .unwrap();
    assert_eq!(inst.s_ref.nrows(), 15);
    assert!(inst.s_ref.iter().all(|v| *v >= 0.0));
    // Peaks are narrow: most samples of each spectrum are near zero.
    for row in inst.s_ref.row_iter() {
        let top = row.amax();
        let small = row.iter().filter(|v| **v < 1e-3 * top).count();
        assert!(small > 600, "{small}");
    }
}

#[test]
fn campaign_files_are_reproducible() {
    let cfg = BenchmarkConfig {
        grid: InstanceGrid {
            r: vec![3],
            m: vec![20],
            n: vec![40],
            p_s: vec![0.2],
            snr_db: vec![NoiseLevel::SnrDb(10.0), NoiseLevel::SnrDb(20.0)],
            ..Default::default()
        },
        algorithms: vec![
            AlgorithmConfig {
                outer_iterations: Some(50),
                ..AlgorithmConfig::new(AlgorithmId::NgmcaS, 3)
            },
            AlgorithmConfig::new(AlgorithmId::HalsSparse, 3),
        ],
        trials_per_cell: 2,
        base_seed: 5,
        ..Default::default()
    };
    let a = bench::run_campaign_with(&cfg, Some(1)).unwrap();
    let b = bench::run_campaign_with(&cfg, Some(3)).unwrap();
    assert_eq!(bench::records_to_csv(&a).unwrap(), bench::records_to_csv(&b).unwrap());
    assert!(a.iter().all(|r| r.is_ok()));

    let cond = BenchmarkConfig {
        metric: Metric::Condition,
        algorithms: vec![],
        ..cfg
    };
    let recs = bench::run_campaign(&cond).unwrap();
    assert_eq!(recs.len(), 4);
}

#[test]
fn shipped_config_files_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
    let spec: InstanceSpec = serde_json::from_str(&read("instance.json")).unwrap();
    spec.validate().unwrap();
    let algo: AlgorithmConfig = serde_json::from_str(&read("algo_ngmca_s.json")).unwrap();
    algo.validate().unwrap();
    for name in ["snr_grid.json", "conditioning.json", "nmr.json"] {
        let cfg: BenchmarkConfig = serde_json::from_str(&read(name)).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
