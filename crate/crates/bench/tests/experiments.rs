use pricing_bench::experiments::{eval_sweep, generate, learn_sweep, parse_methods, Method};
use pricing_bench::results::lookup;
use pricing_bench::{ExperimentConfig, Preset};
use pricing_core::ladder::validate;
use pricing_core::losses::Estimator;

fn small_eval() -> ExperimentConfig {
    ExperimentConfig {
        n_grid: vec![60],
        alpha_grid: vec![0.0, 1.0],
        reps: 4,
        cv_folds: 3,
        ..Preset::EvalSweep.defaults()
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small_eval();
    let pool = |k| rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
    let one = pool(1).install(|| eval_sweep(&cfg)).unwrap();
    let three = pool(3).install(|| eval_sweep(&cfg)).unwrap();
    assert_eq!(one, three);
}

#[test]
fn every_row_carries_seed_and_hash() {
    let cfg = small_eval();
    let rows = eval_sweep(&cfg).unwrap();
    let hash = cfg.hash();
    assert!(rows.iter().all(|r| r.config_hash == hash));
    let per_rep: Vec<_> = rows.iter().filter(|r| r.rep != "all").collect();
    assert!(per_rep.iter().all(|r| r.stderr.is_none()));
    let seeds: std::collections::HashSet<u64> = per_rep.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 4);
    let s = lookup(&rows, "mv", 60, "1", 0.0, "sq_error").unwrap();
    assert_eq!(s.count, 4);
    assert!(s.stderr.is_finite());
}

#[test]
fn demand_free_methods_repeat_across_alpha() {
    let rows = eval_sweep(&small_eval()).unwrap();
    let a = lookup(&rows, "robust", 60, "0", 0.0, "sq_error").unwrap();
    let b = lookup(&rows, "robust", 60, "1", 0.0, "sq_error").unwrap();
    assert_eq!(a, b);
}

#[test]
fn learned_rewards_are_below_the_oracle() {
    let cfg = ExperimentConfig {
        n_grid: vec![80],
        reps: 2,
        test_size: 500,
        estimators: vec!["ips".into(), "robust".into()],
        train: pricing_bench::config::TrainSection { lr: 0.05, iters: 200 },
        ..Preset::LearnSweep.defaults()
    };
    let rows = learn_sweep(&cfg).unwrap();
    let oracle = lookup(&rows, "oracle", 80, "", 0.0, "reward").unwrap();
    for m in ["ips", "robust"] {
        let s = lookup(&rows, m, 80, "fitted", 0.0, "reward").unwrap();
        assert!(s.mean <= oracle.mean + 1e-12, "{m}: {} > {}", s.mean, oracle.mean);
        assert!(s.mean > 0.0);
    }
}

#[test]
fn generated_data_is_consistent() {
    let cfg = ExperimentConfig {
        n: 400,
        ..Preset::Gen.defaults()
    };
    let data = generate(&cfg).unwrap();
    assert_eq!(data.len(), 400);
    assert!(validate(&data).is_clean());
    assert_eq!(generate(&cfg).unwrap(), data);
}

#[test]
fn method_names_parse() {
    let names: Vec<String> = ["ips", "CMix", "switching:0.25", "dr"].map(String::from).to_vec();
    let m = parse_methods(&names).unwrap();
    assert_eq!(m[1], Method::Cmix);
    assert_eq!(m[0], Method::Fixed(Estimator::Ips));
    assert_eq!(m[2].name(), "switching:0.25");
    assert!(parse_methods(&["nope".to_string()]).is_err());
    assert!(parse_methods(&[]).is_err());
}
