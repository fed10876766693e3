//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Structural criteria (1-6 and the external-CSV contract) decide the exit
//! status. The statistical reproduction criteria (7-10) compare desk-scale
//! simulations with fixed reference values and are reported without gating;
//! set `ACCEPTANCE_STRICT=1` to make them gate as well. Set
//! `ACCEPTANCE_QUICK=1` to skip 7-10.

use std::time::{Duration, Instant};

use pricing_bench::experiments::{eval_sweep, learn_sweep, sales_regime};
use pricing_bench::results::{lookup, Summary};
use pricing_bench::{ExperimentConfig, Preset};
use pricing_core::csvio::{read_dataset, write_dataset};
use pricing_core::densemat::dot;
use pricing_core::estimators::{
    dr_decomposition, generalized_inverse_residual, left_inverse_residual, r_cips, r_ips, r_mv, r_robust,
    r_switching, EstimatorKind, ReweightMatrix,
};
use pricing_core::losses::{estimate_policy_value, valuation_loss_vector, Estimator};
use pricing_core::oracle::{
    dr_equivalence_sweep, enumerated_variance, exact_expectation, minimax_grid, null_space_of_transpose,
    qp_min_variance, random_feasible_perturbation, random_instance,
};
use pricing_core::policy::{objective_and_gradient, FixedPolicy, LinearSoftmaxPolicy};
use pricing_core::{
    Dataset, Error, ObservedRecord, PolicyDist, PriceLadder, Propensities, SwitchingWeight, TransferMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    gating: bool,
}

struct Suite {
    outcomes: Vec<Outcome>,
}

impl Suite {
    fn run<F>(&mut self, id: &'static str, title: &'static str, budget: Duration, gating: bool, f: F)
    where
        F: FnOnce() -> Result<(bool, String), Error>,
    {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok((p, d)) if elapsed <= budget => (p, d),
            Ok((_, d)) => (false, format!("{d}; over time budget {budget:?}")),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "[{}] {id:<4} {title} | {detail} | {:.1} s",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        self.outcomes.push(Outcome {
            id,
            title,
            pass,
            detail,
            elapsed,
            gating,
        });
    }

    /// Records several sub-criteria computed together.
    fn record(&mut self, id: &'static str, title: &'static str, pass: bool, detail: String, elapsed: Duration, gating: bool) {
        println!(
            "[{}] {id:<4} {title} | {detail} | {:.1} s",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        self.outcomes.push(Outcome {
            id,
            title,
            pass,
            detail,
            elapsed,
            gating,
        });
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn fmt(s: &Summary) -> String {
    format!("{:.4}±{:.4}", s.mean, s.stderr)
}

// ---------------------------------------------------------------- 1-6

fn criterion_1() -> Result<(bool, String), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut left, mut general) = (0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let m = rng.random_range(2..=10);
        let inst = random_instance(m, &mut rng)?;
        let t = TransferMatrix::build(&inst.pi0)?;
        let fy = t.push_forward(&inst.fv_hat)?;
        let mv = r_mv(&t, &fy)?;
        let rob = r_robust(&t)?;
        let sw = r_switching(&mv, &rob, SwitchingWeight::new(rng.random())?)?;
        for r in [&mv, &rob, &sw] {
            left = left.max(left_inverse_residual(r, &t)?);
        }
        let ips = r_ips(&inst.pi0)?;
        let cips = r_cips(&inst.pi0)?;
        for _ in 0..50 {
            let raw: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = raw.iter().sum();
            let pi = PolicyDist::new(raw.into_iter().map(|x| x / s).collect())?;
            let l = valuation_loss_vector(&pi, &inst.ladder)?;
            for r in [&ips, &cips] {
                general = general.max(generalized_inverse_residual(r, &t, l.values())?);
            }
        }
    }
    Ok((
        left <= 1e-9 && general <= 1e-9,
        format!("max |RT − I| = {left:.2e}, max |T'R'l − l| = {general:.2e}"),
    ))
}

fn criterion_2() -> Result<(bool, String), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let m = rng.random_range(2..=10);
        let inst = random_instance(m, &mut rng)?;
        let t = TransferMatrix::build(&inst.pi0)?;
        let fy = t.push_forward(&inst.fv_hat)?;
        let mv = r_mv(&t, &fy)?;
        let rob = r_robust(&t)?;
        let dr = ReweightMatrix::new(dr_decomposition(&t, &inst.fv_hat, &inst.pi0)?.combined()?, EstimatorKind::Dr)?;
        let sw = r_switching(&mv, &rob, SwitchingWeight::new(0.5)?)?;
        let l = valuation_loss_vector(&inst.policy, &inst.ladder)?;
        let truth = dot(inst.fv.as_slice(), l.values());
        for r in [&mv, &rob, &dr, &sw, &r_ips(&inst.pi0)?, &r_cips(&inst.pi0)?] {
            worst = worst.max((exact_expectation(r, &l, &inst.fv, &inst.pi0)? - truth).abs());
        }
    }
    Ok((worst <= 1e-10, format!("max |E[loss] − f_V'l_V| = {worst:.2e}")))
}

fn criterion_3() -> Result<(bool, String), Error> {
    let s = dr_equivalence_sweep(200, 303)?;
    Ok((
        s.max_identity_error <= 1e-9 && s.max_decomposition_error <= 1e-8,
        format!(
            "identity {:.2e}, decomposition {:.2e}",
            s.max_identity_error, s.max_decomposition_error
        ),
    ))
}

fn criterion_4() -> Result<(bool, String), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut qp_err, mut worst_gap, mut checked) = (0.0_f64, f64::INFINITY, 0usize);
    for _ in 0..20 {
        let m = rng.random_range(2..=6);
        let inst = random_instance(m, &mut rng)?;
        let t = TransferMatrix::build(&inst.pi0)?;
        let fy = t.push_forward(&inst.fv)?.floored(1e-6);
        let mv = r_mv(&t, &fy)?;
        qp_err = qp_err.max(qp_min_variance(&t, &fy)?.sub(mv.mat())?.max_abs());
        let l = valuation_loss_vector(&inst.policy, &inst.ladder)?;
        let base = enumerated_variance(&mv, &l, fy.as_slice());
        let null = null_space_of_transpose(t.mat())?;
        for _ in 0..10_000 {
            let scale = 10f64.powf(rng.random_range(-3.0..0.5));
            let p = random_feasible_perturbation(mv.mat(), &null, scale, &mut rng)?;
            let p = ReweightMatrix::new(p, EstimatorKind::Mv)?;
            worst_gap = worst_gap.min(enumerated_variance(&p, &l, fy.as_slice()) - base);
            checked += 1;
        }
    }
    Ok((
        qp_err <= 1e-6 && worst_gap >= -1e-12,
        format!("max |R_MV − R_QP| = {qp_err:.2e}, min variance gain over {checked} perturbations = {worst_gap:.2e}"),
    ))
}

fn criterion_5() -> Result<(bool, String), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut cases = vec![(2usize, 0.01, Propensities::uniform(2), PolicyDist::new(vec![0.4, 0.6])?, PriceLadder::integers(2)?)];
    for (m, step) in [(2usize, 0.01), (3, 0.05)] {
        let inst = random_instance(m, &mut rng)?;
        cases.push((m, step, inst.pi0, inst.policy, inst.ladder));
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, step, pi0, policy, ladder) in cases {
        let t = TransferMatrix::build(&pi0)?;
        let l = valuation_loss_vector(&policy, &ladder)?;
        let rep = minimax_grid(&t, &l, step)?;
        let slack = 1e-9 * rep.robust.max_variance.abs().max(1.0);
        let ok = rep.robust_wins(slack) && rep.argmax_within_step();
        pass &= ok;
        parts.push(format!(
            "m={m}: robust {:.4} vs best other {:.4} ({}), argmax distance {:.3}",
            rep.robust.max_variance, rep.best_other.max_variance, rep.best_other.name.split('[').next().unwrap_or(""), rep.argmax_distance
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn criterion_6() -> Result<(bool, String), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let m = rng.random_range(2..=5);
        let d = rng.random_range(1..=4);
        let n = rng.random_range(3..=12);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let coefs: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let theta: Vec<f64> = (0..m * (d + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let feats: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let policy = LinearSoftmaxPolicy::from_theta(m, d, theta.clone())?;
        let (_, grad) = objective_and_gradient(&policy, &feats, &coefs);
        let h = 1e-5;
        for k in 0..theta.len() {
            let mut plus = theta.clone();
            plus[k] += h;
            let mut minus = theta.clone();
            minus[k] -= h;
            let fp = objective_and_gradient(&LinearSoftmaxPolicy::from_theta(m, d, plus)?, &feats, &coefs).0;
            let fm = objective_and_gradient(&LinearSoftmaxPolicy::from_theta(m, d, minus)?, &feats, &coefs).0;
            let fd = (fp - fm) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    Ok((worst <= 1e-4, format!("max relative error {worst:.2e}")))
}

// ------------------------------------------------------ CSV contract

fn csv_schema() -> Result<(bool, String), Error> {
    let ladder = PriceLadder::integers(3)?;
    let text = "x_0,x_1,price_index,sold,pi_1,pi_2,pi_3\n0.1,0.2,1,1,0.2,0.3,0.5\n0.3,oops,2,0,0.2,0.3,0.5\n";
    match read_dataset(text.as_bytes(), &ladder, None) {
        Err(Error::Schema { row, column, .. }) if row == 2 && column == "x_1" => {
            Ok((true, "bad value reported at row 2, column x_1".into()))
        }
        other => Ok((false, format!("unexpected result {other:?}"))),
    }
}

fn csv_on_policy_ips() -> Result<(bool, String), Error> {
    let ladder = PriceLadder::new(vec![2.0, 3.5, 5.0, 8.0], 1.0)?;
    let pi0 = Propensities::new(vec![0.1, 0.2, 0.3, 0.4])?;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let records: Vec<ObservedRecord> = (0..1000)
        .map(|_| {
            let j = pricing_core::synthgen::draw_index(pi0.as_slice(), rng.random());
            ObservedRecord {
                features: vec![rng.random_range(-1.0..1.0)],
                price_index: j + 1,
                sold: rng.random::<f64>() < 0.6 - 0.1 * j as f64,
                latent_valuation: None,
            }
        })
        .collect();
    let data = Dataset::new(ladder.clone(), records, vec![pi0.clone(); 1000])?;
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf)?;
    let back = read_dataset(buf.as_slice(), &ladder, None)?;
    let policy = FixedPolicy::new(PolicyDist::new(pi0.as_slice().to_vec())?);
    let estimate = -estimate_policy_value(&back, &policy, Estimator::Ips, None)?;
    let revenue = back
        .records
        .iter()
        .map(|r| if r.sold { ladder.margin(r.rung()) } else { 0.0 })
        .sum::<f64>()
        / back.len() as f64;
    let err = (estimate - revenue).abs();
    Ok((err <= 1e-12, format!("IPS {estimate:.6} vs mean revenue {revenue:.6} (diff {err:.1e})")))
}

// ---------------------------------------------------------------- 7-10

struct Cell {
    method: &'static str,
    mean: f64,
    se: f64,
}

const EVAL_N50: [Cell; 4] = [
    Cell { method: "ips", mean: 1.08, se: 0.10 },
    Cell { method: "mv", mean: 0.82, se: 0.06 },
    Cell { method: "robust", mean: 0.77, se: 0.06 },
    Cell { method: "cmix", mean: 0.72, se: 0.05 },
];
const EVAL_N2000: [Cell; 4] = [
    Cell { method: "ips", mean: 0.03, se: 0.0 },
    Cell { method: "mv", mean: 0.02, se: 0.0 },
    Cell { method: "robust", mean: 0.02, se: 0.0 },
    Cell { method: "cmix", mean: 0.02, se: 0.0 },
];

fn get(rows: &[pricing_bench::results::ResultRow], method: &str, n: usize, alpha: &str, shift: f64, metric: &str) -> Result<Summary, Error> {
    lookup(rows, method, n, alpha, shift, metric)
        .ok_or_else(|| Error::InvalidArgument(format!("missing aggregate {method} n={n} alpha={alpha} shift={shift} {metric}")))
}

fn criterion_7(suite: &mut Suite, gating: bool) {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        experiment: "acceptance-eval".into(),
        n_grid: vec![50, 2000],
        seed: 7,
        ..Preset::EvalSweep.defaults()
    };
    let result = (|| -> Result<_, Error> {
        let rows = eval_sweep(&cfg).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut s50 = Vec::new();
        let mut s2000 = Vec::new();
        for c in &EVAL_N50 {
            s50.push(get(&rows, c.method, 50, "fitted", 0.0, "sq_error")?);
        }
        for c in &EVAL_N2000 {
            s2000.push(get(&rows, c.method, 2000, "fitted", 0.0, "sq_error")?);
        }
        Ok((s50, s2000))
    })();
    let elapsed = start.elapsed();
    let (s50, s2000) = match result {
        Ok(v) => v,
        Err(e) => {
            suite.record("7", "evaluation MSE with fitted demand", false, format!("error: {e}"), elapsed, gating);
            return;
        }
    };
    let within_budget = elapsed <= secs(20 * 60);
    let ordering = s50[0].mean > s50[1].mean && s50[1].mean > s50[2].mean && s50[2].mean >= s50[3].mean;
    suite.record(
        "7a",
        "n=50 ordering IPS > MV > Robust >= CMix",
        ordering && within_budget,
        format!(
            "ips {}, mv {}, robust {}, cmix {}",
            fmt(&s50[0]),
            fmt(&s50[1]),
            fmt(&s50[2]),
            fmt(&s50[3])
        ),
        elapsed,
        gating,
    );
    let range = s2000.iter().all(|s| (0.01..=0.04).contains(&s.mean));
    suite.record(
        "7b",
        "n=2000 MSE of every method in [0.01, 0.04]",
        range && within_budget,
        s2000
            .iter()
            .zip(&EVAL_N2000)
            .map(|(s, c)| format!("{} {}", c.method, fmt(s)))
            .collect::<Vec<_>>()
            .join(", "),
        Duration::ZERO,
        gating,
    );
    let mut close = true;
    let mut parts = Vec::new();
    for (cells, obs, n) in [(&EVAL_N50, &s50, 50), (&EVAL_N2000, &s2000, 2000)] {
        for (c, s) in cells.iter().zip(obs.iter()) {
            let z = (s.mean - c.mean).abs() / (c.se + s.stderr).max(f64::MIN_POSITIVE);
            close &= z <= 3.0;
            parts.push(format!("{}@{n} {:.3} vs {:.2} ({z:.1} se)", c.method, s.mean, c.mean));
        }
    }
    suite.record(
        "7c",
        "every cell within 3 combined standard errors of its reference",
        close && within_budget,
        parts.join(", "),
        Duration::ZERO,
        gating,
    );
}

fn criterion_8(suite: &mut Suite, gating: bool) {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        experiment: "acceptance-learn".into(),
        n_grid: vec![50, 500],
        estimators: vec!["ips".into(), "robust".into()],
        seed: 8,
        ..Preset::LearnSweep.defaults()
    };
    let result = (|| -> Result<_, Error> {
        let rows = learn_sweep(&cfg).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok((
            get(&rows, "robust", 500, "fitted", 0.0, "reward")?,
            get(&rows, "robust", 50, "fitted", 0.0, "reward")?,
            get(&rows, "ips", 50, "fitted", 0.0, "reward")?,
            get(&rows, "oracle", 500, "", 0.0, "reward")?,
        ))
    })();
    let elapsed = start.elapsed();
    match result {
        Ok((rob500, rob50, ips50, oracle500)) => {
            let budget = elapsed <= secs(30 * 60);
            suite.record(
                "8a",
                "n=500 Robust reward within 1.36 ± 0.06",
                (rob500.mean - 1.36).abs() <= 0.06 && budget,
                format!("robust {} (best achievable {})", fmt(&rob500), fmt(&oracle500)),
                elapsed,
                gating,
            );
            let gap = rob50.mean - ips50.mean;
            suite.record(
                "8b",
                "n=50 reward gap Robust − IPS >= 0.15",
                gap >= 0.15 && budget,
                format!("robust {}, ips {}, gap {gap:.4}", fmt(&rob50), fmt(&ips50)),
                Duration::ZERO,
                gating,
            );
        }
        Err(e) => suite.record("8", "learning reward", false, format!("error: {e}"), elapsed, gating),
    }
}

fn criterion_9(suite: &mut Suite, gating: bool) {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        experiment: "acceptance-sales".into(),
        shift_grid: vec![-10.0, 10.0],
        seed: 9,
        ..Preset::SalesRegime.defaults()
    };
    let result = (|| -> Result<_, Error> {
        let rows = sales_regime(&cfg).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok((
            get(&rows, "ips", 500, "fitted", 10.0, "sq_error")?,
            get(&rows, "robust", 500, "fitted", 10.0, "sq_error")?,
            get(&rows, "ips", 500, "fitted", -10.0, "sq_error")?,
            get(&rows, "robust", 500, "fitted", -10.0, "sq_error")?,
        ))
    })();
    let elapsed = start.elapsed();
    match result {
        Ok((ips_lo, rob_lo, ips_hi, rob_hi)) => {
            let budget = elapsed <= secs(10 * 60);
            suite.record(
                "9a",
                "low sales: IPS MSE < 1e-3 and Robust MSE > 1e-2",
                ips_lo.mean < 1e-3 && rob_lo.mean > 1e-2 && budget,
                format!("ips {:.2e}±{:.1e}, robust {}", ips_lo.mean, ips_lo.stderr, fmt(&rob_lo)),
                elapsed,
                gating,
            );
            suite.record(
                "9b",
                "high sales: Robust MSE < IPS MSE, standard errors disjoint",
                rob_hi.mean + rob_hi.stderr < ips_hi.mean - ips_hi.stderr && budget,
                format!("robust {}, ips {}", fmt(&rob_hi), fmt(&ips_hi)),
                Duration::ZERO,
                gating,
            );
        }
        Err(e) => suite.record("9", "sales regimes", false, format!("error: {e}"), elapsed, gating),
    }
}

fn criterion_10(suite: &mut Suite, gating: bool) {
    let start = Instant::now();
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let cfg = ExperimentConfig {
        experiment: "acceptance-alpha".into(),
        n_grid: vec![100],
        alpha_grid: alphas.to_vec(),
        fitted_demand: false,
        estimators: vec!["ips".into(), "mv".into(), "robust".into()],
        seed: 10,
        ..Preset::EvalSweep.defaults()
    };
    let result = (|| -> Result<_, Error> {
        let rows = eval_sweep(&cfg).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut curves = Vec::new();
        for method in ["ips", "mv", "robust"] {
            let mut c = Vec::new();
            for a in alphas {
                c.push(get(&rows, method, 100, &a.to_string(), 0.0, "sq_error")?);
            }
            curves.push(c);
        }
        Ok(curves)
    })();
    let elapsed = start.elapsed();
    match result {
        Ok(curves) => {
            let mv = &curves[1];
            let ratio = mv[0].mean / mv[4].mean;
            suite.record(
                "10a",
                "n=100 MV MSE at alpha=0 at least 3x that at alpha=1",
                ratio >= 3.0,
                format!(
                    "mv by alpha: {}; ratio {ratio:.2}",
                    mv.iter().map(|s| format!("{:.4}", s.mean)).collect::<Vec<_>>().join(", ")
                ),
                elapsed,
                gating,
            );
            let mut flat = true;
            let mut parts = Vec::new();
            for (name, c) in [("ips", &curves[0]), ("robust", &curves[2])] {
                let hi = c.iter().map(|s| s.mean).fold(f64::NEG_INFINITY, f64::max);
                let lo = c.iter().map(|s| s.mean).fold(f64::INFINITY, f64::min);
                let se = c.iter().map(|s| s.stderr).fold(0.0, f64::max);
                flat &= hi - lo <= 2.0 * se;
                parts.push(format!("{name} spread {:.2e} vs 2 se {:.2e}", hi - lo, 2.0 * se));
            }
            suite.record(
                "10b",
                "IPS and Robust flat in alpha within 2 standard errors",
                flat,
                parts.join(", "),
                Duration::ZERO,
                gating,
            );
        }
        Err(e) => suite.record("10", "alpha sweep", false, format!("error: {e}"), elapsed, gating),
    }
}

fn flag(name: &str) -> bool {
    std::env::var(name).map(|v| !v.is_empty() && v != "0").unwrap_or(false)
}

fn main() {
    let strict = flag("ACCEPTANCE_STRICT");
    let quick = flag("ACCEPTANCE_QUICK");
    let mut suite = Suite { outcomes: Vec::new() };
    println!("acceptance suite (strict = {strict}, quick = {quick})");

    suite.run("1", "left / generalized inverse conditions", secs(10), true, criterion_1);
    suite.run("2", "unbiasedness by exact enumeration", secs(10), true, criterion_2);
    suite.run("3", "DR equals MV loss and decomposes", secs(30), true, criterion_3);
    suite.run("4", "MV matches null-space QP and beats perturbations", secs(120), true, criterion_4);
    suite.run("5", "robust matrix is minimax over a simplex grid", secs(300), true, criterion_5);
    suite.run("6", "policy gradient matches finite differences", secs(60), true, criterion_6);
    suite.run("C1", "CSV schema errors name row and column", secs(10), true, csv_schema);
    suite.run("C2", "on-policy IPS equals empirical mean revenue", secs(10), true, csv_on_policy_ips);

    if quick {
        println!("[SKIP] 7-10 statistical reproduction (ACCEPTANCE_QUICK set)");
    } else {
        criterion_7(&mut suite, strict);
        criterion_8(&mut suite, strict);
        criterion_9(&mut suite, strict);
        criterion_10(&mut suite, strict);
    }

    let failed: Vec<&Outcome> = suite.outcomes.iter().filter(|o| !o.pass).collect();
    let gating_failed = failed.iter().filter(|o| o.gating).count();
    let total: Duration = suite.outcomes.iter().map(|o| o.elapsed).sum();
    println!(
        "summary: {} passed, {} failed ({} gating), {:.0} s",
        suite.outcomes.len() - failed.len(),
        failed.len(),
        gating_failed,
        total.as_secs_f64()
    );
    for o in &failed {
        println!(
            "  failed {}{}: {} ({})",
            o.id,
            if o.gating { "" } else { " [reported]" },
            o.title,
            o.detail
        );
    }
    if gating_failed > 0 {
        std::process::exit(1);
    }
}
