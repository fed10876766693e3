//! Brute-force checks of the estimator algebra that avoid the closed-form
//! code paths they verify: expectations by enumerating (price, valuation)
//! pairs, minimum variance by a null-space quadratic solve, minimax by grid
//! search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::densemat::{dot, Lu, Mat};
use crate::error::{Error, Result};
use crate::estimators::{
    dr_decomposition, dr_reward, left_inverse_residual, mu_hat, r_cips, r_ips, r_mv, r_robust,
    r_switching, EstimatorKind, ReweightMatrix, SwitchingWeight, OUTCOME_FLOOR,
};
use crate::ladder::{OutcomeDist, PolicyDist, PriceLadder, Propensities, ValuationDist};
use crate::losses::{corrupted_loss_vector, valuation_loss_vector, ValuationLossVector};
use crate::transfer::TransferMatrix;

/// `Σ_{j,v} π_0(p_j) f_V(v) (R'l)_{outcome(j, v)}`, enumerating every
/// (offered price, valuation) pair.
pub fn exact_expectation(r: &ReweightMatrix, l: &ValuationLossVector, fv: &ValuationDist, pi0: &Propensities) -> Result<f64> {
    let m = pi0.len();
    if r.m() != m || fv.len() != m + 1 || l.values().len() != m + 1 {
        return Err(Error::dims("exact_expectation", m, r.m()));
    }
    let mat = r.mat();
    let mut total = 0.0;
    for j in 0..m {
        for v in 0..=m {
            let outcome = if v > j { j } else { m + j };
            let loss: f64 = (0..=m).map(|s| mat[(s, outcome)] * l.values()[s]).sum();
            total += pi0[j] * fv[v] * loss;
        }
    }
    Ok(total)
}

/// Variance of the corrupted loss under `f_Ỹ` by explicit enumeration.
pub fn enumerated_variance(r: &ReweightMatrix, l: &ValuationLossVector, fy: &[f64]) -> f64 {
    let mat = r.mat();
    let m = r.m();
    let a: Vec<f64> = (0..2 * m)
        .map(|k| (0..=m).map(|s| mat[(s, k)] * l.values()[s]).sum())
        .collect();
    let mean: f64 = fy.iter().zip(&a).map(|(f, x)| f * x).sum();
    let second: f64 = fy.iter().zip(&a).map(|(f, x)| f * x * x).sum();
    second - mean * mean
}

/// Orthonormal basis (as columns) of the null space of `T'`, by
/// Gram-Schmidt against the columns of `T`.
pub fn null_space_of_transpose(t: &Mat) -> Result<Mat> {
    let (rows, cols) = t.shape();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let push = |v: Vec<f64>, basis: &mut Vec<Vec<f64>>| -> bool {
        let mut v = v;
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-10 {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
        true
    };
    for j in 0..cols {
        if !push(t.column(j), &mut basis) {
            return Err(Error::Singular);
        }
    }
    let mut null = Vec::new();
    for i in 0..rows {
        let mut e = vec![0.0; rows];
        e[i] = 1.0;
        if push(e, &mut basis) {
            null.push(basis.last().expect("just pushed").clone());
        }
    }
    let k = null.len();
    let mut n = Mat::zeros(rows, k);
    for (c, v) in null.iter().enumerate() {
        for (r, x) in v.iter().enumerate() {
            n[(r, c)] = *x;
        }
    }
    Ok(n)
}

/// Minimizes `r' Σ r` with `Σ = diag(f) − f f'` row by row subject to
/// `R T = I`, parameterizing each row as `r_0 + N z`.
pub fn qp_min_variance(t: &TransferMatrix, fy: &OutcomeDist) -> Result<Mat> {
    let tm = t.mat();
    let (k, p) = tm.shape();
    if fy.len() != k {
        return Err(Error::dims("qp_min_variance", k, fy.len()));
    }
    if fy.as_slice().iter().any(|f| *f <= 0.0) {
        return Err(Error::InvalidArgument("qp_min_variance needs every outcome probability positive".into()));
    }
    let f = fy.as_slice();
    let mut sigma = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            sigma[(i, j)] = if i == j { f[i] } else { 0.0 } - f[i] * f[j];
        }
    }
    // Particular solution (T'T)⁻¹T'.
    let tt = tm.transpose();
    let r0 = Lu::factor(&tt.matmul(tm)?)?.solve(&tt)?;
    let n = null_space_of_transpose(tm)?;
    let nt = n.transpose();
    let h = nt.matmul(&sigma)?.matmul(&n)?;
    let lu = Lu::factor(&h)?;
    let mut out = Mat::zeros(p, k);
    for i in 0..p {
        let row = r0.row(i).to_vec();
        let rhs: Vec<f64> = nt.matvec(&sigma.matvec(&row)?)?.into_iter().map(|x| -x).collect();
        let z = lu.solve(&Mat::column_vector(&rhs))?;
        let correction = n.matvec(z.as_slice())?;
        for c in 0..k {
            out[(i, c)] = row[c] + correction[c];
        }
    }
    Ok(out)
}

/// Random feasible left inverse near `r`: `R + A N'` with `N` an
/// orthonormal basis of the null space of `T'` and `A` uniform in
/// `[−scale, scale]`.
pub fn random_feasible_perturbation<R: Rng + ?Sized>(r: &Mat, null: &Mat, scale: f64, rng: &mut R) -> Result<Mat> {
    let coeffs = Mat::from_vec(
        r.rows(),
        null.cols(),
        (0..r.rows() * null.cols()).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect(),
    )?;
    r.add(&coeffs.matmul(&null.transpose())?)
}

/// All points of the simplex in `dim` dimensions whose coordinates are
/// multiples of `1/steps`.
pub fn simplex_grid(dim: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == dim {
            cur.push(left);
            out.push(cur.iter().map(|c| *c as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(dim, left - k, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if dim > 0 {
        rec(dim, steps, steps, &mut Vec::new(), &mut out);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateWorstCase {
    pub name: String,
    pub max_variance: f64,
    pub argmax: Vec<f64>,
    /// Every grid point whose variance is within `1e-9` of the maximum.
    #[serde(skip)]
    pub maximizers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimaxReport {
    pub grid_points: usize,
    pub robust: CandidateWorstCase,
    /// Smallest worst-case variance among the non-robust candidates.
    pub best_other: CandidateWorstCase,
    /// Worst case of `r_mv` built at the adversarial point itself.
    pub mv_at_adversary: f64,
    /// `‖x − ½(e_first + e_last)‖_∞` for the robust maximizer `x` closest
    /// to that point. The variance surface can be flat along a ridge, so
    /// maximizers are compared with a tie tolerance.
    pub argmax_distance: f64,
    pub step: f64,
}

impl MinimaxReport {
    pub fn robust_wins(&self, slack: f64) -> bool {
        self.robust.max_variance <= self.best_other.max_variance + slack
    }

    pub fn argmax_within_step(&self) -> bool {
        self.argmax_distance <= self.step + 1e-12
    }
}

fn worst_case(name: String, r: &ReweightMatrix, l: &ValuationLossVector, t: &Mat, grid: &[Vec<f64>]) -> Result<CandidateWorstCase> {
    let values = grid
        .iter()
        .map(|fv| Ok(enumerated_variance(r, l, &t.matvec(fv)?)))
        .collect::<Result<Vec<f64>>>()?;
    let (idx, best) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let tol = 1e-9 * best.abs().max(1.0);
    let maximizers = grid
        .iter()
        .zip(&values)
        .filter(|(_, v)| **v >= best - tol)
        .map(|(g, _)| g.clone())
        .collect();
    Ok(CandidateWorstCase {
        name,
        max_variance: best,
        argmax: grid[idx].clone(),
        maximizers,
    })
}

/// Worst-case conditional variance over a simplex grid of valuation
/// distributions for the robust matrix, IPS, CIPS and `r_mv(f̂)` at every
/// grid point `f̂`.
pub fn minimax_grid(t: &TransferMatrix, l: &ValuationLossVector, step: f64) -> Result<MinimaxReport> {
    let m = t.m();
    if m > 4 {
        return Err(Error::InvalidArgument(format!("minimax grid disabled for m = {m} > 4")));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid step {step} outside (0, 1]")));
    }
    let steps = (1.0 / step).round() as usize;
    let grid = simplex_grid(m + 1, steps);
    let tm = t.mat();
    let pi0 = t.propensities();
    let robust = worst_case("robust".into(), &r_robust(t)?, l, tm, &grid)?;
    let mut adversary = vec![0.0; m + 1];
    adversary[0] = 0.5;
    adversary[m] = 0.5;
    let argmax_distance = robust
        .maximizers
        .iter()
        .map(|x| x.iter().zip(&adversary).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);

    let mut best_other = worst_case("ips".into(), &r_ips(pi0)?, l, tm, &grid)?;
    let cips = worst_case("cips".into(), &r_cips(pi0)?, l, tm, &grid)?;
    if cips.max_variance < best_other.max_variance {
        best_other = cips;
    }
    for fhat in &grid {
        let fy = OutcomeDist::new(tm.matvec(fhat)?, m)?.floored(OUTCOME_FLOOR);
        let cand = worst_case(format!("mv{fhat:?}"), &r_mv(t, &fy)?, l, tm, &grid)?;
        if cand.max_variance < best_other.max_variance {
            best_other = cand;
        }
    }
    let fy = OutcomeDist::new(tm.matvec(&adversary)?, m)?;
    let mv_at_adversary = worst_case("mv-adversary".into(), &r_mv(t, &fy)?, l, tm, &grid)?.max_variance;
    Ok(MinimaxReport {
        grid_points: grid.len(),
        robust,
        best_other,
        mv_at_adversary,
        argmax_distance,
        step,
    })
}

/// A random evaluation problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub ladder: PriceLadder,
    pub pi0: Propensities,
    pub fv: ValuationDist,
    pub fv_hat: ValuationDist,
    pub policy: PolicyDist,
}

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| floor - rng.random::<f64>().ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Random ladder (increasing, positive margins), propensities, true and
/// plug-in valuation distributions, and policy.
pub fn random_instance<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Instance> {
    let mut prices = Vec::with_capacity(m);
    let mut p = 0.5 + rng.random::<f64>();
    for _ in 0..m {
        prices.push(p);
        p += 0.1 + rng.random::<f64>();
    }
    let cost = 0.4 * rng.random::<f64>();
    Ok(Instance {
        ladder: PriceLadder::new(prices, cost)?,
        pi0: Propensities::new(random_simplex(rng, m, 0.05))?,
        fv: ValuationDist::new(random_simplex(rng, m + 1, 0.0), m)?,
        fv_hat: ValuationDist::new(random_simplex(rng, m + 1, 0.05), m)?,
        policy: PolicyDist::new(random_simplex(rng, m, 0.0))?,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DrSweep {
    pub instances: usize,
    /// `max |Ỹ'R_MV'l_V + l_DR|` over all outcomes.
    pub max_identity_error: f64,
    /// `max |R_MV − (R_DM + R_IPS − R_DIPS)|`.
    pub max_decomposition_error: f64,
    /// Instances where MV at the true `f_Ỹ` had larger variance than IPS.
    pub mv_worse_than_ips: usize,
    /// Largest bias of MV with a perturbed plug-in.
    pub max_plugin_bias: f64,
}

pub fn dr_equivalence_sweep(instances: usize, seed: u64) -> Result<DrSweep> {
    dr_sweep(instances, seed, false)
}

fn dr_sweep(instances: usize, seed: u64, broken: bool) -> Result<DrSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DrSweep {
        instances,
        max_identity_error: 0.0,
        max_decomposition_error: 0.0,
        mv_worse_than_ips: 0,
        max_plugin_bias: 0.0,
    };
    for _ in 0..instances {
        let m = rng.random_range(2..=6);
        let inst = random_instance(m, &mut rng)?;
        let t = TransferMatrix::build(&inst.pi0)?;
        let fy_hat = OutcomeDist::new(t.mat().matvec(inst.fv_hat.as_slice())?, m)?;
        let mv = maybe_break(r_mv(&t, &fy_hat)?, broken)?;
        let dec = dr_decomposition(&t, &inst.fv_hat, &inst.pi0)?;
        out.max_decomposition_error = out
            .max_decomposition_error
            .max(dec.combined()?.sub(mv.mat())?.max_abs());
        let l = valuation_loss_vector(&inst.policy, &inst.ladder)?;
        let a = corrupted_loss_vector(&mv, &l)?;
        let mu = mu_hat(&inst.ladder, &inst.fv_hat)?;
        for k in 0..2 * m {
            let (rung, sold) = if k < m { (k, true) } else { (k - m, false) };
            let dr = dr_reward(&inst.ladder, &inst.policy, &mu, &inst.pi0, rung, sold)?;
            out.max_identity_error = out.max_identity_error.max((a.at(k) + dr).abs());
        }
        let truth = dot(inst.fv.as_slice(), l.values());
        let bias = (exact_expectation(&mv, &l, &inst.fv, &inst.pi0)? - truth).abs();
        out.max_plugin_bias = out.max_plugin_bias.max(bias);
        let fy = t.mat().matvec(inst.fv.as_slice())?;
        if fy.iter().all(|f| *f > 0.0) {
            let exact_mv = r_mv(&t, &OutcomeDist::new(fy.clone(), m)?)?;
            if enumerated_variance(&exact_mv, &l, &fy) > enumerated_variance(&r_ips(&inst.pi0)?, &l, &fy) + 1e-12 {
                out.mv_worse_than_ips += 1;
            }
        }
    }
    Ok(out)
}

/// One line of the oracle report.
#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub check: String,
    pub seed: u64,
    pub max_error: f64,
    pub pass: bool,
}

impl OracleRow {
    fn new(check: &str, seed: u64, max_error: f64, tolerance: f64) -> Self {
        OracleRow {
            check: check.into(),
            seed,
            max_error,
            pass: max_error.is_finite() && max_error <= tolerance,
        }
    }
}

/// Options for [`run_all`].
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub instances: usize,
    /// Random feasible perturbations per minimum-variance instance.
    pub perturbations: usize,
    pub minimax: bool,
    /// Test hook: add 0.1 to one entry of every constructed matrix.
    pub break_estimators: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            instances: 200,
            perturbations: 10_000,
            minimax: true,
            break_estimators: false,
        }
    }
}

fn maybe_break(r: ReweightMatrix, broken: bool) -> Result<ReweightMatrix> {
    if !broken {
        return Ok(r);
    }
    let kind = r.kind();
    let mut mat = r.mat().clone();
    mat[(1, 0)] += 0.1;
    ReweightMatrix::new(mat, kind)
}

/// Runs every oracle sweep and returns one row per check.
pub fn run_all(seed: u64, opts: &OracleOptions) -> Result<Vec<OracleRow>> {
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let brk = opts.break_estimators;

    // Left-inverse and generalized-inverse conditions, and unbiasedness.
    let (mut left, mut general, mut bias) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..opts.instances {
        let m = rng.random_range(2..=10);
        let inst = random_instance(m, &mut rng)?;
        let t = TransferMatrix::build(&inst.pi0)?;
        let fy_hat = OutcomeDist::new(t.mat().matvec(inst.fv_hat.as_slice())?, m)?;
        let mv = maybe_break(r_mv(&t, &fy_hat)?, brk)?;
        let rob = maybe_break(r_robust(&t)?, brk)?;
        let sw = r_switching(&mv, &rob, SwitchingWeight::new(rng.random())?)?;
        let ips = maybe_break(r_ips(&inst.pi0)?, brk)?;
        let cips = maybe_break(r_cips(&inst.pi0)?, brk)?;
        for r in [&mv, &rob, &sw] {
            left = left.max(left_inverse_residual(r, &t)?);
        }
        let l = valuation_loss_vector(&inst.policy, &inst.ladder)?;
        let truth = dot(inst.fv.as_slice(), l.values());
        for r in [&mv, &rob, &sw, &ips, &cips] {
            bias = bias.max((exact_expectation(r, &l, &inst.fv, &inst.pi0)? - truth).abs());
        }
        for _ in 0..50 {
            let policy = PolicyDist::new(random_simplex(&mut rng, m, 0.0))?;
            let l = valuation_loss_vector(&policy, &inst.ladder)?;
            for r in [&ips, &cips] {
                let back = t.mat().tr_matvec(&corrupted_loss_vector(r, &l)?.values().to_vec())?;
                let err = back.iter().zip(l.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                general = general.max(err);
            }
        }
    }
    rows.push(OracleRow::new("left_inverse", seed, left, 1e-9));
    rows.push(OracleRow::new("generalized_inverse", seed, general, 1e-9));
    rows.push(OracleRow::new("unbiasedness", seed, bias, 1e-10));

    // Doubly robust equivalence.
    let dr = dr_sweep(opts.instances, seed.wrapping_add(1), brk)?;
    rows.push(OracleRow::new("dr_identity", seed, dr.max_identity_error, 1e-9));
    rows.push(OracleRow::new("dr_decomposition", seed, dr.max_decomposition_error, 1e-8));

    // Minimum variance: closed form vs null-space QP, and perturbations.
    let (mut qp_err, mut worst_gap) = (0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let m = rng.random_range(2..=5);
        let inst = random_instance(m, &mut rng)?;
        let t = TransferMatrix::build(&inst.pi0)?;
        let fy_vec = t.mat().matvec(inst.fv_hat.as_slice())?;
        let fy = OutcomeDist::new(fy_vec.clone(), m)?;
        let mv = maybe_break(r_mv(&t, &fy)?, brk)?;
        let qp = qp_min_variance(&t, &fy)?;
        qp_err = qp_err.max(qp.sub(mv.mat())?.max_abs());
        let l = valuation_loss_vector(&inst.policy, &inst.ladder)?;
        let base = enumerated_variance(&mv, &l, &fy_vec);
        let null = null_space_of_transpose(t.mat())?;
        for _ in 0..opts.perturbations {
            let pert = random_feasible_perturbation(mv.mat(), &null, 1.0, &mut rng)?;
            let pert = ReweightMatrix::new(pert, EstimatorKind::Mv)?;
            worst_gap = worst_gap.max(base - enumerated_variance(&pert, &l, &fy_vec));
        }
    }
    rows.push(OracleRow::new("mv_matches_qp", seed, qp_err, 1e-6));
    rows.push(OracleRow::new("mv_beats_perturbations", seed, worst_gap, 1e-12));

    if opts.minimax {
        for (m, step) in [(2usize, 0.01), (3, 0.05)] {
            let inst = random_instance(m, &mut rng)?;
            let t = TransferMatrix::build(&inst.pi0)?;
            let l = valuation_loss_vector(&inst.policy, &inst.ladder)?;
            let rep = minimax_grid(&t, &l, step)?;
            let excess = (rep.robust.max_variance - rep.best_other.max_variance).max(0.0);
            rows.push(OracleRow::new(&format!("minimax_m{m}"), seed, excess, 1e-9));
            let dist = (rep.argmax_distance - step).max(0.0);
            rows.push(OracleRow::new(&format!("minimax_argmax_m{m}"), seed, dist, 1e-12));
        }
    }
    Ok(rows)
}
