//! Randomized checks of the closed-form identities behind the objective.

use std::fs;
use std::path::Path;

use ndarray::Array3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use tdalign_core::loss::{anchor_context, rho, tdp, tdt, tdt_loss};
use tdalign_core::rng::{seeded, Stream};
use tdalign_core::theory::{discrepancy_psi, expected_rho, markov_nll_core, monte_carlo_rho, PacfVector};
use tdalign_core::{BaseLoss, DiffSpec};

use crate::error::{io_err, CliError, Result};
use crate::fingerprint::sha256_hex;
use crate::run::write_json;

/// Instance counts and the seed of one verification pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub identity_instances: usize,
    pub mc_instances: usize,
    pub mc_horizon: usize,
    pub mc_trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            identity_instances: 1000,
            mc_instances: 10,
            mc_horizon: 16,
            mc_trials: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, instances: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            instances,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub fingerprint: String,
    pub config: VerifyConfig,
    pub checks: Vec<CheckResult>,
}

impl TheoryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_array(rng: &mut impl Rng, dim: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_simple_fn(dim, || normal(rng))
}

/// Difference loss from its definition against the error-telescoping form
/// `(1/H) mean_{b,n} [e_1^2 + sum_{i>=2} (e_i - e_{i-1})^2]`.
pub fn check_ld_telescoping(instances: usize, rng: &mut impl Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (b, h, n) = (
            rng.random_range(1..=4),
            rng.random_range(1..=16),
            rng.random_range(1..=3),
        );
        let y = random_array(rng, (b, h, n));
        let y_hat = random_array(rng, (b, h, n));
        let anchor = random_array(rng, (b, 1, n)).index_axis_move(ndarray::Axis(1), 0);
        let ctx = anchor_context(anchor.view());
        let spec = DiffSpec::FIRST_ORDER;
        let d = tdt(y.view(), ctx.view(), spec).expect("shapes agree");
        let d_hat = tdp(y_hat.view(), ctx.view(), spec).expect("shapes agree");
        let direct = tdt_loss(d.view(), d_hat.view(), BaseLoss::Mse).expect("shapes agree");
        let mut acc = 0.0;
        for bi in 0..b {
            for ni in 0..n {
                let e = |i: usize| y[[bi, i, ni]] - y_hat[[bi, i, ni]];
                acc += e(0) * e(0);
                for i in 1..h {
                    acc += (e(i) - e(i - 1)).powi(2);
                }
            }
        }
        let telescoped = acc / (b * h * n) as f64;
        worst = worst.max((direct - telescoped).abs());
    }
    CheckResult::new("ld_telescoping", instances, worst, 1e-12)
}

/// `markov_nll_core - sum e^2 - psi` over random errors and coefficients with
/// `|phi| <= 0.99`.
pub fn check_markov_identity(instances: usize, rng: &mut impl Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let h = rng.random_range(2..=32);
        let eps: Vec<f64> = (0..h).map(|_| normal(rng)).collect();
        let phi: Vec<f64> = (1..h).map(|_| rng.random_range(-0.99..=0.99)).collect();
        let phi = PacfVector::new(phi).expect("coefficients inside the unit interval");
        let nll = markov_nll_core(&eps, &phi).expect("lengths agree");
        let psi = discrepancy_psi(&eps, &phi).expect("lengths agree");
        let sq: f64 = eps.iter().map(|e| e * e).sum();
        worst = worst.max((nll - sq - psi).abs());
    }
    CheckResult::new("markov_nll_identity", instances, worst, 1e-12)
}

/// `psi` with all coefficients zero; must be exactly 0.
pub fn check_psi_zero(instances: usize, rng: &mut impl Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let h = rng.random_range(2..=32);
        let eps: Vec<f64> = (0..h).map(|_| normal(rng)).collect();
        let psi = discrepancy_psi(&eps, &PacfVector::constant(0.0, h).expect("valid")).expect("lengths agree");
        worst = worst.max(psi.abs());
    }
    CheckResult::new("psi_phi_zero", instances, worst, 0.0)
}

/// Closed-form expected `rho` against Monte Carlo on random `(d, sigma_e)`.
pub fn check_expected_rho(config: &VerifyConfig, rng: &mut impl Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for i in 0..config.mc_instances {
        let scale = rng.random_range(0.1..3.0);
        let d: Vec<f64> = (0..config.mc_horizon).map(|_| scale * normal(rng)).collect();
        let sigma = rng.random_range(0.2..2.0);
        let exact = expected_rho(&d, sigma).expect("valid sigma");
        let mc = monte_carlo_rho(&d, sigma, config.mc_trials, config.seed.wrapping_add(i as u64)).expect("valid");
        worst = worst.max((mc - exact).abs());
    }
    CheckResult::new("expected_rho_monte_carlo", config.mc_instances, worst, 0.005)
}

/// `rho` stays in [0, 1], vanishes on identical differences and equals 1 on
/// negated nonzero differences. Reports the largest violation.
pub fn check_rho_contract(instances: usize, rng: &mut impl Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let dim = (
            rng.random_range(1..=4),
            rng.random_range(1..=16),
            rng.random_range(1..=3),
        );
        let d = random_array(rng, dim);
        let d_hat = random_array(rng, dim);
        let r = rho(d.view(), d_hat.view()).expect("shapes agree");
        worst = worst.max((-r).max(r - 1.0)).max(0.0);
        worst = worst.max(rho(d.view(), d.view()).expect("shapes agree"));
        let neg = d.mapv(|v| -v);
        worst = worst.max((1.0 - rho(d.view(), neg.view()).expect("shapes agree")).abs());
    }
    CheckResult::new("rho_contract", instances, worst, 0.0)
}

pub fn verify_theory(config: &VerifyConfig) -> TheoryReport {
    let mut rng = seeded(config.seed, Stream::Synth);
    let n = config.identity_instances;
    let checks = vec![
        check_ld_telescoping(n, &mut rng),
        check_markov_identity(n, &mut rng),
        check_psi_zero(n, &mut rng),
        check_rho_contract(n, &mut rng),
        check_expected_rho(config, &mut rng),
    ];
    TheoryReport {
        fingerprint: sha256_hex(serde_json::to_string(config).expect("serializes").as_bytes()),
        config: *config,
        checks,
    }
}

/// Runs every check, writes `theory_report.{csv,json}` to `out`, and fails
/// with a numeric error when any check fails.
pub fn cmd_verify_theory(config: &VerifyConfig, out: &Path) -> Result<TheoryReport> {
    let report = verify_theory(config);
    fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("theory_report.csv");
    let mut text = format!(
        "# fingerprint {}\ncheck,instances,max_error,tolerance,passed\n",
        report.fingerprint
    );
    for c in &report.checks {
        text.push_str(&format!(
            "{},{},{:e},{:e},{}\n",
            c.name, c.instances, c.max_error, c.tolerance, c.passed
        ));
    }
    fs::write(&path, text).map_err(io_err(&path))?;
    write_json(&out.join("theory_report.json"), &report)?;
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(CliError::IdentityViolation(format!(
            "{}: max error {:e} exceeds {:e}",
            bad.name, bad.max_error, bad.tolerance
        )));
    }
    Ok(report)
}
