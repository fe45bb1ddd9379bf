//! Randomized property suites, runnable from the command line.
//!
//! Each suite draws its cases from a seeded generator and reports the worst
//! residual of every check against its tolerance.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::liegroup::{dist_so3, skew, so3_exp, vex_pa, Mat3, Pose, RotationMatrix, Vec3};
use crate::ppf::{mu, ppf_eval, smooth_z, transform_error, ClampMode, PpfChannelConfig};
use crate::recon::{reconstruct_pose, synthesize_measurements, MeasurementBias, MeasurementNoise, ReferenceSet};
use crate::sim::{run_scenario, Scenario};

pub const SUITES: [&str; 5] = ["lemma1", "trace", "transform", "wahba", "lyapunov"];

pub fn default_trials(suite: &str) -> Option<usize> {
    match suite {
        "lemma1" => Some(100_000),
        "trace" => Some(10_000),
        "transform" => Some(10_000),
        "wahba" => Some(100),
        "lyapunov" => Some(3),
        _ => None,
    }
}

/// Worst observed residual of one property.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub what: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub failures: usize,
}

impl Check {
    fn new(what: &'static str, tolerance: f64) -> Self {
        Self {
            what,
            worst: 0.0,
            tolerance,
            failures: 0,
        }
    }

    fn record(&mut self, residual: f64) {
        if residual.is_nan() || residual > self.tolerance {
            self.failures += 1;
        }
        if residual.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.max(residual);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    /// One line per check.
    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {:<10} {:<34} trials={:<7} failures={:<5} worst={:.3e} tol={:.1e} ({:.2} s)",
                    if c.passed() { "PASS" } else { "FAIL" },
                    self.name,
                    c.what,
                    self.trials,
                    c.failures,
                    c.worst,
                    c.tolerance,
                    self.elapsed.as_secs_f64()
                )
            })
            .collect()
    }
}

/// Uniformly distributed rotation (normalized Gaussian quaternion).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> RotationMatrix {
    loop {
        let q: [f64; 4] = [0; 4].map(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-6 {
            continue;
        }
        let (w, v) = (q[0] / n, Vec3::new(q[1], q[2], q[3]) / n);
        let (w, v) = if w < 0.0 { (-w, -v) } else { (w, v) };
        let angle = 2.0 * v.norm().atan2(w);
        let axis = if v.norm() > 0.0 { v.normalize() } else { Vec3::x() };
        return so3_exp(&(axis * angle));
    }
}

pub fn run_suite(name: &str, trials: Option<usize>, seed: u64) -> Result<SuiteReport> {
    let trials = match (trials, default_trials(name)) {
        (_, None) => {
            return Err(Error::InvalidConfig(format!(
                "unknown suite '{name}' (available: {})",
                SUITES.join(", ")
            )))
        }
        (Some(n), Some(_)) => n,
        (None, Some(n)) => n,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let (name, checks) = match name {
        "lemma1" => ("lemma1", vec![distance_identity(&mut rng, trials)]),
        "trace" => ("trace", vec![trace(&mut rng, trials)]),
        "transform" => ("transform", transform(&mut rng, trials)),
        "wahba" => ("wahba", wahba(&mut rng, trials)?),
        _ => ("lyapunov", lyapunov_suite(&mut rng, trials)?),
    };
    Ok(SuiteReport {
        name,
        trials,
        checks,
        elapsed: start.elapsed(),
    })
}

/// `‖vex(Pa(R))‖² = 4(1 − ‖R‖_I)‖R‖_I`.
fn distance_identity(rng: &mut ChaCha8Rng, trials: usize) -> Check {
    let mut c = Check::new("|vex(Pa R)|^2 = 4(1-d)d", 1e-10);
    for _ in 0..trials {
        let r = random_rotation(rng);
        let d = dist_so3(&r);
        c.record((vex_pa(r.matrix()).norm_squared() - 4.0 * (1.0 - d) * d).abs());
    }
    c
}

/// `Tr(A[β]×) = Tr(Pa(A)[β]×) = −2 vex(Pa(A))ᵀβ`, residual scaled by `1 + ‖A‖‖β‖`.
fn trace(rng: &mut ChaCha8Rng, trials: usize) -> Check {
    let mut c = Check::new("tr(A[b]x) = -2 vex(Pa A).b", 1e-10);
    for _ in 0..trials {
        let scale: f64 = 10f64.powf(rng.random_range(-2.0..2.0));
        let a = Mat3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal) * scale);
        let beta = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let sb = skew(&beta);
        let lhs = (a * sb).trace();
        let mid = ((a - a.transpose()) * 0.5 * sb).trace();
        let rhs = -2.0 * vex_pa(&a).dot(&beta);
        let norm = 1.0 + a.norm() * beta.norm();
        c.record((lhs - rhs).abs().max((mid - rhs).abs()) / norm);
    }
    c
}

fn transform(rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let mut round = Check::new("e -> E -> Z round trip", 1e-10);
    let mut deriv = Check::new("dE/de (central diff) vs mu, rel", 1e-5);
    for _ in 0..trials {
        let delta: f64 = rng.random_range(0.1..10.0);
        let xi0 = delta;
        let xi_inf = xi0 * rng.random_range(0.01..0.9);
        let cfg = PpfChannelConfig::symmetric(xi0, xi_inf, 4.0, delta).expect("valid channel");
        let st = ppf_eval(&cfg, rng.random_range(0.0..3.0));
        let r: f64 = rng.random_range(-0.999..0.999) * delta;
        let e = r * st.xi;

        let big = transform_error(e, &st, &cfg, ClampMode::Strict).expect("admissible");
        round.record((st.xi * smooth_z(big, &cfg) - e).abs());

        let r_fd: f64 = rng.random_range(-0.99..0.99) * delta;
        let e_fd = r_fd * st.xi;
        let h = 1e-6 * st.xi;
        let up = transform_error(e_fd + h, &st, &cfg, ClampMode::Strict).expect("admissible");
        let down = transform_error(e_fd - h, &st, &cfg, ClampMode::Strict).expect("admissible");
        let m = mu(e_fd, &st, &cfg, ClampMode::Strict).expect("admissible");
        deriv.record((((up - down) / (2.0 * h)) - m).abs() / m);
    }
    vec![round, deriv]
}

/// Reference geometry: two directions (augmented with their cross product) and one landmark.
pub fn reference_geometry() -> ReferenceSet {
    let cfg = ScenarioConfig::reference();
    let v = |a: &[f64; 3]| Vec3::new(a[0], a[1], a[2]);
    ReferenceSet::with_unit_weights(
        cfg.vectors.inertial.iter().map(v).collect(),
        cfg.landmarks.inertial.iter().map(v).collect(),
    )
}

fn wahba(rng: &mut ChaCha8Rng, trials: usize) -> Result<Vec<Check>> {
    let refs = reference_geometry();
    let bias = MeasurementBias::zero(&refs);
    let noise = MeasurementNoise::zero(&refs);
    let mut att = Check::new("|R_y - R|_F (noise-free)", 1e-9);
    let mut pose = Check::new("|T_y - T|_F (noise-free)", 1e-9);
    for _ in 0..trials {
        let r = random_rotation(rng);
        let p = Vec3::from_fn(|_, _| rng.random_range(-10.0..10.0));
        let truth = Pose::new(r, p);
        let meas = synthesize_measurements(&truth, &refs, &bias, &noise, rng)?;
        let ty = reconstruct_pose(&refs, &meas)?;
        att.record((ty.r.matrix() - r.matrix()).norm());
        pose.record((ty.to_homogeneous() - truth.to_homogeneous()).norm());
    }
    Ok(vec![att, pose])
}

/// Noise-free runs with velocity biases present: the reference initial
/// condition over the full horizon, then random initial estimates over 3 s.
fn lyapunov_suite(rng: &mut ChaCha8Rng, trials: usize) -> Result<Vec<Check>> {
    let mut c = Check::new("max per-step increase of V", 1e-6);
    for k in 0..trials {
        let mut cfg = ScenarioConfig::reference().noise_free();
        if k > 0 {
            cfg.run.duration = 3.0;
            let r = random_rotation(rng);
            cfg.initial.r_hat = [0, 1, 2].map(|i| [0, 1, 2].map(|j| r.matrix()[(i, j)]));
            cfg.initial.p_hat = [0, 1, 2].map(|i| rng.random_range(-0.9..0.9) * cfg.envelope.xi0[i + 1]);
        }
        let rec = run_scenario(&Scenario::from_config(&cfg)?)?;
        if let Some(a) = rec.abort {
            return Err(a.error);
        }
        c.record(rec.max_lyapunov_increase());
    }
    Ok(vec![c])
}
