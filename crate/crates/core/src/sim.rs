//! Truth trajectory, sensor streams and the end-to-end run harness.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{ObservationSection, ScenarioConfig};
use crate::error::{Error, Result};
use crate::filter::{
    error_state, evaluate, lyapunov, nudge_off_unstable_set, propagate, FilterConfig, FilterGains, FilterState, Vec6,
};
use crate::liegroup::{euler_zyx, so3_exp, Mat3, Pose, RotationMatrix, Twist, Vec3};
use crate::ppf::{envelope_holds, ppf_eval, ClampMode, PpfChannelConfig};
use crate::recon::{reconstruct_pose, synthesize_measurements, MeasurementBias, MeasurementNoise, ReferenceSet};

/// Largest Frobenius defect tolerated in a configured rotation before it is
/// projected onto SO(3); configured matrices are often quoted to a few decimals.
pub const CONFIG_ROTATION_TOL: f64 = 1e-2;

/// Reference body-frame velocities.
pub fn true_velocity(t: f64) -> Twist {
    let omega = Vec3::new(0.6 * (0.4 * t).sin(), (0.6 * t).cos(), 0.7 * (0.3 * t + PI / 5.0).sin()) * 0.8;
    let v = Vec3::new(0.4 * (0.5 * t).cos(), (0.2 * t).sin(), 0.2 * (0.4 * t + PI / 3.0).sin()) * 0.3;
    Twist::new(omega, v)
}

/// One step of `Ṙ = R[Ω]×`, `Ṗ = RV` driven by [`true_velocity`] at `t`.
pub fn integrate_truth(state: &Pose, t: f64, dt: f64) -> Pose {
    integrate_with(state, &true_velocity(t), dt)
}

/// Same integrator as the filter: exponential map on attitude, Euler on position.
pub fn integrate_with(state: &Pose, vel: &Twist, dt: f64) -> Pose {
    let r = (state.r * so3_exp(&(vel.omega * dt))).renormalized();
    Pose::new(r, state.p + state.r.rotate(&vel.v) * dt)
}

/// Fully validated scenario, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub filter: FilterConfig,
    pub refs: ReferenceSet,
    pub measurement_bias: MeasurementBias,
    pub measurement_noise: MeasurementNoise,
    /// `[b_Ω; b_V]`
    pub bias: Vec6,
    pub sigma_omega: f64,
    pub sigma_v: f64,
    pub t0: Pose,
    pub t_hat0: Pose,
    pub b_hat0: Vec6,
}

fn vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn rotation_from_rows(rows: &[[f64; 3]; 3], name: &str) -> Result<RotationMatrix> {
    let m = Mat3::from_fn(|i, j| rows[i][j]);
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name}: non-finite entry")));
    }
    let defect = (m.transpose() * m - Mat3::identity()).norm();
    if defect > CONFIG_ROTATION_TOL || m.determinant() <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "{name} is not a rotation (orthogonality defect {defect:.3e}, det {:.6})",
            m.determinant()
        )));
    }
    RotationMatrix::project(m)
}

fn check_lengths(obs: &ObservationSection, name: &str) -> Result<()> {
    let n = obs.inertial.len();
    if obs.weights.len() != n || obs.bias.len() != n || obs.noise.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{name}: inertial, weights, bias and noise must all have {n} entries"
        )));
    }
    if obs.noise.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidConfig(format!("{name}: noise deviations must be non-negative")));
    }
    Ok(())
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let run = &cfg.run;
        if !(run.duration > 0.0 && run.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!("run.duration must be positive, got {}", run.duration)));
        }
        if !(run.dt > 0.0 && run.dt.is_finite()) || run.dt > run.duration {
            return Err(Error::InvalidConfig(format!("run.dt must be in (0, duration], got {}", run.dt)));
        }
        if !(run.clamp_margin > 0.0 && run.clamp_margin < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "run.clamp_margin must be in (0, 0.5), got {}",
                run.clamp_margin
            )));
        }
        let env = &cfg.envelope;
        let mut channels = Vec::with_capacity(4);
        for i in 0..4 {
            channels.push(
                PpfChannelConfig::new(env.xi0[i], env.xi_inf[i], env.ell[i], env.delta_bar[i], env.delta_under[i])
                    .map_err(|e| Error::InvalidConfig(format!("envelope channel {}: {e}", i + 1)))?,
            );
        }
        let channels: [PpfChannelConfig; 4] = [channels[0], channels[1], channels[2], channels[3]];
        let gains = FilterGains::new(cfg.gains.k_w, cfg.gains.gamma)?;
        let mode = if run.strict {
            ClampMode::Strict
        } else {
            ClampMode::Clamp { margin: run.clamp_margin }
        };

        check_lengths(&cfg.vectors, "vectors")?;
        check_lengths(&cfg.landmarks, "landmarks")?;
        let refs = ReferenceSet::new(
            cfg.vectors.inertial.iter().map(vec3).collect(),
            cfg.landmarks.inertial.iter().map(vec3).collect(),
            cfg.vectors.weights.clone(),
            cfg.landmarks.weights.clone(),
        )?;
        if refs.inertial_vectors.len() < 2 {
            return Err(Error::InvalidConfig("at least 2 reference vectors are required".into()));
        }
        if refs.landmarks.is_empty() {
            return Err(Error::InvalidConfig("at least 1 landmark is required".into()));
        }
        let measurement_bias = MeasurementBias {
            vectors: cfg.vectors.bias.iter().map(vec3).collect(),
            landmarks: cfg.landmarks.bias.iter().map(vec3).collect(),
        };
        let measurement_noise = MeasurementNoise {
            vectors: cfg.vectors.noise.clone(),
            landmarks: cfg.landmarks.noise.clone(),
        };

        let vel = &cfg.velocity;
        if !(vel.sigma_omega >= 0.0 && vel.sigma_v >= 0.0) {
            return Err(Error::InvalidConfig("velocity noise deviations must be non-negative".into()));
        }
        let bias = Vec6::new(
            vel.bias_omega[0],
            vel.bias_omega[1],
            vel.bias_omega[2],
            vel.bias_v[0],
            vel.bias_v[1],
            vel.bias_v[2],
        );

        let init = &cfg.initial;
        let t0 = Pose::new(rotation_from_rows(&init.r_true, "initial.r_true")?, vec3(&init.p_true));
        let t_hat0 = Pose::new(rotation_from_rows(&init.r_hat, "initial.r_hat")?, vec3(&init.p_hat));
        let b_hat0 = Vec6::from_row_slice(&init.b_hat);

        let e0 = error_state(&t_hat0, &t0).e;
        for i in 0..4 {
            if !(e0[i].abs() < env.xi0[i]) {
                return Err(Error::InvalidConfig(format!(
                    "initial error of channel {} ({}) is not inside its envelope (ξ⁰ = {})",
                    i + 1,
                    e0[i],
                    env.xi0[i]
                )));
            }
        }

        Ok(Self {
            duration: run.duration,
            dt: run.dt,
            seed: run.seed,
            filter: FilterConfig { channels, gains, mode },
            refs,
            measurement_bias,
            measurement_noise,
            bias,
            sigma_omega: vel.sigma_omega,
            sigma_v: vel.sigma_v,
            t0,
            t_hat0,
            b_hat0,
        })
    }

    /// Number of steps; the record holds one more row than this.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }
}

/// One recorded instant. Errors are evaluated before the step taken from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRow {
    pub t: f64,
    /// roll, pitch, yaw
    pub euler_true: Vec3,
    pub euler_hat: Vec3,
    pub p_true: Vec3,
    pub p_hat: Vec3,
    /// Error against the true pose.
    pub e: [f64; 4],
    /// Error against the reconstructed pose (what the filter sees).
    pub e_y: [f64; 4],
    pub xi: [f64; 4],
    /// `[𝓔_R, 𝓔_Pᵀ]`
    pub transformed: [f64; 4],
    pub b_hat: Vec6,
    pub lyapunov: f64,
    /// `envelope_holds` on the true error.
    pub envelope_ok: [bool; 4],
    /// Measured ratio was moved by the clamp.
    pub clamped: [bool; 4],
}

/// A run that stopped before its final row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAbort {
    /// Index of the row at which the failure occurred.
    pub row: usize,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    /// Per channel: measured `e/ξ` left `(−δ̲, δ̄)` before clamping.
    pub band_exits: [usize; 4],
    /// Per channel: measured `e/ξ` was moved by the clamp.
    pub clamp_events: [usize; 4],
    /// Per channel: the ratio fed to the transformation was still outside
    /// `(−δ̲, δ̄)`, or the transformed error was not finite.
    pub post_clamp_violations: [usize; 4],
    /// Steps taken off the unstable set.
    pub perturbations: usize,
    pub abort: Option<RunAbort>,
}

impl RunRecord {
    /// Rows (per channel) where `envelope_holds` failed on the true error.
    pub fn envelope_failures(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for row in &self.rows {
            for i in 0..4 {
                out[i] += usize::from(!row.envelope_ok[i]);
            }
        }
        out
    }

    /// Largest single-step increase of the Lyapunov value (negative if it always fell).
    pub fn max_lyapunov_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].lyapunov - w[0].lyapunov)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|eᵢ|/ξᵢ` over the run, per channel.
    pub fn max_envelope_usage(&self) -> [f64; 4] {
        let mut out = [0.0f64; 4];
        for row in &self.rows {
            for i in 0..4 {
                out[i] = out[i].max(row.e[i].abs() / row.xi[i]);
            }
        }
        out
    }

    /// Mean true error over rows with `t ≥ t_end − window`.
    pub fn tail_mean_error(&self, window: f64) -> [f64; 4] {
        let Some(last) = self.rows.last() else {
            return [f64::NAN; 4];
        };
        let cutoff = last.t - window - 1e-12;
        let tail: Vec<&RunRow> = self.rows.iter().filter(|r| r.t >= cutoff).collect();
        let mut out = [0.0; 4];
        for r in &tail {
            for i in 0..4 {
                out[i] += r.e[i];
            }
        }
        out.map(|s| s / tail.len() as f64)
    }

    pub fn final_row(&self) -> Option<&RunRow> {
        self.rows.last()
    }
}

fn gaussian3(rng: &mut ChaCha8Rng, std: f64) -> Vec3 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vec3::new(x, y, z) * std
}

/// Runs the scenario from `t = 0` to `duration`.
///
/// Per step `k`: synthesize vector/landmark measurements at the true pose
/// `T_k`, reconstruct `T_y`, evaluate the filter and record row `k`, then draw
/// the velocity measurements `Ω_m = Ω + b_Ω + ω_Ω`, `V_m = V + b_V + ω_V` and
/// advance both truth and filter by `dt`. All randomness comes from one
/// generator seeded with `seed`, consumed in that order.
///
/// A strict-mode envelope violation or an unstable-set hit in strict mode
/// ends the run early; the record keeps the rows up to that point and
/// [`RunRecord::abort`] says where and why.
pub fn run_scenario(s: &Scenario) -> Result<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let n = s.steps();
    let strict = matches!(s.filter.mode, ClampMode::Strict);
    let mut rec = RunRecord {
        rows: Vec::with_capacity(n + 1),
        ..RunRecord::default()
    };

    let mut truth = s.t0;
    let mut state = FilterState::new(s.t_hat0, s.b_hat0);
    let sign0 = error_state(&s.t_hat0, &s.t0).e.map(|x| x >= 0.0);

    for k in 0..=n {
        let t = k as f64 * s.dt;
        state.clock = t;
        let meas = synthesize_measurements(&truth, &s.refs, &s.measurement_bias, &s.measurement_noise, &mut rng)?;
        let t_y = reconstruct_pose(&s.refs, &meas)?;

        let eval = loop {
            match evaluate(&state, &t_y, &s.filter) {
                Ok(ev) => break ev,
                Err(Error::NearSingular { .. }) if !strict && rec.perturbations < 1000 => {
                    state = nudge_off_unstable_set(&state, &t_y);
                    rec.perturbations += 1;
                }
                Err(error) => {
                    rec.abort = Some(RunAbort { row: k, error });
                    return Ok(rec);
                }
            }
        };

        let true_err = error_state(&state.t_hat, &truth).e;
        let mut envelope_ok = [false; 4];
        for i in 0..4 {
            let ch = &s.filter.channels[i];
            let env = &eval.envelopes[i];
            envelope_ok[i] = envelope_holds(true_err[i], env, ch, sign0[i]);
            let raw = eval.err.e[i] / env.xi;
            rec.band_exits[i] += usize::from(!(raw > -ch.delta_under() && raw < ch.delta_bar()));
            rec.clamp_events[i] += usize::from(eval.transform.clamped[i]);
            let fed = eval.transform.ratios[i];
            let te = &eval.transform.transformed;
            let big = if i == 0 { te.e_r } else { te.e_p[i - 1] };
            rec.post_clamp_violations[i] +=
                usize::from(!(fed > -ch.delta_under() && fed < ch.delta_bar() && big.is_finite()));
        }
        let te = &eval.transform.transformed;
        rec.rows.push(RunRow {
            t,
            euler_true: euler_zyx(&truth.r),
            euler_hat: euler_zyx(&state.t_hat.r),
            p_true: truth.p,
            p_hat: state.t_hat.p,
            e: true_err,
            e_y: eval.err.e,
            xi: eval.envelopes.map(|e| e.xi),
            transformed: [te.e_r, te.e_p.x, te.e_p.y, te.e_p.z],
            b_hat: state.b_hat,
            lyapunov: lyapunov(te, &(s.bias - state.b_hat), &s.filter.gains),
            envelope_ok,
            clamped: eval.transform.clamped,
        });
        if k == n {
            break;
        }

        let vel = true_velocity(t);
        let omega_m = vel.omega + s.bias.fixed_rows::<3>(0) + gaussian3(&mut rng, s.sigma_omega);
        let v_m = vel.v + s.bias.fixed_rows::<3>(3) + gaussian3(&mut rng, s.sigma_v);
        state = match propagate(&state, &eval, &omega_m, &v_m, s.dt) {
            Ok(next) => next,
            Err(error) => {
                rec.abort = Some(RunAbort { row: k, error });
                return Ok(rec);
            }
        };
        truth = integrate_with(&truth, &vel, s.dt);
    }
    Ok(rec)
}

/// Envelope value of channel `i` at `t` for a scenario (convenience for reports).
pub fn envelope_at(s: &Scenario, i: usize, t: f64) -> f64 {
    ppf_eval(&s.filter.channels[i], t).xi
}
