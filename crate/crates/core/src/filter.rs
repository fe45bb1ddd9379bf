//! Pose filter with prescribed transient and steady-state error envelopes.
//!
//! One step evaluates everything from the state at the start of the step
//! ([`evaluate`]) and then advances it with a first-order geometric
//! integrator ([`propagate`]): `R̂⁺ = R̂ exp(Ω̂ dt)`, `P̂⁺ = P̂ + R̂ V̂ dt`,
//! `b̂⁺ = b̂ + b̂̇ dt`.

use nalgebra::Vector6;

use crate::error::{Error, Result};
use crate::liegroup::{dist_so3, skew, so3_exp, vex_pa, Mat3, Pose, RotationMatrix, Twist, Vec3};
use crate::ppf::{ppf_eval, transform_channels, ChannelTransform, ClampMode, PpfChannelConfig, PpfState, TransformedError};

pub type Vec6 = Vector6<f64>;

/// `ε_s`: the correction is undefined once `‖R̃‖_I ≥ 1 − ε_s`.
pub const SINGULARITY_EPS: f64 = 1e-9;

/// Rotation applied to `R̂` to step off the unstable set.
pub const UNSTABLE_SET_NUDGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterGains {
    k_w: f64,
    gamma: f64,
}

impl FilterGains {
    pub fn new(k_w: f64, gamma: f64) -> Result<Self> {
        if !(k_w > 0.0 && k_w.is_finite()) || !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "filter gains must be positive (k_w = {k_w}, gamma = {gamma})"
            )));
        }
        Ok(Self { k_w, gamma })
    }

    pub fn k_w(&self) -> f64 {
        self.k_w
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Everything a step needs besides the state and the measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub channels: [PpfChannelConfig; 4],
    pub gains: FilterGains,
    pub mode: ClampMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub t_hat: Pose,
    /// `[b̂_Ω; b̂_V]`
    pub b_hat: Vec6,
    pub clock: f64,
}

impl FilterState {
    pub fn new(t_hat: Pose, b_hat: Vec6) -> Self {
        Self { t_hat, b_hat, clock: 0.0 }
    }

    pub fn b_hat_omega(&self) -> Vec3 {
        self.b_hat.fixed_rows::<3>(0).into_owned()
    }

    pub fn b_hat_v(&self) -> Vec3 {
        self.b_hat.fixed_rows::<3>(3).into_owned()
    }
}

/// `R̃ = R̂ R_yᵀ`, `P̃ = P̂ − R̃ P_y` and derived quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBundle {
    pub r_tilde: RotationMatrix,
    pub p_tilde: Vec3,
    /// `[‖R̃‖_I, P̃ᵀ]ᵀ`
    pub e: [f64; 4],
    /// `vex(Pa(R̃))`
    pub vexpa: Vec3,
}

pub fn error_state(t_hat: &Pose, t_y: &Pose) -> ErrorBundle {
    let r_tilde = t_hat.r * t_y.r.transpose();
    let p_tilde = t_hat.p - r_tilde.rotate(&t_y.p);
    ErrorBundle {
        r_tilde,
        p_tilde,
        e: [dist_so3(&r_tilde), p_tilde.x, p_tilde.y, p_tilde.z],
        vexpa: vex_pa(r_tilde.matrix()),
    }
}

/// Correction twist `W = [W_Ω; W_V]`:
///
/// ```text
/// W_Ω = 2 (k_w μ₁ 𝓔_R − x/4) / (1 − ‖R̃‖_I) · vex(Pa(R̃))
/// W_V = R̂ᵀ (k_w 𝓜 𝓔_P + [P̃ − P̂]× W_Ω − X P̃)
/// ```
///
/// with `x = ξ̇₁/ξ₁` and `X = diag(ξ̇ᵢ/ξᵢ)` for the position channels.
/// `W_Ω` is expressed in the inertial frame, `W_V` in the body frame.
pub fn correction(
    err: &ErrorBundle,
    te: &TransformedError,
    states: &[PpfState; 4],
    gains: &FilterGains,
    t_hat: &Pose,
) -> Result<Twist> {
    let e1 = err.e[0];
    if !(e1 < 1.0 - SINGULARITY_EPS) {
        return Err(Error::NearSingular { e1 });
    }
    let x = states[0].ratio;
    let big_x = Vec3::new(states[1].ratio, states[2].ratio, states[3].ratio);
    let w_omega = err.vexpa * (2.0 * (gains.k_w * te.mu1 * te.e_r - 0.25 * x) / (1.0 - e1));
    let lever = skew(&(err.p_tilde - t_hat.p));
    let w_v = t_hat
        .r
        .transpose()
        .rotate(&(te.m_e_p() * gains.k_w + lever * w_omega - big_x.component_mul(&err.p_tilde)));
    Ok(Twist::new(w_omega, w_v))
}

/// `b̂̇ = γ [½ μ₁ 𝓔_R R̂ᵀ vex(Pa(R̃)) + R̂ᵀ [P̃ − P̂]× 𝓜𝓔_P ; R̂ᵀ 𝓜𝓔_P]`.
pub fn bias_dot(
    err: &ErrorBundle,
    te: &TransformedError,
    gains: &FilterGains,
    r_hat: &RotationMatrix,
    p_hat: &Vec3,
) -> Vec6 {
    let rt: Mat3 = r_hat.matrix().transpose();
    let me = te.m_e_p();
    let d_omega = rt * (err.vexpa * (0.5 * te.mu1 * te.e_r) + skew(&(err.p_tilde - p_hat)) * me);
    let d_v = rt * me;
    let mut out = Vec6::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(&(d_omega * gains.gamma));
    out.fixed_rows_mut::<3>(3).copy_from(&(d_v * gains.gamma));
    out
}

/// `½‖𝓔‖² + ‖b̃‖²/(2γ)`.
pub fn lyapunov(te: &TransformedError, b_tilde: &Vec6, gains: &FilterGains) -> f64 {
    0.5 * te.norm_squared() + b_tilde.norm_squared() / (2.0 * gains.gamma)
}

/// Quantities computed at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub err: ErrorBundle,
    pub envelopes: [PpfState; 4],
    pub transform: ChannelTransform,
    pub w: Twist,
    pub b_dot: Vec6,
}

/// Error, envelopes, transformed errors, correction and bias rate at `state`.
pub fn evaluate(state: &FilterState, t_y: &Pose, cfg: &FilterConfig) -> Result<Evaluation> {
    let err = error_state(&state.t_hat, t_y);
    if err.e.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("pose error"));
    }
    let envelopes = [0, 1, 2, 3].map(|i| ppf_eval(&cfg.channels[i], state.clock));
    let transform = transform_channels(&err.e, &envelopes, &cfg.channels, cfg.mode)?;
    let te = &transform.transformed;
    let w = correction(&err, te, &envelopes, &cfg.gains, &state.t_hat)?;
    let b_dot = bias_dot(&err, te, &cfg.gains, &state.t_hat.r, &state.t_hat.p);
    Ok(Evaluation {
        err,
        envelopes,
        transform,
        w,
        b_dot,
    })
}

/// Estimated group velocity: `Ω̂ = Ω_m − b̂_Ω − R̂ᵀ W_Ω`, `V̂ = V_m − b̂_V − W_V`.
pub fn estimated_velocity(state: &FilterState, w: &Twist, omega_m: &Vec3, v_m: &Vec3) -> Twist {
    let omega_hat = omega_m - state.b_hat_omega() - state.t_hat.r.transpose().rotate(&w.omega);
    let v_hat = v_m - state.b_hat_v() - w.v;
    Twist::new(omega_hat, v_hat)
}

/// Advances `state` by `dt` using a precomputed [`Evaluation`].
pub fn propagate(state: &FilterState, eval: &Evaluation, omega_m: &Vec3, v_m: &Vec3, dt: f64) -> Result<FilterState> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
    }
    let vel = estimated_velocity(state, &eval.w, omega_m, v_m);
    let r = state.t_hat.r;
    let p_next = state.t_hat.p + r.rotate(&vel.v) * dt;
    let r_next = (r * so3_exp(&(vel.omega * dt))).renormalized();
    let b_next = state.b_hat + eval.b_dot * dt;
    if p_next.iter().chain(b_next.iter()).chain(r_next.matrix().iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("filter state"));
    }
    Ok(FilterState {
        t_hat: Pose::new(r_next, p_next),
        b_hat: b_next,
        clock: state.clock + dt,
    })
}

/// One explicit step from `state` given the reconstructed pose and velocity measurements.
pub fn filter_step(
    state: &FilterState,
    t_y: &Pose,
    omega_m: &Vec3,
    v_m: &Vec3,
    cfg: &FilterConfig,
    dt: f64,
) -> Result<FilterState> {
    let eval = evaluate(state, t_y, cfg)?;
    propagate(state, &eval, omega_m, v_m, dt)
}

/// Moves `R̂` off the unstable set `‖R̃‖_I = 1` by rotating it
/// [`UNSTABLE_SET_NUDGE`] rad about the axis of `R̃`.
pub fn nudge_off_unstable_set(state: &FilterState, t_y: &Pose) -> FilterState {
    let err = error_state(&state.t_hat, t_y);
    let axis = if err.vexpa.norm() > 1e-12 {
        err.vexpa.normalize()
    } else {
        // R̃ ≈ 2nnᵀ − I: any nonzero column of R̃ + I is parallel to n
        let sym = err.r_tilde.matrix() + Mat3::identity();
        let col = (0..3)
            .map(|j| sym.column(j).into_owned())
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or_else(Vec3::x);
        if col.norm() > 1e-12 {
            col.normalize()
        } else {
            Vec3::x()
        }
    };
    let mut out = *state;
    out.t_hat.r = (so3_exp(&(axis * UNSTABLE_SET_NUDGE)) * state.t_hat.r).renormalized();
    out
}
