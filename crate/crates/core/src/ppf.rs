//! Prescribed performance envelopes and the log-ratio error transformation.
//!
//! Each error channel `eᵢ` is confined by an exponentially shrinking envelope
//! `ξᵢ(t)`. The constrained ratio `eᵢ/ξᵢ ∈ (−δ̲ᵢ, δ̄ᵢ)` is mapped to an
//! unconstrained transformed error `𝓔ᵢ`; the filter drives `𝓔` to zero.

use crate::error::{Error, Result};
use crate::liegroup::Vec3;

/// Default safety-clamp margin, as a fraction of `δ̄ᵢ`.
pub const DEFAULT_CLAMP_MARGIN: f64 = 1e-6;

/// Beyond this magnitude [`smooth_z`] returns its asymptote directly.
const Z_ASYMPTOTE_CUTOFF: f64 = 30.0;

/// Envelope parameters for one error channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpfChannelConfig {
    xi0: f64,
    xi_inf: f64,
    ell: f64,
    delta_bar: f64,
    delta_under: f64,
}

impl PpfChannelConfig {
    pub fn new(xi0: f64, xi_inf: f64, ell: f64, delta_bar: f64, delta_under: f64) -> Result<Self> {
        let all = [xi0, xi_inf, ell, delta_bar, delta_under];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("PPF parameters must be finite".into()));
        }
        if !(xi0 > xi_inf && xi_inf > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "PPF needs ξ⁰ > ξ^∞ > 0 (got ξ⁰ = {xi0}, ξ^∞ = {xi_inf})"
            )));
        }
        if ell <= 0.0 {
            return Err(Error::InvalidConfig(format!("PPF decay rate must be positive (got {ell})")));
        }
        if !(delta_under > 0.0 && delta_under <= delta_bar) {
            return Err(Error::InvalidConfig(format!(
                "PPF needs 0 < δ̲ ≤ δ̄ (got δ̲ = {delta_under}, δ̄ = {delta_bar})"
            )));
        }
        Ok(Self {
            xi0,
            xi_inf,
            ell,
            delta_bar,
            delta_under,
        })
    }

    /// Symmetric channel (`δ̄ = δ̲ = delta`).
    pub fn symmetric(xi0: f64, xi_inf: f64, ell: f64, delta: f64) -> Result<Self> {
        Self::new(xi0, xi_inf, ell, delta, delta)
    }

    pub fn xi0(&self) -> f64 {
        self.xi0
    }
    pub fn xi_inf(&self) -> f64 {
        self.xi_inf
    }
    pub fn ell(&self) -> f64 {
        self.ell
    }
    pub fn delta_bar(&self) -> f64 {
        self.delta_bar
    }
    pub fn delta_under(&self) -> f64 {
        self.delta_under
    }
}

/// Envelope value at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpfState {
    pub xi: f64,
    pub xi_dot: f64,
    /// `ξ̇/ξ`
    pub ratio: f64,
}

/// How to treat normalized errors at or beyond the admissible band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClampMode {
    /// Fail with [`Error::EnvelopeViolation`].
    Strict,
    /// Clamp `eᵢ/ξᵢ` into `[−δ̲ + ε, δ̄ − ε]` with `ε = margin · δ̄`.
    Clamp { margin: f64 },
}

impl Default for ClampMode {
    fn default() -> Self {
        ClampMode::Clamp {
            margin: DEFAULT_CLAMP_MARGIN,
        }
    }
}

/// Normalized error after the admissibility check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleRatio {
    pub ratio: f64,
    /// The raw ratio was outside the clamp band and got moved.
    pub clamped: bool,
}

/// Checks `eᵢ/ξᵢ` against `(−δ̲, δ̄)`, clamping or failing according to `mode`.
pub fn admissible_ratio(
    channel: usize,
    e: f64,
    st: &PpfState,
    cfg: &PpfChannelConfig,
    mode: ClampMode,
) -> Result<AdmissibleRatio> {
    let ratio = e / st.xi;
    let violation = || Error::EnvelopeViolation {
        channel,
        ratio,
        lower: cfg.delta_under,
        upper: cfg.delta_bar,
    };
    if !ratio.is_finite() {
        return Err(violation());
    }
    match mode {
        ClampMode::Strict => {
            if ratio > -cfg.delta_under && ratio < cfg.delta_bar {
                Ok(AdmissibleRatio { ratio, clamped: false })
            } else {
                Err(violation())
            }
        }
        ClampMode::Clamp { margin } => {
            let eps = margin * cfg.delta_bar;
            let lo = -cfg.delta_under + eps;
            let hi = cfg.delta_bar - eps;
            let clamped_ratio = ratio.clamp(lo, hi);
            Ok(AdmissibleRatio {
                ratio: clamped_ratio,
                clamped: clamped_ratio != ratio,
            })
        }
    }
}

/// `ξ(t) = (ξ⁰ − ξ^∞) e^{−ℓt} + ξ^∞` with its analytic derivative.
pub fn ppf_eval(cfg: &PpfChannelConfig, t: f64) -> PpfState {
    let decay = (-cfg.ell * t).exp();
    let span = cfg.xi0 - cfg.xi_inf;
    let xi = span * decay + cfg.xi_inf;
    let xi_dot = -cfg.ell * span * decay;
    PpfState {
        xi,
        xi_dot,
        ratio: xi_dot / xi,
    }
}

/// `𝓔(r) = ½ ln((δ̲ + r)/(δ̄ − r))` for an admissible ratio `r`.
pub fn transform_ratio(r: f64, cfg: &PpfChannelConfig) -> f64 {
    0.5 * ((cfg.delta_under + r) / (cfg.delta_bar - r)).ln()
}

/// `μ(r) = (1/(2ξ)) [1/(δ̲ + r) + 1/(δ̄ − r)]` for an admissible ratio `r`.
pub fn mu_ratio(r: f64, xi: f64, cfg: &PpfChannelConfig) -> f64 {
    (1.0 / (cfg.delta_under + r) + 1.0 / (cfg.delta_bar - r)) / (2.0 * xi)
}

/// Transformed error `𝓔ᵢ` for raw error `eᵢ`.
pub fn transform_error(e: f64, st: &PpfState, cfg: &PpfChannelConfig, mode: ClampMode) -> Result<f64> {
    let r = admissible_ratio(0, e, st, cfg, mode)?;
    Ok(transform_ratio(r.ratio, cfg))
}

/// Inverse of the transformation: `Z(𝓔) = (δ̄e^𝓔 − δ̲e^{−𝓔})/(e^𝓔 + e^{−𝓔})`.
pub fn smooth_z(big_e: f64, cfg: &PpfChannelConfig) -> f64 {
    if big_e > Z_ASYMPTOTE_CUTOFF {
        return cfg.delta_bar;
    }
    if big_e < -Z_ASYMPTOTE_CUTOFF {
        return -cfg.delta_under;
    }
    if big_e >= 0.0 {
        let w = (-2.0 * big_e).exp();
        (cfg.delta_bar - cfg.delta_under * w) / (1.0 + w)
    } else {
        let w = (2.0 * big_e).exp();
        (cfg.delta_bar * w - cfg.delta_under) / (w + 1.0)
    }
}

/// `μᵢ = ∂𝓔ᵢ/∂eᵢ`.
pub fn mu(e: f64, st: &PpfState, cfg: &PpfChannelConfig, mode: ClampMode) -> Result<f64> {
    let r = admissible_ratio(0, e, st, cfg, mode)?;
    Ok(mu_ratio(r.ratio, st.xi, cfg))
}

/// Envelope check on a raw error: `−δξ < e < ξ` when `e(0) ≥ 0` and
/// `−ξ < e < δξ` otherwise, with `δ = δ̲/δ̄`.
pub fn envelope_holds(e: f64, st: &PpfState, cfg: &PpfChannelConfig, initially_nonnegative: bool) -> bool {
    let delta = cfg.delta_under / cfg.delta_bar;
    if initially_nonnegative {
        -delta * st.xi < e && e < st.xi
    } else {
        -st.xi < e && e < delta * st.xi
    }
}

/// Transformed errors and their gains for the four pose channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedError {
    /// `𝓔_R`
    pub e_r: f64,
    /// `𝓔_P`
    pub e_p: Vec3,
    pub mu1: f64,
    /// diagonal of `𝓜 = diag(μ₂, μ₃, μ₄)`
    pub m_diag: Vec3,
}

impl TransformedError {
    pub fn zero_with_gains(mu1: f64, m_diag: Vec3) -> Self {
        Self {
            e_r: 0.0,
            e_p: Vec3::zeros(),
            mu1,
            m_diag,
        }
    }

    /// `[𝓔_R, 𝓔_Pᵀ]ᵀ` squared norm.
    pub fn norm_squared(&self) -> f64 {
        self.e_r * self.e_r + self.e_p.norm_squared()
    }

    /// `𝓜 𝓔_P`
    pub fn m_e_p(&self) -> Vec3 {
        self.m_diag.component_mul(&self.e_p)
    }
}

/// Result of transforming all four channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTransform {
    pub transformed: TransformedError,
    pub ratios: [f64; 4],
    pub clamped: [bool; 4],
}

/// Applies the transformation to `e = [e₁, e₂, e₃, e₄]`.
pub fn transform_channels(
    e: &[f64; 4],
    states: &[PpfState; 4],
    cfgs: &[PpfChannelConfig; 4],
    mode: ClampMode,
) -> Result<ChannelTransform> {
    let mut big = [0.0; 4];
    let mut mus = [0.0; 4];
    let mut ratios = [0.0; 4];
    let mut clamped = [false; 4];
    for i in 0..4 {
        let r = admissible_ratio(i + 1, e[i], &states[i], &cfgs[i], mode)?;
        big[i] = transform_ratio(r.ratio, &cfgs[i]);
        mus[i] = mu_ratio(r.ratio, states[i].xi, &cfgs[i]);
        ratios[i] = r.ratio;
        clamped[i] = r.clamped;
    }
    Ok(ChannelTransform {
        transformed: TransformedError {
            e_r: big[0],
            e_p: Vec3::new(big[1], big[2], big[3]),
            mu1: mus[0],
            m_diag: Vec3::new(mus[1], mus[2], mus[3]),
        },
        ratios,
        clamped,
    })
}
