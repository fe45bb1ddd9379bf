//! Body-frame vector/landmark measurements and reconstruction of `T_y`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::liegroup::{Mat3, Pose, RotationMatrix, Vec3};

/// Minimum `‖υ₁ × υ₂‖` for two directions to count as non-collinear.
pub const COLLINEARITY_TOL: f64 = 1e-6;

/// Minimum second-smallest singular value of the attitude profile matrix.
pub const WAHBA_DEGENERACY_TOL: f64 = 1e-9;

/// Known inertial-frame directions and landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pub inertial_vectors: Vec<Vec3>,
    pub landmarks: Vec<Vec3>,
    pub vector_weights: Vec<f64>,
    /// `k_j^L`
    pub landmark_weights: Vec<f64>,
}

impl ReferenceSet {
    pub fn new(
        inertial_vectors: Vec<Vec3>,
        landmarks: Vec<Vec3>,
        vector_weights: Vec<f64>,
        landmark_weights: Vec<f64>,
    ) -> Result<Self> {
        if vector_weights.len() != inertial_vectors.len() {
            return Err(Error::InvalidConfig(format!(
                "{} vector weights for {} reference vectors",
                vector_weights.len(),
                inertial_vectors.len()
            )));
        }
        if landmark_weights.len() != landmarks.len() {
            return Err(Error::InvalidConfig(format!(
                "{} landmark weights for {} landmarks",
                landmark_weights.len(),
                landmarks.len()
            )));
        }
        if vector_weights.iter().chain(&landmark_weights).any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig("measurement weights must be positive".into()));
        }
        Ok(Self {
            inertial_vectors,
            landmarks,
            vector_weights,
            landmark_weights,
        })
    }

    pub fn with_unit_weights(inertial_vectors: Vec<Vec3>, landmarks: Vec<Vec3>) -> Self {
        let vw = vec![1.0; inertial_vectors.len()];
        let lw = vec![1.0; landmarks.len()];
        Self {
            inertial_vectors,
            landmarks,
            vector_weights: vw,
            landmark_weights: lw,
        }
    }
}

/// Constant body-frame biases on each measurement.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementBias {
    pub vectors: Vec<Vec3>,
    pub landmarks: Vec<Vec3>,
}

impl MeasurementBias {
    pub fn zero(refs: &ReferenceSet) -> Self {
        Self {
            vectors: vec![Vec3::zeros(); refs.inertial_vectors.len()],
            landmarks: vec![Vec3::zeros(); refs.landmarks.len()],
        }
    }
}

/// Per-measurement Gaussian noise standard deviations (isotropic per component).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementNoise {
    pub vectors: Vec<f64>,
    pub landmarks: Vec<f64>,
}

impl MeasurementNoise {
    pub fn zero(refs: &ReferenceSet) -> Self {
        Self {
            vectors: vec![0.0; refs.inertial_vectors.len()],
            landmarks: vec![0.0; refs.landmarks.len()],
        }
    }
}

/// One sample of body-frame measurements, plus the bias and noise that went into it.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyMeasurements {
    pub body_vectors: Vec<Vec3>,
    pub body_landmarks: Vec<Vec3>,
    pub vector_bias: Vec<Vec3>,
    pub vector_noise: Vec<Vec3>,
    pub landmark_bias: Vec<Vec3>,
    pub landmark_noise: Vec<Vec3>,
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, std: f64) -> Vec3 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vec3::new(x, y, z) * std
}

/// `v_B = Rᵀ v_I + b + ω` for directions, `v_B = Rᵀ (v_I − P) + b + ω` for landmarks.
///
/// Noise is drawn from `rng` in a fixed order: every vector, then every
/// landmark, three components each, whether or not the deviation is zero.
pub fn synthesize_measurements<R: Rng + ?Sized>(
    truth: &Pose,
    refs: &ReferenceSet,
    bias: &MeasurementBias,
    noise: &MeasurementNoise,
    rng: &mut R,
) -> Result<BodyMeasurements> {
    let nv = refs.inertial_vectors.len();
    let nl = refs.landmarks.len();
    if bias.vectors.len() != nv || noise.vectors.len() != nv {
        return Err(Error::InvalidConfig(format!(
            "vector bias/noise lists must have {nv} entries"
        )));
    }
    if bias.landmarks.len() != nl || noise.landmarks.len() != nl {
        return Err(Error::InvalidConfig(format!(
            "landmark bias/noise lists must have {nl} entries"
        )));
    }
    if noise.vectors.iter().chain(&noise.landmarks).any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidConfig("noise deviations must be non-negative".into()));
    }

    let rt = truth.r.transpose();
    let vector_noise: Vec<Vec3> = noise.vectors.iter().map(|&s| gaussian3(rng, s)).collect();
    let landmark_noise: Vec<Vec3> = noise.landmarks.iter().map(|&s| gaussian3(rng, s)).collect();

    let body_vectors = refs
        .inertial_vectors
        .iter()
        .zip(&bias.vectors)
        .zip(&vector_noise)
        .map(|((v, b), w)| rt.rotate(v) + b + w)
        .collect();
    let body_landmarks = refs
        .landmarks
        .iter()
        .zip(&bias.landmarks)
        .zip(&landmark_noise)
        .map(|((l, b), w)| rt.rotate(&(l - truth.p)) + b + w)
        .collect();

    Ok(BodyMeasurements {
        body_vectors,
        body_landmarks,
        vector_bias: bias.vectors.clone(),
        vector_noise,
        landmark_bias: bias.landmarks.clone(),
        landmark_noise,
    })
}

/// Paired inertial/body directions with their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorObservations {
    pub inertial: Vec<Vec3>,
    pub body: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl VectorObservations {
    pub fn from_measurements(refs: &ReferenceSet, meas: &BodyMeasurements) -> Result<Self> {
        if meas.body_vectors.len() != refs.inertial_vectors.len() {
            return Err(Error::Precondition(format!(
                "{} body vectors for {} reference vectors",
                meas.body_vectors.len(),
                refs.inertial_vectors.len()
            )));
        }
        Ok(Self {
            inertial: refs.inertial_vectors.clone(),
            body: meas.body_vectors.clone(),
            weights: refs.vector_weights.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.inertial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inertial.is_empty()
    }
}

/// Appends `υ₃ = υ₁ × υ₂` on both sides when only two directions are available.
/// The new pair takes the mean of the two weights.
pub fn augment_third_vector(obs: &VectorObservations) -> Result<VectorObservations> {
    if obs.len() != 2 {
        return Err(Error::Precondition(format!(
            "augmentation needs exactly 2 vectors, got {}",
            obs.len()
        )));
    }
    let cross_i = obs.inertial[0].cross(&obs.inertial[1]);
    let cross_norm = obs.inertial[0].normalize().cross(&obs.inertial[1].normalize()).norm();
    if !(cross_norm >= COLLINEARITY_TOL) {
        return Err(Error::CollinearInputs { cross_norm });
    }
    let cross_b = obs.body[0].cross(&obs.body[1]);
    let mut out = obs.clone();
    out.inertial.push(cross_i);
    out.body.push(cross_b);
    out.weights.push(0.5 * (obs.weights[0] + obs.weights[1]));
    Ok(out)
}

/// Scales every direction to unit length.
pub fn normalize_pairs(obs: &VectorObservations) -> Result<VectorObservations> {
    let unit = |v: &Vec3| -> Result<Vec3> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(v / n)
    };
    Ok(VectorObservations {
        inertial: obs.inertial.iter().map(unit).collect::<Result<_>>()?,
        body: obs.body.iter().map(unit).collect::<Result<_>>()?,
        weights: obs.weights.clone(),
    })
}

/// Solves Wahba's problem: the `R_y` minimizing `Σ wⱼ‖υⱼ^B − R_yᵀυⱼ^I‖²`.
///
/// `H = Σ wⱼ υⱼ^I (υⱼ^B)ᵀ = U Σ V̄ᵀ`, `R_y = U diag(1, 1, det U det V̄) V̄ᵀ`.
pub fn wahba_svd(obs: &VectorObservations) -> Result<RotationMatrix> {
    if obs.len() < 2 {
        return Err(Error::Precondition(format!(
            "attitude reconstruction needs at least 2 directions, got {}",
            obs.len()
        )));
    }
    let h = obs
        .inertial
        .iter()
        .zip(&obs.body)
        .zip(&obs.weights)
        .fold(Mat3::zeros(), |acc, ((vi, vb), w)| acc + vi * vb.transpose() * *w);
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("attitude profile matrix"));
    }
    let svd = h.svd(true, true);
    let mut sigma = [svd.singular_values[0], svd.singular_values[1], svd.singular_values[2]];
    sigma.sort_by(|a, b| a.total_cmp(b));
    if sigma[1] < WAHBA_DEGENERACY_TOL {
        return Err(Error::DegenerateGeometry { sigma: sigma[1] });
    }
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NonFinite("attitude profile SVD")),
    };
    let d = u.determinant() * v_t.determinant();
    let r = u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d.signum())) * v_t;
    RotationMatrix::project(r)
}

/// `P_y = (Σ k_j)⁻¹ Σ k_j (v_j^I − R_y v_j^B)`.
pub fn position_from_landmarks(r_y: &RotationMatrix, refs: &ReferenceSet, meas: &BodyMeasurements) -> Result<Vec3> {
    if refs.landmarks.is_empty() {
        return Err(Error::Precondition("position reconstruction needs at least one landmark".into()));
    }
    if meas.body_landmarks.len() != refs.landmarks.len() {
        return Err(Error::Precondition(format!(
            "{} body landmarks for {} references",
            meas.body_landmarks.len(),
            refs.landmarks.len()
        )));
    }
    let total: f64 = refs.landmark_weights.iter().sum();
    let sum = refs
        .landmarks
        .iter()
        .zip(&meas.body_landmarks)
        .zip(&refs.landmark_weights)
        .fold(Vec3::zeros(), |acc, ((vi, vb), k)| acc + (vi - r_y.rotate(vb)) * *k);
    Ok(sum / total)
}

/// Full reconstruction `T_y = (R_y, P_y)` from one measurement sample.
pub fn reconstruct_pose(refs: &ReferenceSet, meas: &BodyMeasurements) -> Result<Pose> {
    if refs.landmarks.is_empty() {
        return Err(Error::Precondition("pose reconstruction needs at least one landmark".into()));
    }
    let obs = VectorObservations::from_measurements(refs, meas)?;
    let obs = match obs.len() {
        0 | 1 => {
            return Err(Error::Precondition(format!(
                "pose reconstruction needs at least 2 directions, got {}",
                obs.len()
            )))
        }
        2 => augment_third_vector(&obs)?,
        _ => obs,
    };
    let obs = normalize_pairs(&obs)?;
    let r_y = wahba_svd(&obs)?;
    let p_y = position_from_landmarks(&r_y, refs, meas)?;
    Ok(Pose::new(r_y, p_y))
}
