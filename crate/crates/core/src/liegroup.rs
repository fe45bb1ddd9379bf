//! SO(3) / SE(3) primitives.
//!
//! Rotations are kept as full 3×3 matrices. Anything that integrates them over
//! many steps should call [`RotationMatrix::renormalized`] so that rounding
//! drift is projected back onto the group once it exceeds [`ORTHOGONALITY_TOL`].

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;

/// Frobenius bound on `RᵀR − I` (and on `|det R − 1|`) for a matrix to count
/// as a rotation.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;

/// Bound on `‖M + Mᵀ‖_F` accepted by [`vex`].
pub const ANTISYMMETRY_TOL: f64 = 1e-9;

/// Below this angle [`so3_exp`] switches to its second-order series.
pub const EXP_SERIES_THRESHOLD: f64 = 1e-8;

/// Attitude on SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Validates `m` against the SO(3) invariants.
    pub fn new(m: Mat3) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rotation matrix"));
        }
        let orthogonality = orthogonality_defect(&m);
        let det = m.determinant();
        if orthogonality > ORTHOGONALITY_TOL || (det - 1.0).abs() > ORTHOGONALITY_TOL {
            return Err(Error::NotRotation { orthogonality, det });
        }
        Ok(Self(m))
    }

    /// Nearest proper rotation to `m` in the Frobenius sense (polar factor via SVD).
    pub fn project(m: Mat3) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix to orthonormalize"));
        }
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::NonFinite("matrix to orthonormalize")),
        };
        let d = (u * v_t).determinant().signum();
        let r = u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t;
        Ok(Self(r))
    }

    /// Wraps a matrix already known to be a rotation (e.g. a product of rotations).
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.0)
    }

    /// Projects back onto SO(3) if rounding drift exceeds [`ORTHOGONALITY_TOL`].
    pub fn renormalized(self) -> Self {
        let det = self.0.determinant();
        if self.orthogonality_defect() > ORTHOGONALITY_TOL || (det - 1.0).abs() > ORTHOGONALITY_TOL {
            Self::project(self.0).unwrap_or(self)
        } else {
            self
        }
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for RotationMatrix {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &RotationMatrix {
    type Output = Vec3;

    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Rigid-body pose: attitude plus position (meters) in the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub r: RotationMatrix,
    pub p: Vec3,
}

impl Pose {
    pub fn new(r: RotationMatrix, p: Vec3) -> Self {
        Self { r, p }
    }

    pub fn identity() -> Self {
        Self::new(RotationMatrix::identity(), Vec3::zeros())
    }

    /// `[[R, P], [0, 1]]`.
    pub fn to_homogeneous(&self) -> Mat4 {
        let mut t = Mat4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(self.r.matrix());
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.p);
        t
    }

    pub fn from_homogeneous(t: &Mat4) -> Result<Self> {
        let bottom = t.fixed_view::<1, 4>(3, 0);
        if (bottom[0], bottom[1], bottom[2], bottom[3]) != (0.0, 0.0, 0.0, 1.0) {
            return Err(Error::Precondition(
                "homogeneous transform must have bottom row [0, 0, 0, 1]".into(),
            ));
        }
        let r = RotationMatrix::new(t.fixed_view::<3, 3>(0, 0).into_owned())?;
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("homogeneous transform"));
        }
        Ok(Self::new(r, t.fixed_view::<3, 1>(0, 3).into_owned()))
    }

    /// `self · other` as homogeneous matrices.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(self.r * other.r, self.p + self.r.rotate(&other.p))
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.r.transpose();
        Pose::new(rt, -rt.rotate(&self.p))
    }
}

/// Body-frame group velocity `[Ωᵀ, Vᵀ]ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    /// rad/s
    pub omega: Vec3,
    /// m/s
    pub v: Vec3,
}

impl Twist {
    pub fn new(omega: Vec3, v: Vec3) -> Self {
        Self { omega, v }
    }

    pub fn zero() -> Self {
        Self::new(Vec3::zeros(), Vec3::zeros())
    }
}

/// `[b]×`, so that `skew(b) · w = b × w`.
pub fn skew(b: &Vec3) -> Mat3 {
    Mat3::new(0.0, -b.z, b.y, b.z, 0.0, -b.x, -b.y, b.x, 0.0)
}

/// Inverse of [`skew`].
pub fn vex(m: &Mat3) -> Result<Vec3> {
    let defect = (m + m.transpose()).norm();
    if defect > ANTISYMMETRY_TOL {
        return Err(Error::NotAntisymmetric { defect });
    }
    Ok(vex_unchecked(m))
}

fn vex_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `[y]∧` for a twist: `[[ [Ω]×, V ], [0, 0]]`.
pub fn wedge(y: &Twist) -> Mat4 {
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&y.omega));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&y.v);
    m
}

/// Antisymmetric projection `(M − Mᵀ)/2`.
pub fn pa(m: &Mat3) -> Mat3 {
    (m - m.transpose()) * 0.5
}

/// `vex(Pa(M))`; never fails since `Pa(M)` is antisymmetric by construction.
pub fn vex_pa(m: &Mat3) -> Vec3 {
    vex_unchecked(&pa(m))
}

/// Normalized Euclidean distance `‖R‖_I = Tr(I − R)/4 ∈ [0, 1]`.
pub fn dist_so3(r: &RotationMatrix) -> f64 {
    0.25 * (3.0 - r.matrix().trace())
}

/// Exponential map `so(3) → SO(3)`.
pub fn so3_exp(phi: &Vec3) -> RotationMatrix {
    let theta = phi.norm();
    let k = skew(phi);
    let m = if theta < EXP_SERIES_THRESHOLD {
        Mat3::identity() + k + k * k * 0.5
    } else {
        let kn = k / theta;
        Mat3::identity() + kn * theta.sin() + kn * kn * (1.0 - theta.cos())
    };
    RotationMatrix::from_matrix_unchecked(m)
}

/// Rotation from Rodriguez parameters `ρ`:
/// `((1 − ‖ρ‖²) I + 2ρρᵀ + 2[ρ]×) / (1 + ‖ρ‖²)`.
pub fn rodriguez_map(rho: &Vec3) -> RotationMatrix {
    let n2 = rho.norm_squared();
    let m = (Mat3::identity() * (1.0 - n2) + rho * rho.transpose() * 2.0 + skew(rho) * 2.0)
        / (1.0 + n2);
    RotationMatrix::from_matrix_unchecked(m)
}

/// Roll, pitch, yaw for `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
///
/// Pitch lies in `[−π/2, π/2]`. At gimbal lock yaw is pinned to zero and the
/// remaining rotation is reported as roll.
pub fn euler_zyx(r: &RotationMatrix) -> Vec3 {
    let m = r.matrix();
    let s = (-m[(2, 0)]).clamp(-1.0, 1.0);
    let pitch = s.asin();
    if 1.0 - s.abs() < 1e-12 {
        // R = Ry(±π/2)·Rx(roll): row 0 is [0, ±sin roll, ±cos roll]
        let roll = if s > 0.0 {
            m[(0, 1)].atan2(m[(1, 1)])
        } else {
            (-m[(0, 1)]).atan2(m[(1, 1)])
        };
        Vec3::new(roll, pitch, 0.0)
    } else {
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        Vec3::new(roll, pitch, yaw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rot_z(a: f64) -> Mat3 {
        Mat3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0)
    }
    fn rot_y(a: f64) -> Mat3 {
        Mat3::new(a.cos(), 0.0, a.sin(), 0.0, 1.0, 0.0, -a.sin(), 0.0, a.cos())
    }
    fn rot_x(a: f64) -> Mat3 {
        Mat3::new(1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos())
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-3.0f64..3.0).prop_map(Vec3::from)
    }

    #[test]
    fn skew_examples() {
        assert_eq!(skew(&Vec3::zeros()), Mat3::zeros());
        let expected = Mat3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0);
        assert_eq!(skew(&Vec3::new(1.0, 2.0, 3.0)), expected);
        assert_eq!(skew(&Vec3::x()) * Vec3::y(), Vec3::z());
    }

    #[test]
    fn vex_examples() {
        let b = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(vex(&skew(&b)).unwrap(), b);
        assert_eq!(vex(&Mat3::zeros()).unwrap(), Vec3::zeros());
        assert!(matches!(
            vex(&Mat3::identity()),
            Err(Error::NotAntisymmetric { .. })
        ));
    }

    #[test]
    fn wedge_layout() {
        assert_eq!(wedge(&Twist::zero()), Mat4::zeros());
        let y = Twist::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0));
        let expected = Mat4::new(
            0.0, -3.0, 2.0, 4.0, //
            3.0, 0.0, -1.0, 5.0, //
            -2.0, 1.0, 0.0, 6.0, //
            0.0, 0.0, 0.0, 0.0,
        );
        assert_eq!(wedge(&y), expected);
    }

    #[test]
    fn pa_examples() {
        let sym = Mat3::new(1.0, 2.0, 3.0, 2.0, 5.0, 6.0, 3.0, 6.0, 9.0);
        assert_eq!(pa(&sym), Mat3::zeros());
        let anti = skew(&Vec3::new(0.3, -1.0, 2.0));
        assert_eq!(pa(&anti), anti);
        let m = Mat3::new(0.0, -1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let expected = Mat3::new(0.0, -1.5, 0.0, 1.5, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(pa(&m), expected);
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist_so3(&RotationMatrix::identity()), 0.0);
        let axis = Vec3::new(1.0, -2.0, 0.5).normalize();
        assert_relative_eq!(dist_so3(&so3_exp(&(axis * PI))), 1.0, epsilon = 1e-15);
        let quarter = RotationMatrix::new(rot_z(FRAC_PI_2)).unwrap();
        assert_relative_eq!(dist_so3(&quarter), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn exp_examples() {
        assert_eq!(*so3_exp(&Vec3::zeros()).matrix(), Mat3::identity());
        let r = so3_exp(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        assert_relative_eq!(*r.matrix(), rot_z(FRAC_PI_2), epsilon = 1e-15);
    }

    #[test]
    fn exp_series_branch_is_accurate() {
        // just below and above the switch-over
        for &scale in &[0.9 * EXP_SERIES_THRESHOLD, 1.1 * EXP_SERIES_THRESHOLD, 1e-5] {
            let phi = Vec3::new(0.3, -0.5, 0.8).normalize() * scale;
            let r = so3_exp(&phi);
            let exact = {
                let t = phi.norm();
                let k = skew(&(phi / t));
                Mat3::identity() + k * t.sin() + k * k * (1.0 - t.cos())
            };
            assert_relative_eq!(*r.matrix(), exact, epsilon = 1e-15);
            assert!(r.orthogonality_defect() < 1e-15);
        }
    }

    #[test]
    fn rodriguez_examples() {
        assert_eq!(*rodriguez_map(&Vec3::zeros()).matrix(), Mat3::identity());
        let rho = Vec3::new(0.6, 0.0, 0.8);
        assert_relative_eq!(dist_so3(&rodriguez_map(&rho)), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn pose_examples() {
        let a = Pose::new(so3_exp(&Vec3::new(0.2, -1.1, 0.4)), Vec3::new(1.0, -2.0, 3.0));
        let id = a.compose(&a.inverse());
        assert_relative_eq!(id.to_homogeneous(), Mat4::identity(), epsilon = 1e-14);
        assert_eq!(Pose::identity().compose(&a), a);
        // T̃ = T̂ T⁻¹ at T̂ = T
        let err = a.compose(&a.inverse());
        assert_relative_eq!(*err.r.matrix(), Mat3::identity(), epsilon = 1e-14);
        assert!(err.p.norm() < 1e-14);
        let inv = a.inverse();
        assert_eq!(*inv.r.matrix(), a.r.matrix().transpose());
        assert_relative_eq!(inv.p, -(a.r.matrix().transpose() * a.p), epsilon = 1e-15);
    }

    #[test]
    fn homogeneous_round_trip_and_validation() {
        let a = Pose::new(so3_exp(&Vec3::new(0.5, 0.1, -0.7)), Vec3::new(-4.0, 5.0, 3.0));
        let t = a.to_homogeneous();
        assert_eq!(t.row(3), nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0));
        assert_eq!(Pose::from_homogeneous(&t).unwrap(), a);
        let mut bad = t;
        bad[(3, 0)] = 1.0;
        assert!(Pose::from_homogeneous(&bad).is_err());
        let mut skewed = t;
        skewed[(0, 0)] += 1e-3;
        assert!(matches!(
            Pose::from_homogeneous(&skewed),
            Err(Error::NotRotation { .. })
        ));
    }

    #[test]
    fn euler_examples() {
        assert_eq!(euler_zyx(&RotationMatrix::identity()), Vec3::zeros());
        let e = euler_zyx(&RotationMatrix::new(rot_z(FRAC_PI_2)).unwrap());
        assert_relative_eq!(e, Vec3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-15);
    }

    #[test]
    fn euler_gimbal_lock_pins_yaw() {
        for &pitch in &[FRAC_PI_2, -FRAC_PI_2] {
            let r = RotationMatrix::new(rot_z(0.4) * rot_y(pitch) * rot_x(0.1)).unwrap();
            let e = euler_zyx(&r);
            assert_eq!(e.z, 0.0);
            assert_relative_eq!(e.y, pitch, epsilon = 1e-7);
            // reported angles rebuild the same rotation
            let rebuilt = rot_z(e.z) * rot_y(e.y) * rot_x(e.x);
            assert_relative_eq!(rebuilt, *r.matrix(), epsilon = 1e-7);
        }
    }

    #[test]
    fn project_repairs_drift_and_keeps_handedness() {
        let r = so3_exp(&Vec3::new(0.3, 0.2, -0.1));
        let drifted = r.matrix() + Mat3::from_element(1e-7);
        assert!(RotationMatrix::new(drifted).is_err());
        let fixed = RotationMatrix::project(drifted).unwrap();
        assert!(fixed.orthogonality_defect() < 1e-14);
        assert_relative_eq!(fixed.matrix().determinant(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(*fixed.matrix(), *r.matrix(), epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn skew_is_cross_product(b in vec3(), w in vec3()) {
            let s = skew(&b);
            prop_assert_eq!(s + s.transpose(), Mat3::zeros());
            prop_assert!((s * w - b.cross(&w)).norm() < 1e-14);
            prop_assert_eq!(vex(&s).unwrap(), b);
        }

        #[test]
        fn wedge_bottom_row_is_zero(w in vec3(), v in vec3()) {
            let m = wedge(&Twist::new(w, v));
            prop_assert_eq!(m.row(3).into_owned(), nalgebra::RowVector4::zeros());
        }

        #[test]
        fn exp_is_rotation_with_inverse(phi in vec3()) {
            let r = so3_exp(&phi);
            prop_assert!(RotationMatrix::new(*r.matrix()).is_ok());
            let id = r * so3_exp(&(-phi));
            prop_assert!((id.matrix() - Mat3::identity()).norm() < 1e-14);
            let d = dist_so3(&r);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&d));
        }

        #[test]
        fn rodriguez_identities(rho in vec3()) {
            let n2 = rho.norm_squared();
            let r = rodriguez_map(&rho);
            prop_assert!(RotationMatrix::new(*r.matrix()).is_ok());
            let d = dist_so3(&r);
            prop_assert!((d - n2 / (1.0 + n2)).abs() < 1e-14);
            prop_assert!((pa(r.matrix()) - skew(&rho) * (2.0 / (1.0 + n2))).norm() < 1e-14);
            let v = vex_pa(r.matrix());
            prop_assert!((v - rho * (2.0 / (1.0 + n2))).norm() < 1e-14);
            let lhs = (1.0 - d) * d;
            prop_assert!((lhs - n2 / (1.0 + n2).powi(2)).abs() < 1e-14);
            prop_assert!((v.norm_squared() - 4.0 * n2 / (1.0 + n2).powi(2)).abs() < 1e-14);
        }

        #[test]
        fn group_axioms(a in vec3(), pa_ in vec3(), b in vec3(), pb in vec3(), c in vec3(), pc in vec3()) {
            let x = Pose::new(so3_exp(&a), pa_);
            let y = Pose::new(so3_exp(&b), pb);
            let z = Pose::new(so3_exp(&c), pc);
            let lhs = x.compose(&y).compose(&z).to_homogeneous();
            let rhs = x.compose(&y.compose(&z)).to_homogeneous();
            prop_assert!((lhs - rhs).norm() < 1e-12);
            prop_assert!((x.compose(&y).to_homogeneous() - x.to_homogeneous() * y.to_homogeneous()).norm() < 1e-12);
            prop_assert!((x.inverse().to_homogeneous() - x.to_homogeneous().try_inverse().unwrap()).norm() < 1e-12);
            prop_assert!((x.inverse().compose(&x).to_homogeneous() - Mat4::identity()).norm() < 1e-12);
        }

        #[test]
        fn euler_round_trip(roll in -3.1f64..3.1, pitch in -1.55f64..1.55, yaw in -3.1f64..3.1) {
            let r = RotationMatrix::new(rot_z(yaw) * rot_y(pitch) * rot_x(roll)).unwrap();
            let e = euler_zyx(&r);
            prop_assert!((e - Vec3::new(roll, pitch, yaw)).norm() < 1e-9);
        }
    }

    #[test]
    fn trace_identity_holds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = Mat3::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let beta = Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let lhs = (a * skew(&beta)).trace();
            let rhs = -2.0 * vex_pa(&a).dot(&beta);
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + a.norm() * beta.norm()));
        }
    }

    #[test]
    fn distance_identity_holds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let phi = Vec3::from_fn(|_, _| rng.random_range(-4.0..4.0));
            let r = so3_exp(&phi);
            let d = dist_so3(&r);
            let lhs = vex_pa(r.matrix()).norm_squared();
            assert!((lhs - 4.0 * (1.0 - d) * d).abs() <= 1e-10);
        }
    }
}
