//! Rigid-body math and the relative-pose conventions used across the crate.
//!
//! Poses map world coordinates into the camera frame: `x_cam = R x_world + t`.
//! The relative pose from a reference `i` to a query `q` is `T_q * T_i^-1`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3, Vector4};

use crate::error::{Error, Result};

/// Unit quaternion stored with `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes and canonicalizes `(w, x, y, z)`.
    ///
    /// Panics if the input has zero or non-finite norm; use [`Quaternion::try_new`]
    /// for untrusted input.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self::try_new(w, x, y, z).expect("quaternion must have finite, non-zero norm")
    }

    pub fn try_new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalized"
            )));
        }
        Ok(Self::canonical(w / n, x / n, y / n, z / n))
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else {
            // w == 0: make the first non-zero vector component positive
            [x, y, z]
                .into_iter()
                .find(|v| *v != 0.0)
                .is_some_and(|v| v < 0.0)
        };
        if flip {
            Quaternion {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            Quaternion { w, x, y, z }
        }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Result<Self> {
        Self::try_new(v[0], v[1], v[2], v[3])
    }

    /// Components as `(w, x, y, z)`.
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::new(c, s * a.x, s * a.y, s * a.z)
    }

    /// Rotation vector (axis times angle in radians).
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let uq = UnitQuaternion::from_matrix(m);
        let q = uq.quaternion();
        Self::new(q.w, q.i, q.j, q.k)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let Quaternion { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Inverse rotation.
    pub fn conjugate(&self) -> Self {
        Self::canonical(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// `other` or `-other`, whichever lies in the same hemisphere as `self`.
    /// The result is a raw 4-vector since it may violate `w >= 0`.
    pub fn aligned(&self, other: &Quaternion) -> Vector4<f64> {
        let v = other.to_vector();
        if self.dot(other) < 0.0 {
            -v
        } else {
            v
        }
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let uv = u.cross(v);
        v + 2.0 * (self.w * uv + u.cross(&uv))
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product; `(a * b).rotate(v) == a.rotate(&b.rotate(v))`.
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Quaternion,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Quaternion, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Quaternion::IDENTITY, Vector3::zeros())
    }

    /// Pose with the given world-to-camera rotation whose camera center is `center`.
    pub fn from_center(rotation: Quaternion, center: &Vector3<f64>) -> Self {
        Self::new(rotation, -rotation.rotate(center))
    }

    /// Maps a world point into the camera frame.
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.conjugate();
        Pose::new(r_inv, -r_inv.rotate(&self.translation))
    }

    pub fn camera_center(&self) -> Vector3<f64> {
        camera_center(self)
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation.to_rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.to_vector().iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        compose(&self, &rhs)
    }
}

/// `a * b`: applies `b` first, then `a`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::new(
        a.rotation * b.rotation,
        a.rotation.rotate(&b.translation) + a.translation,
    )
}

/// Camera center in world coordinates, `-R^T t`.
pub fn camera_center(p: &Pose) -> Vector3<f64> {
    -p.rotation.conjugate().rotate(&p.translation)
}

/// `T_{i->q} = T_q * T_i^-1`, so that `compose(relative, reference) == query`.
pub fn relative_pose(reference: &Pose, query: &Pose) -> Pose {
    compose(query, &reference.inverse())
}

/// Regression output for one reference/query pair, expressed as the inverse
/// relative pose: `direction` points from the reference camera toward the query
/// camera (reference frame) and `rotation` is `R_{i->q}^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePoseEstimate {
    pub direction: Vector3<f64>,
    pub rotation: Quaternion,
    /// Predicted baseline length in meters.
    pub scale: f64,
    /// Spread of the predicted query center, meters squared.
    pub uncertainty: f64,
}

impl RelativePoseEstimate {
    pub fn new(direction: Vector3<f64>, rotation: Quaternion, scale: f64, uncertainty: f64) -> Self {
        Self {
            direction: direction.normalize(),
            rotation,
            scale,
            uncertainty,
        }
    }

    /// Query camera center relative to the reference center, in the reference frame.
    pub fn offset(&self) -> Vector3<f64> {
        self.direction * self.scale
    }

    pub fn is_valid(&self) -> bool {
        (self.direction.norm() - 1.0).abs() < 1e-9
            && self.scale >= 0.0
            && self.uncertainty >= 0.0
            && self.scale.is_finite()
    }
}

impl From<PoseTargets> for RelativePoseEstimate {
    fn from(t: PoseTargets) -> Self {
        Self {
            direction: t.direction,
            rotation: t.rotation,
            scale: t.scale,
            uncertainty: 0.0,
        }
    }
}

/// Ground-truth regression targets for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseTargets {
    pub direction: Vector3<f64>,
    pub rotation: Quaternion,
    pub scale: f64,
}

const MIN_BASELINE: f64 = 1e-12;

/// Inverse relative pose targets: `-R^T t_hat`, `R^T` and `|t|`.
pub fn ground_truth_targets(rel: &Pose) -> Result<PoseTargets> {
    let scale = rel.translation.norm();
    if scale <= MIN_BASELINE {
        return Err(Error::DegenerateBaseline);
    }
    let rt = rel.rotation.conjugate();
    let direction = -rt.rotate(&(rel.translation / scale));
    Ok(PoseTargets {
        direction: direction.normalize(),
        rotation: rt,
        scale,
    })
}

/// L1 pose loss split into its weighted terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseLossTerms {
    pub translation_term: f64,
    pub rotation_term: f64,
    pub scale_term: f64,
    pub mu: f64,
    pub beta: f64,
}

impl PoseLossTerms {
    pub fn total(&self) -> f64 {
        self.translation_term + self.mu * self.rotation_term + self.beta * self.scale_term
    }
}

pub const DEFAULT_MU: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 1.0;

pub fn pose_loss(
    pred: &RelativePoseEstimate,
    target: &PoseTargets,
    mu: f64,
    beta: f64,
) -> PoseLossTerms {
    let translation_term = (pred.direction - target.direction).abs().sum();
    let target_q = pred.rotation.aligned(&target.rotation);
    let rotation_term = (pred.rotation.to_vector() - target_q).abs().sum();
    PoseLossTerms {
        translation_term,
        rotation_term,
        scale_term: (pred.scale - target.scale).abs(),
        mu,
        beta,
    }
}

/// Geodesic midpoint of two rotations.
pub fn average_rotation(a: &Quaternion, b: &Quaternion) -> Result<Quaternion> {
    if a.dot(b).abs() < 1e-9 {
        return Err(Error::AntipodalPair);
    }
    Quaternion::from_vector(&(a.to_vector() + a.aligned(b)))
}

/// Geodesic angle between two rotations in degrees, in `[0, 180]`.
pub fn rotation_angle(a: &Quaternion, b: &Quaternion) -> f64 {
    // atan2 form keeps full precision near zero where acos does not
    let d = a.conjugate() * *b;
    let v = (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
    (2.0 * v.atan2(d.w.abs())).to_degrees()
}
