//! Pinhole camera model and the heading/pitch/roll pose convention.
//!
//! World frame: east-north-up. Camera frame: x right, y down, z along the
//! optical axis. A pose with all angles zero looks due north along the
//! horizon. Heading turns clockwise seen from above, pitch then tilts the
//! optical axis below the horizon, roll finally spins about the optical axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::LocalPoint;
use crate::math::{Mat3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel<T> {
    pub width: u32,
    pub height: u32,
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    #[serde(default)]
    pub k1: T,
    #[serde(default)]
    pub k2: T,
}

impl<T: Real> CameraModel<T> {
    /// Square-pixel camera with the principal point at the image centre.
    pub fn from_fov(width: u32, height: u32, hfov: T) -> Result<Self> {
        if !(hfov > T::zero() && hfov < T::PI()) {
            return Err(Error::invalid("horizontal FOV must lie in (0, π)"));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("camera dimensions must be non-zero"));
        }
        let w = T::lit(width as f64);
        let h = T::lit(height as f64);
        let f = (w * T::lit(0.5)) / (hfov * T::lit(0.5)).tan();
        Ok(Self {
            width,
            height,
            fx: f,
            fy: f,
            cx: w * T::lit(0.5),
            cy: h * T::lit(0.5),
            k1: T::zero(),
            k2: T::zero(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let w = T::lit(self.width as f64);
        let h = T::lit(self.height as f64);
        let ok = self.fx > T::zero()
            && self.fy > T::zero()
            && self.cx > T::zero()
            && self.cx < w
            && self.cy > T::zero()
            && self.cy < h
            && self.k1.is_finite()
            && self.k2.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "invalid camera intrinsics {self:?}"
            )))
        }
    }

    pub fn hfov(&self) -> T {
        T::lit(2.0) * (T::lit(self.width as f64) * T::lit(0.5) / self.fx).atan()
    }

    pub fn vfov(&self) -> T {
        T::lit(2.0) * (T::lit(self.height as f64) * T::lit(0.5) / self.fy).atan()
    }

    /// Ideal pinhole projection of a camera-frame point; `None` behind the camera.
    #[inline]
    pub fn project(&self, p: &Vec3<T>) -> Option<(T, T)> {
        if p.z <= T::zero() {
            return None;
        }
        let inv = T::one() / p.z;
        Some((self.fx * p.x * inv + self.cx, self.fy * p.y * inv + self.cy))
    }

    /// `K⁻¹ · (u, v, 1)`: the camera-frame ray through a pixel with unit Z.
    #[inline]
    pub fn unproject(&self, u: T, v: T) -> Vec3<T> {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, T::one())
    }

    /// The same optics resampled to another resolution.
    pub fn scaled_to(&self, width: u32, height: u32) -> Self {
        let sx = T::lit(width as f64 / self.width as f64);
        let sy = T::lit(height as f64 / self.height as f64);
        Self {
            width,
            height,
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            k1: self.k1,
            k2: self.k2,
        }
    }

    pub fn cast<U: Real>(&self) -> CameraModel<U> {
        CameraModel {
            width: self.width,
            height: self.height,
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            k1: U::lit(self.k1.as_f64()),
            k2: U::lit(self.k2.as_f64()),
        }
    }
}

/// Camera position plus heading/pitch/roll in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSE3<T> {
    pub position: LocalPoint<T>,
    pub heading: T,
    pub pitch: T,
    pub roll: T,
}

impl<T: Real> PoseSE3<T> {
    pub fn new(position: LocalPoint<T>, heading: T, pitch: T, roll: T) -> Self {
        Self {
            position,
            heading,
            pitch,
            roll,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.heading.is_finite()
            && self.pitch.is_finite()
            && self.roll.is_finite()
    }

    /// Camera-to-world rotation; columns are the camera axes in world coordinates.
    pub fn camera_to_world_rotation(&self) -> Mat3<T> {
        let (sh, ch) = self.heading.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sr, cr) = self.roll.sin_cos();
        let forward = Vec3::new(sh * cp, ch * cp, -sp);
        let right0 = Vec3::new(ch, -sh, T::zero());
        let down0 = forward.cross(&right0);
        let right = right0 * cr + down0 * sr;
        let down = down0 * cr - right0 * sr;
        Mat3::from_cols(right, down, forward)
    }

    pub fn world_to_camera_rotation(&self) -> Mat3<T> {
        self.camera_to_world_rotation().transpose()
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Vec3<T>) -> Vec3<T> {
        self.world_to_camera_rotation() * (*p - self.position.to_vec())
    }

    #[inline]
    pub fn camera_to_world(&self, p: &Vec3<T>) -> Vec3<T> {
        self.camera_to_world_rotation() * *p + self.position.to_vec()
    }

    pub fn extrinsics(&self) -> Extrinsics<T> {
        let rotation = self.world_to_camera_rotation();
        let translation = -(rotation * self.position.to_vec());
        Extrinsics {
            rotation,
            translation,
        }
    }

    /// Recovers heading/pitch/roll from a camera-to-world rotation.
    ///
    /// When the optical axis is vertical the heading is folded into the
    /// reported heading and roll is zero.
    pub fn from_camera_to_world(rotation: &Mat3<T>, position: LocalPoint<T>) -> Self {
        let right = rotation.col(0);
        let forward = rotation.col(2);
        let pitch = (-forward.z).max(-T::one()).min(T::one()).asin();
        let horizontal = forward.x.hypot(forward.y);
        let (heading, roll) = if horizontal > T::lit(1e-9) {
            let heading = forward.x.atan2(forward.y);
            let (sh, ch) = heading.sin_cos();
            let right0 = Vec3::new(ch, -sh, T::zero());
            let down0 = forward.cross(&right0);
            let roll = right.dot(&down0).atan2(right.dot(&right0));
            (heading, roll)
        } else {
            // Nadir or zenith: right = (cos ψ, -sin ψ, 0) with roll fixed at zero.
            ((-right.y).atan2(right.x), T::zero())
        };
        Self {
            position,
            heading: wrap_two_pi(heading),
            pitch,
            roll,
        }
    }

    pub fn cast<U: Real>(&self) -> PoseSE3<U> {
        PoseSE3 {
            position: LocalPoint::from_vec(self.position.to_vec().cast()),
            heading: U::lit(self.heading.as_f64()),
            pitch: U::lit(self.pitch.as_f64()),
            roll: U::lit(self.roll.as_f64()),
        }
    }
}

/// World-to-camera rigid transform: `p_cam = rotation · p_world + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Extrinsics<T> {
    #[inline]
    pub fn transform(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation * *p + self.translation
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vec3<T> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_pose(&self) -> PoseSE3<T> {
        PoseSE3::from_camera_to_world(
            &self.rotation.transpose(),
            LocalPoint::from_vec(self.center()),
        )
    }

    /// Left-multiplied SE(3) increment `exp([ω, v]) · self` with a first-order
    /// translation update, matching the reprojection Jacobian.
    pub fn perturbed(&self, delta: &[T; 6]) -> Self {
        let omega = Vec3::new(delta[0], delta[1], delta[2]);
        let v = Vec3::new(delta[3], delta[4], delta[5]);
        let r = Mat3::exp_so3(omega);
        Self {
            rotation: r * self.rotation,
            translation: r * self.translation + v,
        }
    }

    /// Angle of the relative rotation between two extrinsics.
    pub fn rotation_angle_to(&self, other: &Self) -> T {
        (self.rotation * other.rotation.transpose())
            .log_so3()
            .norm()
    }
}

pub(crate) fn wrap_two_pi<T: Real>(a: T) -> T {
    let tau = T::TAU();
    let w = a % tau;
    let w = if w < T::zero() { w + tau } else { w };
    if w >= tau {
        T::zero()
    } else {
        w
    }
}
