//! Constant-velocity Kalman filter over `[cx, cy, w, h, vx, vy, vw, vh]`.
//!
//! One predict step spans one half of the detection interval in low-frequency
//! mode and one source frame in full-frequency mode. Velocities are therefore
//! expressed in pixels per step. Besides the usual position/size observation the
//! filter accepts a six-component observation that also carries a measured
//! centre displacement `(vx, vy)` from visual tracking.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::model::BBox;

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
pub type Observation6 = SVector<f64, 6>;
pub type Observation4 = SVector<f64, 4>;

/// Smallest width/height the filter will ever report.
pub const MIN_SIDE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    pub fn new(mean: StateVector, covariance: StateCovariance) -> Self {
        KalmanState { mean, covariance }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }

    pub fn size(&self) -> (f64, f64) {
        (self.mean[2].max(MIN_SIDE), self.mean[3].max(MIN_SIDE))
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[4], self.mean[5])
    }

    pub fn bbox(&self) -> BBox {
        let (w, h) = self.size();
        // Sides are clamped and centres stay finite, so this cannot fail.
        BBox::from_center(self.mean[0], self.mean[1], w, h)
            .expect("kalman state holds a finite centre and clamped size")
    }

    fn height(&self) -> f64 {
        self.mean[3].max(MIN_SIDE)
    }
}

/// How process and observation noise are derived.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Standard deviations proportional to the current box height.
    HeightScaled {
        /// Process std for position and size, per unit height.
        position: f64,
        /// Process std for the four velocity components, per unit height.
        velocity: f64,
        /// Observation std for position and size, per unit height.
        observed_position: f64,
        /// Observation std for the measured displacement, per unit height.
        observed_velocity: f64,
    },
    /// Constant matrices; used for controlled experiments.
    Fixed {
        process: StateCovariance,
        observation: SMatrix<f64, 6, 6>,
    },
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::HeightScaled {
            position: 1.0 / 20.0,
            velocity: 1.0 / 160.0,
            observed_position: 1.0 / 20.0,
            observed_velocity: 1.0 / 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanModel {
    pub transition: StateCovariance,
    pub observe6: SMatrix<f64, 6, 8>,
    pub observe4: SMatrix<f64, 4, 8>,
    pub noise: NoiseModel,
    /// Velocity prior variance as a multiple of the position variance.
    pub velocity_prior_scale: f64,
}

impl Default for KalmanModel {
    fn default() -> Self {
        KalmanModel::new(NoiseModel::default())
    }
}

impl KalmanModel {
    pub fn new(noise: NoiseModel) -> Self {
        let mut transition = StateCovariance::identity();
        for i in 0..4 {
            transition[(i, i + 4)] = 1.0;
        }
        let mut observe6 = SMatrix::<f64, 6, 8>::zeros();
        for i in 0..6 {
            observe6[(i, i)] = 1.0;
        }
        let mut observe4 = SMatrix::<f64, 4, 8>::zeros();
        for i in 0..4 {
            observe4[(i, i)] = 1.0;
        }
        KalmanModel { transition, observe6, observe4, noise, velocity_prior_scale: 1000.0 }
    }

    pub fn process_noise(&self, height: f64) -> StateCovariance {
        match &self.noise {
            NoiseModel::HeightScaled { position, velocity, .. } => {
                let p = (position * height).powi(2);
                let v = (velocity * height).powi(2);
                StateCovariance::from_diagonal(&StateVector::from([p, p, p, p, v, v, v, v]))
            }
            NoiseModel::Fixed { process, .. } => *process,
        }
    }

    pub fn observation_noise6(&self, height: f64) -> SMatrix<f64, 6, 6> {
        match &self.noise {
            NoiseModel::HeightScaled { observed_position, observed_velocity, .. } => {
                let p = (observed_position * height).powi(2);
                let v = (observed_velocity * height).powi(2);
                SMatrix::<f64, 6, 6>::from_diagonal(&SVector::<f64, 6>::from([p, p, p, p, v, v]))
            }
            NoiseModel::Fixed { observation, .. } => *observation,
        }
    }

    pub fn observation_noise4(&self, height: f64) -> SMatrix<f64, 4, 4> {
        self.observation_noise6(height).fixed_view::<4, 4>(0, 0).into_owned()
    }

    /// Fresh state at a detection: zero velocity, wide velocity prior.
    pub fn initiate(&self, bbox: &BBox) -> KalmanState {
        let (cx, cy) = bbox.center();
        let mean = StateVector::from([cx, cy, bbox.w, bbox.h, 0.0, 0.0, 0.0, 0.0]);
        let r = self.observation_noise4(bbox.h.max(MIN_SIDE));
        let mut cov = StateCovariance::zeros();
        for i in 0..4 {
            cov[(i, i)] = r[(i, i)];
            cov[(i + 4, i + 4)] = self.velocity_prior_scale * r[(i, i)];
        }
        KalmanState { mean, covariance: cov }
    }

    pub fn predict(&self, state: &KalmanState) -> KalmanState {
        let q = self.process_noise(state.height());
        let mean = self.transition * state.mean;
        let cov = self.transition * state.covariance * self.transition.transpose() + q;
        KalmanState { mean, covariance: symmetrize(cov) }
    }

    /// Predict after replacing the centre velocity with `velocity`.
    pub fn predict_with_velocity(&self, state: &KalmanState, velocity: (f64, f64)) -> KalmanState {
        let mut seeded = state.clone();
        seeded.mean[4] = velocity.0;
        seeded.mean[5] = velocity.1;
        self.predict(&seeded)
    }

    /// Update with `[cx, cy, w, h, vx, vy]`.
    pub fn update6(&self, state: &KalmanState, z: &Observation6) -> Result<KalmanState> {
        let r = self.observation_noise6(state.height());
        update(state, &self.observe6, &r, z)
    }

    /// Update with `[cx, cy, w, h]`.
    pub fn update4(&self, state: &KalmanState, z: &Observation4) -> Result<KalmanState> {
        let r = self.observation_noise4(state.height());
        update(state, &self.observe4, &r, z)
    }

    /// Squared Mahalanobis distance of a centre under the filter's own
    /// projected uncertainty `H P Hᵀ + R` (position rows only).
    pub fn center_mahalanobis_sq(&self, state: &KalmanState, point: (f64, f64)) -> Result<f64> {
        let r = self.observation_noise4(state.height());
        let s = state.covariance.fixed_view::<2, 2>(0, 0) + r.fixed_view::<2, 2>(0, 0);
        let d = nalgebra::Vector2::new(point.0 - state.mean[0], point.1 - state.mean[1]);
        let chol = s.cholesky().ok_or(Error::SingularInnovation)?;
        let solved = chol.solve(&d);
        Ok(d.dot(&solved))
    }
}

pub fn observation4(bbox: &BBox) -> Observation4 {
    let (cx, cy) = bbox.center();
    Observation4::from([cx, cy, bbox.w, bbox.h])
}

pub fn observation6(bbox: &BBox, velocity: (f64, f64)) -> Observation6 {
    let (cx, cy) = bbox.center();
    Observation6::from([cx, cy, bbox.w, bbox.h, velocity.0, velocity.1])
}

fn update<const M: usize>(
    state: &KalmanState,
    observe: &SMatrix<f64, M, 8>,
    noise: &SMatrix<f64, M, M>,
    z: &SVector<f64, M>,
) -> Result<KalmanState> {
    let p = &state.covariance;
    let innovation_cov = symmetrize(observe * p * observe.transpose() + noise);
    let chol = innovation_cov.cholesky().ok_or(Error::SingularInnovation)?;
    // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ since S and P are symmetric.
    let gain = chol.solve(&(observe * p)).transpose();
    let innovation = z - observe * state.mean;
    let mut mean = state.mean + gain * innovation;
    mean[2] = mean[2].max(MIN_SIDE);
    mean[3] = mean[3].max(MIN_SIDE);

    // Joseph form keeps the posterior positive semi-definite.
    let i_kh = StateCovariance::identity() - gain * observe;
    let cov = i_kh * p * i_kh.transpose() + gain * noise * gain.transpose();
    Ok(KalmanState { mean, covariance: symmetrize(cov) })
}

fn symmetrize<const N: usize>(m: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}
