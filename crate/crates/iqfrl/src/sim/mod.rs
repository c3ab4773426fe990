//! 2D segment-world robot simulator: lidar ray casting, unicycle kinematics,
//! a scripted wall-following supervisor for dataset generation, and the
//! benchmark protocol (laps, blockades, indicators, quality).

pub mod benchmark;
pub mod env;
pub mod kinematics;
pub mod raycast;
pub mod supervisor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("robot embedded in wall at ({x}, {y})")]
    EmbeddedInWall { x: f64, y: f64 },
    #[error("laser beam count {laser} does not match the beam universe ({universe})")]
    BeamMismatch { laser: usize, universe: usize },
    #[error("environment offers no poses for situation {situation} after {attempts} attempts")]
    SituationUnavailable { situation: u32, attempts: usize },
    #[error("environment has no segments")]
    EmptyEnvironment,
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}
