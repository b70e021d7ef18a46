//! Component models: longitudinal dynamics, motor, battery, mass and
//! performance requirements.

pub mod battery;
pub mod dynamics;
pub mod mass;
pub mod motor;
pub mod params;
pub mod requirements;
