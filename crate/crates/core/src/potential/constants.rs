//! Calibrated constants (version 1).
//!
//! `EVER_HIT_C*` come from [`super::bounds::calibrate_ever_hit_constant`]
//! with safety factor 1.25, on the Euclidean ball of radius 30 (d = 3) and
//! 12 (d = 4).

pub const CONSTANTS_VERSION: u32 = 1;

pub const EVER_HIT_C3: f64 = 0.726346;

pub const EVER_HIT_C4: f64 = 0.727714;

pub const CALIBRATION_SAFETY: f64 = 1.25;

pub const CALIBRATION_RADIUS_D3: f64 = 30.0;

pub const CALIBRATION_RADIUS_D4: f64 = 12.0;
