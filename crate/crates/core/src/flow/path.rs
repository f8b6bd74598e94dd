use crate::error::{check_dim, Error, Result};

/// One point on the straight-line probability path between noise and data.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub z_t: Vec<f64>,
    /// Target field `z1 − z0`, independent of `t`.
    pub v_t: Vec<f64>,
    pub t: f64,
    pub z0: Vec<f64>,
    pub z1: Vec<f64>,
}

/// `z_t = t·z1 + (1−t)·z0`, `v_t = z1 − z0`.
pub fn sample_path(z1: &[f64], z0: &[f64], t: f64) -> Result<PathPoint> {
    check_dim(z1.len(), z0.len())?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
    }
    let z_t = interpolate(z1, z0, t);
    let v_t = z1.iter().zip(z0).map(|(a, b)| a - b).collect();
    Ok(PathPoint {
        z_t,
        v_t,
        t,
        z0: z0.to_vec(),
        z1: z1.to_vec(),
    })
}

/// Exact at the endpoints: `t = 0` yields `z0`, `t = 1` yields `z1`.
pub(crate) fn interpolate(z1: &[f64], z0: &[f64], t: f64) -> Vec<f64> {
    if t == 0.0 {
        return z0.to_vec();
    }
    if t == 1.0 {
        return z1.to_vec();
    }
    z1.iter().zip(z0).map(|(a, b)| t * a + (1.0 - t) * b).collect()
}
