use rand::Rng as _;

use super::model::{Gradient, VectorField, VectorFieldModel};
use super::path::interpolate;
use crate::error::{check_dim, Error, Result};
use crate::seed;

/// One regression point of the flow-matching objective with its draws fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct FmPoint {
    pub z1: Vec<f64>,
    pub cond: Vec<f64>,
    pub z0: Vec<f64>,
    pub t: f64,
}

impl FmPoint {
    pub fn z_t(&self) -> Vec<f64> {
        interpolate(&self.z1, &self.z0, self.t)
    }

    pub fn target(&self) -> Vec<f64> {
        self.z1.iter().zip(&self.z0).map(|(a, b)| a - b).collect()
    }
}

/// Draws `t ~ U(0,1)` and `z0 ~ N(0, I)` for each item, in item order.
pub fn draw_fm_points(batch: &[(Vec<f64>, Vec<f64>)], rng_seed: u64) -> Result<Vec<FmPoint>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut rng = seed::rng(rng_seed);
    Ok(batch
        .iter()
        .map(|(z1, cond)| {
            let t: f64 = rng.random();
            let z0 = seed::standard_normal_vec(&mut rng, z1.len());
            FmPoint {
                z1: z1.clone(),
                cond: cond.clone(),
                z0,
                t,
            }
        })
        .collect())
}

pub(crate) fn squared_residual(field: &impl VectorField, p: &FmPoint) -> Result<f64> {
    check_dim(field.sample_dim(), p.z1.len())?;
    check_dim(field.sample_dim(), p.z0.len())?;
    check_dim(field.cond_dim(), p.cond.len())?;
    let u = field.velocity(&p.z_t(), &p.cond, p.t);
    Ok(u.iter()
        .zip(p.z1.iter().zip(&p.z0))
        .map(|(u, (a, b))| {
            let r = u - (a - b);
            r * r
        })
        .sum())
}

/// Mean of `‖u_t(z_t) − v_t‖²` over fixed regression points.
pub fn fm_loss_on(field: &impl VectorField, points: &[FmPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for p in points {
        total += squared_residual(field, p)?;
    }
    Ok(total / points.len() as f64)
}

/// Flow-matching loss with `(t, z0)` drawn from `rng_seed`.
pub fn fm_loss(
    field: &impl VectorField,
    batch: &[(Vec<f64>, Vec<f64>)],
    rng_seed: u64,
) -> Result<f64> {
    fm_loss_on(field, &draw_fm_points(batch, rng_seed)?)
}

/// Accumulates `scale · ∇θ ‖u − v‖²` for one point; returns the residual norm².
pub(crate) fn accumulate_point_grad(
    model: &VectorFieldModel,
    p: &FmPoint,
    scale: f64,
    grad: &mut Gradient,
) -> Result<f64> {
    check_dim(p.z1.len(), p.z0.len())?;
    let trace = model.forward_trace(&p.z_t(), &p.cond, p.t)?;
    let mut sq = 0.0;
    let d_out: Vec<f64> = trace
        .output()
        .iter()
        .zip(p.z1.iter().zip(&p.z0))
        .map(|(u, (a, b))| {
            let r = u - (a - b);
            sq += r * r;
            2.0 * scale * r
        })
        .collect();
    model.backward(&trace, &d_out, grad);
    Ok(sq)
}

pub fn fm_loss_grad_on(model: &VectorFieldModel, points: &[FmPoint]) -> Result<Gradient> {
    if points.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut grad = model.zero_gradient();
    let scale = 1.0 / points.len() as f64;
    for p in points {
        accumulate_point_grad(model, p, scale, &mut grad)?;
    }
    Ok(grad)
}

/// Gradient of [`fm_loss`] with respect to every model parameter.
pub fn fm_loss_grad(
    model: &VectorFieldModel,
    batch: &[(Vec<f64>, Vec<f64>)],
    rng_seed: u64,
) -> Result<Gradient> {
    fm_loss_grad_on(model, &draw_fm_points(batch, rng_seed)?)
}
