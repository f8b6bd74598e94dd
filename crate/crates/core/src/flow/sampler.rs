use super::model::VectorField;
use super::sample::SequenceSample;
use crate::error::{check_dim, Error, Result};
use crate::seed;

pub const DEFAULT_EULER_STEPS: usize = 64;

/// Integrates `dz/dt = u_t(z)` from `z0 ~ N(0, I)` (drawn from `seed`) to `t = 1`
/// with `steps` fixed Euler steps; returns the flat final state.
pub fn euler_sample_flat(
    field: &impl VectorField,
    cond: &[f64],
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("euler steps must be ≥ 1".into()));
    }
    check_dim(field.cond_dim(), cond.len())?;
    let mut rng = seed::rng(seed);
    let mut z = seed::standard_normal_vec(&mut rng, field.sample_dim());
    let dt = 1.0 / steps as f64;
    for i in 0..steps {
        let t = i as f64 / steps as f64;
        let u = field.velocity(&z, cond, t);
        for (zi, ui) in z.iter_mut().zip(&u) {
            *zi += dt * ui;
        }
    }
    Ok(z)
}

/// Euler sampling reshaped into a `frames × dim` sample.
pub fn euler_sample(
    field: &impl VectorField,
    cond: &[f64],
    steps: usize,
    seed: u64,
    frames: usize,
    prompt_id: &str,
    sample_index: usize,
) -> Result<SequenceSample> {
    if frames == 0 || !field.sample_dim().is_multiple_of(frames) {
        return Err(Error::InvalidArgument(format!(
            "sample dim {} is not divisible into {} frames",
            field.sample_dim(),
            frames
        )));
    }
    let z = euler_sample_flat(field, cond, steps, seed)?;
    SequenceSample::from_flat(
        prompt_id,
        sample_index,
        seed,
        frames,
        field.sample_dim() / frames,
        z,
    )
}
