use crate::error::{Error, Result};
use crate::net::{Gradients, Params, Scalar};

/// One Nesterov momentum update in place:
/// `v ← μ·v − lr·g`, then `p ← p + μ·v − lr·g` with the updated `v`.
pub fn nesterov_step<T: Scalar>(
    params: &mut [T],
    velocity: &mut [T],
    grads: &[T],
    lr: T,
    momentum: T,
) -> Result<()> {
    if params.len() != velocity.len() || params.len() != grads.len() {
        return Err(Error::shape(format!(
            "params {}, velocity {}, grads {}",
            params.len(),
            velocity.len(),
            grads.len()
        )));
    }
    for ((p, v), &g) in params.iter_mut().zip(velocity.iter_mut()).zip(grads) {
        let step = lr * g;
        *v = momentum * *v - step;
        *p = *p + momentum * *v - step;
    }
    Ok(())
}

/// Nesterov SGD over a whole parameter set, with optional L2 weight decay
/// folded into the gradient.
#[derive(Debug, Clone)]
pub struct Nesterov<T> {
    velocity: Params<T>,
    momentum: T,
    weight_decay: T,
}

impl<T: Scalar> Nesterov<T> {
    pub fn new(like: &Params<T>, momentum: f64, weight_decay: f64) -> Self {
        Self {
            velocity: Params::zeros(like.shape()),
            momentum: T::from_f64_lossy(momentum),
            weight_decay: T::from_f64_lossy(weight_decay),
        }
    }

    pub fn velocity(&self) -> &Params<T> {
        &self.velocity
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Gradients<T>, lr: f64) -> Result<()> {
        params.check_same_shape(grads)?;
        params.check_same_shape(&self.velocity)?;
        let lr = T::from_f64_lossy(lr);
        let decay = self.weight_decay;
        let mut decayed = Vec::new();
        for ((p, v), g) in params
            .slices_mut()
            .into_iter()
            .zip(self.velocity.slices_mut())
            .zip(grads.slices())
        {
            let g = if decay == T::zero() {
                g
            } else {
                decayed.clear();
                decayed.extend(g.iter().zip(p.iter()).map(|(&g, &p)| g + decay * p));
                &decayed[..]
            };
            nesterov_step(p, v, g, lr, self.momentum)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_momentum_is_sgd() {
        let mut p = [1.0, -2.0, 0.5];
        let mut v = [0.0; 3];
        nesterov_step(&mut p, &mut v, &[0.5, 1.0, -1.0], 0.1, 0.0).unwrap();
        assert_eq!(p, [1.0 - 0.05, -2.0 - 0.1, 0.5 + 0.1]);
    }

    #[test]
    fn zero_gradient_zero_velocity_is_fixed_point() {
        let mut p = [3.0, 4.0];
        let mut v = [0.0, 0.0];
        nesterov_step(&mut p, &mut v, &[0.0, 0.0], 0.1, 0.9).unwrap();
        assert_eq!(p, [3.0, 4.0]);
        assert_eq!(v, [0.0, 0.0]);
    }

    #[test]
    fn quadratic_trajectory_matches_scalar_reference() {
        // Reference in the look-ahead parameterization:
        // v' = μ·v − lr·g, x' = x − μ·v + (1 + μ)·v'.
        let (lr, mu) = (0.1f64, 0.9f64);
        let mut xr = 1.0f64;
        let mut vr = 0.0f64;
        let mut reference = Vec::new();
        for _ in 0..10 {
            let g = xr;
            let v_new = mu * vr - lr * g;
            xr = xr - mu * vr + (1.0 + mu) * v_new;
            vr = v_new;
            reference.push(xr);
        }

        let mut x = [1.0f64];
        let mut v = [0.0f64];
        for r in reference {
            let g = [x[0]];
            nesterov_step(&mut x, &mut v, &g, lr, mu).unwrap();
            assert!((x[0] - r).abs() < 1e-12, "{} vs {r}", x[0]);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = [1.0];
        let mut v = [0.0, 0.0];
        assert!(nesterov_step(&mut p, &mut v, &[0.0], 0.1, 0.9).is_err());
    }
}
