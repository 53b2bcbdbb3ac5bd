//! Random horizontal flip plus translation by zero-pad-and-crop.

use super::DataKind;
use crate::error::{Error, Result};
use crate::gates::RngState;

/// One concrete augmentation: optional flip, then a shift by `(dx, dy)`.
/// Output pixel `(y, x)` reads input pixel `(y + dy, x + dx)` of the
/// (flipped) image, zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AugmentParams {
    pub flip: bool,
    pub dx: i64,
    pub dy: i64,
}

impl AugmentParams {
    pub fn sample(rng: &mut RngState, pad: usize) -> Self {
        let flip = rng.uniform() < 0.5;
        let p = pad as i64;
        let dx = rng.int_inclusive(-p, p);
        let dy = rng.int_inclusive(-p, p);
        Self { flip, dx, dy }
    }

    pub fn apply(&self, image: &[f32], kind: DataKind) -> Result<Vec<f32>> {
        let DataKind::Image {
            height,
            width,
            channels,
        } = kind
        else {
            return Err(Error::invalid("augmentation needs image data"));
        };
        if image.len() != height * width * channels {
            return Err(Error::shape(format!(
                "image has {} values, expected {}",
                image.len(),
                height * width * channels
            )));
        }
        let mut out = vec![0.0; image.len()];
        let (h, w) = (height as i64, width as i64);
        for c in 0..channels {
            let plane = c * height * width;
            for y in 0..h {
                let sy = y + self.dy;
                if !(0..h).contains(&sy) {
                    continue;
                }
                for x in 0..w {
                    let mut sx = x + self.dx;
                    if !(0..w).contains(&sx) {
                        continue;
                    }
                    if self.flip {
                        sx = w - 1 - sx;
                    }
                    out[plane + (y * w + x) as usize] = image[plane + (sy * w + sx) as usize];
                }
            }
        }
        Ok(out)
    }
}

/// Flip with probability ½ and translate uniformly within `[-pad, pad]²`.
pub fn augment_image(
    image: &[f32],
    kind: DataKind,
    rng: &mut RngState,
    pad: usize,
) -> Result<Vec<f32>> {
    if !matches!(kind, DataKind::Image { .. }) {
        return Err(Error::invalid("augmentation needs image data"));
    }
    AugmentParams::sample(rng, pad).apply(image, kind)
}
