use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-element multipliers applied in the forward pass: `0` for dropped
/// elements, `1 / (1 - rate)` for survivors.
#[derive(Debug, Clone)]
pub struct DropoutMask(pub Vec<f64>);

impl DropoutMask {
    pub fn apply(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        out.data_mut()
            .iter_mut()
            .zip(&self.0)
            .for_each(|(v, m)| *v *= m);
        out
    }
}

/// Inverted dropout. Returns the output and, in train mode with a positive
/// rate, the mask needed for the backward pass.
pub fn dropout(
    input: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Tensor, Option<DropoutMask>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask = DropoutMask(
        (0..input.numel())
            .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
            .collect(),
    );
    Ok((mask.apply(input), Some(mask)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_zero_rate_are_identity() {
        let x = Tensor::from_fn(&[4, 8], |i| i as f64);
        let mut rng = Rng::new(1);
        assert_eq!(dropout(&x, 0.5, Mode::Eval, &mut rng).unwrap().0, x);
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).unwrap().0, x);
    }

    #[test]
    fn survivor_fraction_near_half() {
        let x = Tensor::full(&[10_000], 1.0);
        let mut rng = Rng::new(42);
        let (y, _) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let survivors = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&survivors), "{survivors}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn rate_one_rejected() {
        let mut rng = Rng::new(0);
        assert!(dropout(&Tensor::zeros(&[2]), 1.0, Mode::Train, &mut rng).is_err());
    }
}
