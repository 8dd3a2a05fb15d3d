//! Bessel low-pass prefilter: analog prototype with its -3 dB point at the
//! requested cutoff, discretised by the prewarped bilinear transform.

use crate::analysis::Polynomial;
use std::f64::consts::PI;

pub const DEFAULT_ORDER: usize = 2;
pub const MAX_ORDER: usize = 10;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("filter order must be in 1..={MAX_ORDER}, got {0}")]
    Order(usize),
    #[error("cutoff {cutoff} Hz must be positive and below Nyquist for dt = {dt}")]
    Cutoff { cutoff: f64, dt: f64 },
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Reverse Bessel polynomial coefficients in ascending powers.
fn reverse_bessel(order: usize) -> Vec<f64> {
    (0..=order)
        .map(|k| {
            factorial(2 * order - k)
                / (2f64.powi((order - k) as i32) * factorial(k) * factorial(order - k))
        })
        .collect()
}

/// Frequency where `a0 / theta(j w)` drops to -3 dB, by bisection.
fn half_power_frequency(asc: &[f64]) -> f64 {
    let mag2 = |w: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, c) in asc.iter().enumerate() {
            let p = c * w.powi(k as i32);
            match k % 4 {
                0 => re += p,
                1 => im += p,
                2 => re -= p,
                _ => im -= p,
            }
        }
        asc[0] * asc[0] / (re * re + im * im)
    };
    let (mut lo, mut hi) = (1e-6, 1.0);
    while mag2(hi) > 0.5 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mag2(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Analog Bessel low-pass with -3 dB at `cutoff` rad/s, as numerator and
/// denominator polynomials in `s`.
pub fn analog_prototype(order: usize, cutoff: f64) -> (Polynomial, Polynomial) {
    let asc = reverse_bessel(order);
    let w0 = cutoff / half_power_frequency(&asc);
    let den: Vec<f64> = asc
        .iter()
        .enumerate()
        .rev()
        .map(|(k, c)| c / w0.powi(k as i32))
        .collect();
    (Polynomial::constant(asc[0]), Polynomial::new(den))
}

/// Discrete-time Bessel filter in transposed direct form II.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    state: Vec<f64>,
}

impl BesselFilter {
    pub fn new(cutoff_hz: f64, order: usize, dt: f64) -> Result<Self, FilterError> {
        if order == 0 || order > MAX_ORDER {
            return Err(FilterError::Order(order));
        }
        if !(cutoff_hz > 0.0 && dt > 0.0 && cutoff_hz < 0.5 / dt) {
            return Err(FilterError::Cutoff {
                cutoff: cutoff_hz,
                dt,
            });
        }
        let k = 2.0 / dt;
        let warped = k * (PI * cutoff_hz * dt).tan();
        let (num, den) = analog_prototype(order, warped);
        // s = k (z - 1)/(z + 1), cleared of the (z + 1)^order denominator.
        let zm = Polynomial::new(vec![1.0, -1.0]);
        let zp = Polynomial::new(vec![1.0, 1.0]);
        let substitute = |p: &Polynomial| {
            let n = p.coeffs().len();
            let mut acc = Polynomial::constant(0.0);
            for (i, c) in p.coeffs().iter().enumerate() {
                let pow = n - 1 - i;
                let term = (&zm.powi(pow) * &zp.powi(order - pow)).scale(c * k.powi(pow as i32));
                acc = &acc + &term;
            }
            acc
        };
        let (bz, az) = (substitute(&num), substitute(&den));
        let a0 = az.leading();
        let mut b = vec![0.0; order + 1];
        let bc = bz.coeffs();
        b[order + 1 - bc.len()..].copy_from_slice(bc);
        Ok(Self {
            b: b.iter().map(|x| x / a0).collect(),
            a: az.coeffs().iter().map(|x| x / a0).collect(),
            state: vec![0.0; order],
        })
    }

    pub fn order(&self) -> usize {
        self.state.len()
    }

    /// Numerator and denominator in powers of `z^-1`.
    pub fn coefficients(&self) -> (&[f64], &[f64]) {
        (&self.b, &self.a)
    }

    /// Sets the internal state to the steady state for a constant input.
    pub fn reset(&mut self, value: f64) {
        let n = self.order();
        // With y = x = value: s_i = sum_{j>i} (b_j - a_j) * value.
        for i in 0..n {
            self.state[i] = (i + 1..=n).map(|j| self.b[j] - self.a[j]).sum::<f64>() * value;
        }
    }

    pub fn filter(&mut self, x: f64) -> f64 {
        let n = self.order();
        let y = self.b[0] * x + self.state[0];
        for i in 0..n {
            let next = if i + 1 < n { self.state[i + 1] } else { 0.0 };
            self.state[i] = self.b[i + 1] * x - self.a[i + 1] * y + next;
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_prototype() {
        assert_eq!(reverse_bessel(2), vec![3.0, 3.0, 1.0]);
        assert_eq!(reverse_bessel(3), vec![15.0, 15.0, 6.0, 1.0]);
        let k = half_power_frequency(&reverse_bessel(2));
        assert!((k - ((45f64.sqrt() - 3.0) / 2.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn unit_dc_gain() {
        for order in 1..=6 {
            let mut f = BesselFilter::new(40.0, order, 1e-3).unwrap();
            let mut y = 0.0;
            for _ in 0..2000 {
                y = f.filter(2.5);
            }
            assert!((y - 2.5).abs() < 2.5e-6, "order {order}: {y}");
        }
    }

    #[test]
    fn reset_is_steady() {
        let mut f = BesselFilter::new(40.0, 2, 1e-3).unwrap();
        f.reset(0.7);
        for _ in 0..10 {
            assert!((f.filter(0.7) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_design() {
        assert_eq!(BesselFilter::new(40.0, 0, 1e-3), Err(FilterError::Order(0)));
        assert!(BesselFilter::new(600.0, 2, 1e-3).is_err());
        assert!(BesselFilter::new(-1.0, 2, 1e-3).is_err());
    }
}
