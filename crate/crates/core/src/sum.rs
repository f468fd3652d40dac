//! Compensated (Neumaier) summation.
//!
//! The Besov double sums run over ~4·10^7 cell pairs at b = 3, N = 8; plain
//! accumulation loses digits there. Every energy and inner product in this
//! crate funnels through these accumulators.

use num_complex::Complex64;

/// Neumaier variant of Kahan summation for `f64`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of `f64` terms.
pub fn sum_f64<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Componentwise compensated accumulator for complex terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: Complex64) {
        self.re.add(value.re);
        self.im.add(value.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Compensated sum of complex terms.
pub fn sum_complex<I: IntoIterator<Item = Complex64>>(iter: I) -> Complex64 {
    let mut acc = ComplexSum::new();
    for v in iter {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_digits() {
        // 1 + 1e100 - 1e100 + ... loses the ones in plain f64 addition.
        let terms = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum_f64(terms.iter().copied()), 2.0);
        let naive: f64 = terms.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn complex_componentwise() {
        let terms = [
            Complex64::new(1.0, -1e50),
            Complex64::new(1e50, 1e50),
            Complex64::new(-1e50, 3.0),
        ];
        let s = sum_complex(terms.iter().copied());
        assert_eq!(s, Complex64::new(1.0, 3.0));
    }
}
