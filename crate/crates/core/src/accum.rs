//! Compensated floating-point accumulation in a fixed order.

use num_complex::Complex64;

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Adds the exact product `a * b` (via fused multiply-add error recovery).
    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        let prod = a * b;
        let err = a.mul_add(b, -prod);
        self.add(prod);
        self.add(err);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    /// Adds `k * z` for an integer weight, exactly rounded per component.
    #[inline]
    pub fn add_scaled(&mut self, k: f64, z: Complex64) {
        self.re.add_product(k, z.re);
        self.im.add_product(k, z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Splits a `u128` into two exactly representable doubles whose sum is the value
/// (exact whenever the value is below 2^85).
pub fn u128_parts(x: u128) -> (f64, f64) {
    let hi = ((x >> 32) as f64) * 4_294_967_296.0;
    let lo = (x & 0xffff_ffff) as f64;
    (hi, lo)
}

/// Pairwise reduction in a fixed tree order; the result depends only on the
/// slice contents, never on how the slice was produced.
pub fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        let mut s = ComplexSum::new();
        for &z in xs {
            s.add(z);
        }
        return s.value();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn exact_products() {
        let mut s = CompensatedSum::new();
        let a = 134_217_729.0; // 2^27 + 1
        s.add_product(a, a);
        s.add(-(a * a));
        // a^2 = 2^54 + 2^28 + 1 is not representable; the residue is recovered
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn split_u128() {
        let x: u128 = (1 << 80) + 12345;
        let (hi, lo) = u128_parts(x);
        assert_eq!(hi as u128 + lo as u128, x);
    }

    #[test]
    fn pairwise_matches_sequential() {
        let xs: Vec<Complex64> = (0..1000)
            .map(|k| Complex64::new(k as f64, -(k as f64)))
            .collect();
        let s = pairwise_sum(&xs);
        assert_eq!(s, Complex64::new(499_500.0, -499_500.0));
    }
}
