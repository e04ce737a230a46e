//! Small numeric helpers shared across modules.

/// Length above which sums switch to compensated accumulation.
pub const COMPENSATED_THRESHOLD: usize = 10_000;

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sums `len` terms, plainly for short sequences and with compensation past
/// [`COMPENSATED_THRESHOLD`].
pub fn sum_terms<I: Iterator<Item = f64>>(len: usize, terms: I) -> f64 {
    if len > COMPENSATED_THRESHOLD {
        let mut acc = Accumulator::default();
        terms.for_each(|v| acc.add(v));
        acc.total()
    } else {
        terms.sum()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let n = 20_001;
        let terms = std::iter::once(1e16).chain(std::iter::repeat_n(1.0, n - 1));
        assert_eq!(sum_terms(n, terms), 1e16 + 20_000.0);
    }

    #[test]
    fn short_sums_are_plain() {
        assert_eq!(sum_terms(3, [1.0, 2.0, 3.0].into_iter()), 6.0);
    }
}
