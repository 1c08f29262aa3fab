//! Running mean and standard error, and a compensated discounted sum.

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance, 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        libm::sqrt(self.variance() / self.n as f64)
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// `sum_t beta^t c_t` with Kahan compensation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedSum {
    beta: f64,
    weight: f64,
    sum: f64,
    carry: f64,
}

impl DiscountedSum {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            weight: 1.0,
            sum: 0.0,
            carry: 0.0,
        }
    }

    pub fn push(&mut self, cost: f64) {
        let y = self.weight * cost - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
        self.weight *= self.beta;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }

    /// `sum_t beta^t c_t / sum_t beta^t` over the pushed terms.
    pub fn normalized(&self, steps: u64) -> f64 {
        let total = if self.beta == 1.0 {
            steps as f64
        } else {
            (1.0 - libm::pow(self.beta, steps as f64)) / (1.0 - self.beta)
        };
        if total == 0.0 {
            0.0
        } else {
            self.sum / total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, 7.0, -3.0];
        let s: RunningStats = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((s.mean() - mean).abs() < 1e-12);
        assert!((s.variance() - var).abs() < 1e-12);
        assert!((s.std_error() - libm::sqrt(var / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn discounted_geometric() {
        let mut d = DiscountedSum::new(0.5);
        for _ in 0..60 {
            d.push(1.0);
        }
        assert!((d.value() - 2.0).abs() < 1e-12);
        assert!((d.normalized(60) - 1.0).abs() < 1e-12);
    }
}
