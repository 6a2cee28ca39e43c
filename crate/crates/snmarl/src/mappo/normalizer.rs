use serde::{Deserialize, Serialize};

/// Running mean/variance of value targets, merged batch-by-batch.
///
/// The critic regresses onto normalized targets; predictions are mapped back
/// through [`denormalize`](Self::denormalize) wherever a real-scale value is
/// needed (bootstrapping and advantages). Before the first update both maps
/// are the identity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReturnNormalizer {
    pub count: f64,
    pub mean: f64,
    /// Sum of squared deviations from the running mean.
    pub m2: f64,
}

impl ReturnNormalizer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds a batch into the running moments (parallel-variance merge).
    pub fn update(&mut self, xs: &[f64]) {
        if xs.is_empty() {
            return;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        let total = self.count + n;
        let delta = mean - self.mean;
        self.mean += delta * n / total;
        self.m2 += m2 + delta * delta * self.count * n / total;
        self.count = total;
    }

    /// Population standard deviation with a variance floor.
    pub fn std(&self) -> f64 {
        if self.count < 1.0 {
            return 1.0;
        }
        (self.m2 / self.count + 1e-8).sqrt()
    }

    pub fn normalize(&self, x: f64) -> f64 {
        if self.count < 1.0 {
            return x;
        }
        (x - self.mean) / self.std()
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        if self.count < 1.0 {
            return v;
        }
        v * self.std() + self.mean
    }
}
