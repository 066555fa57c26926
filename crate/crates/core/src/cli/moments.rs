//! Mean and standard deviation fields from chaos coefficients.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub components: usize,
    /// `node * components + c`.
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// `mean = u₀`, `sd² = Σ_{j≥1} u_j² ⟨ψ_j²⟩`, pointwise.
pub fn compute_moments(nodal: &[Vec<f64>], norms: &[f64], components: usize) -> Moments {
    let mean = nodal[0].clone();
    let mut var = vec![0.0; mean.len()];
    for (u, &n) in nodal.iter().zip(norms).skip(1) {
        for (v, x) in var.iter_mut().zip(u) {
            *v += x * x * n;
        }
    }
    Moments { components, mean, sd: var.into_iter().map(f64::sqrt).collect() }
}

impl Moments {
    pub fn n_nodes(&self) -> usize {
        self.mean.len() / self.components
    }

    fn magnitude(&self, v: &[f64]) -> Vec<f64> {
        v.chunks(self.components).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }

    /// Euclidean norm of the nodal mean vector.
    pub fn mean_magnitude(&self) -> Vec<f64> {
        self.magnitude(&self.mean)
    }

    /// Euclidean norm of the vector of component standard deviations.
    pub fn sd_magnitude(&self) -> Vec<f64> {
        self.magnitude(&self.sd)
    }

    pub fn component(&self, v: &[f64], c: usize) -> Vec<f64> {
        v.iter().skip(c).step_by(self.components).copied().collect()
    }

    /// `sd / |mean|` where the mean magnitude exceeds `floor` times its
    /// maximum, else `None`.
    pub fn coefficient_of_variation(&self, floor: f64) -> Vec<Option<f64>> {
        let m = self.mean_magnitude();
        let s = self.sd_magnitude();
        let max = m.iter().copied().fold(0.0, f64::max);
        m.iter()
            .zip(&s)
            .map(|(&m, &s)| (max > 0.0 && m > floor * max).then(|| s / m))
            .collect()
    }

    pub fn summary(&self) -> MomentSummary {
        let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
        MomentSummary {
            max_mean_magnitude: max(self.mean_magnitude()),
            max_sd_magnitude: max(self.sd_magnitude()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub max_mean_magnitude: f64,
    pub max_sd_magnitude: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_term_has_zero_sd() {
        let m = compute_moments(&[vec![1.0, -2.0]], &[1.0], 1);
        assert_eq!(m.sd, vec![0.0, 0.0]);
        assert_eq!(m.mean, vec![1.0, -2.0]);
    }

    #[test]
    fn variance_uses_norms() {
        let nodal = vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]];
        let m = compute_moments(&nodal, &[1.0, 1.0, 2.0], 3);
        assert!((m.sd[0] - 6.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.sd[2], 1.0);
        assert_eq!(m.mean_magnitude(), vec![1.0]);
        assert!((m.sd_magnitude()[0] - 7.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.component(&m.sd, 2), vec![1.0]);
    }

    #[test]
    fn cov_masks_small_means() {
        let m = Moments { components: 1, mean: vec![1.0, 1e-9], sd: vec![0.1, 0.1] };
        let cov = m.coefficient_of_variation(1e-6);
        assert!((cov[0].unwrap() - 0.1).abs() < 1e-15);
        assert!(cov[1].is_none());
    }
}
