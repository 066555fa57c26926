//! Hermite polynomial chaos: multi-index bases, Galerkin triple products
//! and the projection of a lognormal field onto the chaos basis.
//!
//! Polynomials are the unnormalized probabilists' Hermite family, so
//! `⟨ψ_α²⟩ = ∏ α_m!` and `ψ_0 ≡ 1`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `⟨ψ_α²⟩ = ∏ α_m!`
    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }
}

/// Total-degree Hermite chaos basis in graded lexicographic order.
///
/// Within one degree the first random variable carries the highest
/// exponent first, so for `L = 2` the ordering is
/// `1, ξ₁, ξ₂, ξ₁², ξ₁ξ₂, ξ₂², …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcBasis {
    dim: usize,
    order: u32,
    indices: Vec<MultiIndex>,
}

impl PcBasis {
    pub fn enumerate(dim: usize, order: u32) -> Self {
        let mut indices = Vec::new();
        for degree in 0..=order {
            let mut current = vec![0u32; dim];
            compositions(degree, 0, &mut current, &mut indices);
            if dim == 0 {
                break;
            }
        }
        Self { dim, order, indices }
    }

    /// Random dimension `L`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|m| m == alpha)
    }

    pub fn norms(&self) -> Vec<f64> {
        self.indices.iter().map(MultiIndex::norm_squared).collect()
    }

    /// Evaluates `ψ_i(ξ)`.
    pub fn eval(&self, i: usize, xi: &[f64]) -> f64 {
        self.indices[i]
            .exponents()
            .iter()
            .zip(xi)
            .map(|(&a, &x)| hermite_eval(a, x))
            .product()
    }
}

fn compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    let dim = current.len();
    if dim == 0 {
        if remaining == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    if pos == dim - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        current[pos] = 0;
        return;
    }
    for a in (0..=remaining).rev() {
        current[pos] = a;
        compositions(remaining - a, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// `binomial(dim + order, order)`, the size of the total-degree basis.
pub fn basis_size(dim: usize, order: u32) -> usize {
    let (n, k) = (dim as u128 + order as u128, order as u128);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc as usize
}

/// Probabilists' Hermite polynomial `He_n(x)` via the three-term recurrence.
pub fn hermite_eval(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `E[He_a He_b He_c]` under the standard normal density.
pub fn hermite_triple_moment(a: u32, b: u32, c: u32) -> f64 {
    let total = a + b + c;
    if total % 2 == 1 {
        return 0.0;
    }
    let s = total / 2;
    if s < a || s < b || s < c {
        return 0.0;
    }
    factorial(a) * factorial(b) * factorial(c) / (factorial(s - a) * factorial(s - b) * factorial(s - c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// Sparse `C_ijk = ⟨ψ_i ψ_j ψ_k⟩` with `i` over the input basis and
/// `j, k` over the output basis.
///
/// Entries are sorted by `(k, i, j)`; `k_offsets[k]..k_offsets[k + 1]`
/// is the slice contributing to output block `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleProductTensor {
    entries: Vec<TripleEntry>,
    k_offsets: Vec<usize>,
    norms: Vec<f64>,
    n_input: usize,
    n_output: usize,
}

impl TripleProductTensor {
    pub fn entries(&self) -> &[TripleEntry] {
        &self.entries
    }

    pub fn entries_for_k(&self, k: usize) -> &[TripleEntry] {
        &self.entries[self.k_offsets[k]..self.k_offsets[k + 1]]
    }

    /// `⟨ψ_k²⟩` over the output basis.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn n_input(&self) -> usize {
        self.n_input
    }

    pub fn n_output(&self) -> usize {
        self.n_output
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        if k >= self.n_output {
            return None;
        }
        let slice = self.entries_for_k(k);
        slice
            .binary_search_by(|e| (e.i, e.j).cmp(&(i, j)))
            .ok()
            .map(|p| slice[p].value)
    }

    /// Output blocks `(j, k)` that receive at least one contribution.
    pub fn block_occupancy(&self) -> Vec<Vec<bool>> {
        let mut occ = vec![vec![false; self.n_output]; self.n_output];
        for e in &self.entries {
            occ[e.j][e.k] = true;
        }
        occ
    }

    /// Writes `i,j,k,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "k", "value"])?;
        for e in &self.entries {
            wr.write_record(&[
                e.i.to_string(),
                e.j.to_string(),
                e.k.to_string(),
                format!("{:e}", e.value),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn triple_products(input: &PcBasis, output: &PcBasis) -> Result<TripleProductTensor> {
    if input.dim() != output.dim() {
        return Err(Error::DimensionMismatch(format!(
            "input basis has {} random variables, output basis {}",
            input.dim(),
            output.dim()
        )));
    }
    let max_deg = input.order().max(output.order()) as usize;
    let mut table = vec![0.0; (max_deg + 1).pow(3)];
    let at = |a: usize, b: usize, c: usize| (a * (max_deg + 1) + b) * (max_deg + 1) + c;
    for a in 0..=max_deg {
        for b in 0..=max_deg {
            for c in 0..=max_deg {
                table[at(a, b, c)] = hermite_triple_moment(a as u32, b as u32, c as u32);
            }
        }
    }

    let mut entries = Vec::new();
    let mut k_offsets = Vec::with_capacity(output.len() + 1);
    k_offsets.push(0);
    for (k, mk) in output.indices().iter().enumerate() {
        for (i, mi) in input.indices().iter().enumerate() {
            for (j, mj) in output.indices().iter().enumerate() {
                if (mi.degree() + mj.degree() + mk.degree()) % 2 == 1 {
                    continue;
                }
                let mut value = 1.0;
                for ((&a, &b), &c) in mi.exponents().iter().zip(mj.exponents()).zip(mk.exponents()) {
                    value *= table[at(a as usize, b as usize, c as usize)];
                    if value == 0.0 {
                        break;
                    }
                }
                if value != 0.0 {
                    entries.push(TripleEntry { i, j, k, value });
                }
            }
        }
        k_offsets.push(entries.len());
    }
    Ok(TripleProductTensor {
        entries,
        k_offsets,
        norms: output.norms(),
        n_input: input.len(),
        n_output: output.len(),
    })
}

/// Chaos coefficients of a lognormal nodal field `exp(g₀(x) + Σ gᵢ(x) ξᵢ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LognormalPce {
    /// `exp(g₀)` per node.
    pub scale: Vec<f64>,
    /// One nodal field per input multi-index.
    pub coeffs: Vec<Vec<f64>>,
}

impl LognormalPce {
    pub fn n_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.scale.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.coeffs[0]
    }
}

/// Projects `exp(g)` onto `basis`; `modes[i]` must already carry `√λᵢ`.
///
/// Coefficient of `α` at `x` is `exp(g₀ + ½Σ gᵢ²) ∏ gᵢ^{αᵢ} / αᵢ!`.
pub fn project_lognormal(g0: &[f64], modes: &[Vec<f64>], basis: &PcBasis) -> Result<LognormalPce> {
    if modes.len() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} KLE modes for a {}-dimensional basis",
            modes.len(),
            basis.dim()
        )));
    }
    let n = g0.len();
    if let Some(bad) = modes.iter().find(|m| m.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "mode field of length {} on {} nodes",
            bad.len(),
            n
        )));
    }
    let mean_scale: Vec<f64> = (0..n)
        .map(|x| (g0[x] + 0.5 * modes.iter().map(|m| m[x] * m[x]).sum::<f64>()).exp())
        .collect();
    let coeffs = basis
        .indices()
        .iter()
        .map(|alpha| {
            (0..n)
                .map(|x| {
                    let mut c = mean_scale[x];
                    for (m, &a) in modes.iter().zip(alpha.exponents()) {
                        if a > 0 {
                            c *= m[x].powi(a as i32) / factorial(a);
                        }
                    }
                    c
                })
                .collect()
        })
        .collect();
    Ok(LognormalPce {
        scale: g0.iter().map(|g| g.exp()).collect(),
        coeffs,
    })
}

#[cfg(test)]
pub(crate) mod quadrature {
    //! Gauss–Hermite rules from the Golub–Welsch eigenproblem; test oracle only.
    use faer::{Mat, Side};

    /// Nodes and weights for `∫ f(x) φ(x) dx` with the standard normal density.
    pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
        let j = Mat::from_fn(n, n, |a, b| {
            if a + 1 == b || b + 1 == a {
                (a.max(b) as f64).sqrt()
            } else {
                0.0
            }
        });
        let evd = j.self_adjoint_eigen(Side::Lower).unwrap();
        let nodes: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
        let weights: Vec<f64> = (0..n).map(|i| evd.U()[(0, i)].powi(2)).collect();
        (nodes, weights)
    }

    /// Tensor rule over `dim` standard normal variables.
    pub fn tensor_rule(dim: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
        let (x, w) = gauss_hermite(n);
        let mut out = vec![(Vec::new(), 1.0)];
        for _ in 0..dim {
            out = out
                .into_iter()
                .flat_map(|(p, pw)| {
                    x.iter().zip(&w).map(move |(&xi, &wi)| {
                        let mut q = p.clone();
                        q.push(xi);
                        (q, pw * wi)
                    })
                })
                .collect();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::quadrature::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(PcBasis::enumerate(5, 3).len(), 56);
        assert_eq!(PcBasis::enumerate(5, 2).len(), 21);
        assert_eq!(PcBasis::enumerate(9, 3).len(), 220);
        assert_eq!(PcBasis::enumerate(0, 7).len(), 1);
        assert_eq!(PcBasis::enumerate(3, 0).len(), 1);
    }

    #[test]
    fn basis_count_matches_binomial() {
        for l in 0..=15 {
            for p in 0..=5 {
                let b = PcBasis::enumerate(l, p);
                assert_eq!(b.len(), basis_size(l, p), "L={l} p={p}");
            }
        }
    }

    #[test]
    fn graded_ordering() {
        let b = PcBasis::enumerate(2, 2);
        let e: Vec<Vec<u32>> = b.indices().iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(e, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        let b = PcBasis::enumerate(4, 3);
        assert!(b.indices().windows(2).all(|w| w[0].degree() <= w[1].degree()));
        assert!(b.index(0).exponents().iter().all(|&a| a == 0));
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_eval(0, 3.7), 1.0);
        assert_eq!(hermite_eval(2, 0.0), -1.0);
        assert_eq!(hermite_eval(3, 2.0), 2.0);
        assert_eq!(hermite_eval(4, 1.0), 1.0 - 6.0 + 3.0);
    }

    #[test]
    fn one_dimensional_triple_moments() {
        assert_eq!(hermite_triple_moment(1, 1, 1), 0.0);
        // E[ξ ξ (ξ²−1)] = E[ξ⁴] − E[ξ²] = 2 by 20-point Gauss–Hermite.
        let (x, w) = gauss_hermite(20);
        let q: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x * x * (x * x - 1.0)).sum();
        assert!((q - 2.0).abs() < 1e-12);
        assert_eq!(hermite_triple_moment(1, 1, 2), 2.0);
    }

    #[test]
    fn triple_products_match_quadrature() {
        let input = PcBasis::enumerate(2, 2);
        let output = PcBasis::enumerate(2, 3);
        let t = triple_products(&input, &output).unwrap();
        let rule = tensor_rule(2, 12);
        for i in 0..input.len() {
            for j in 0..output.len() {
                for k in 0..output.len() {
                    let q: f64 = rule
                        .iter()
                        .map(|(xi, w)| w * input.eval(i, xi) * output.eval(j, xi) * output.eval(k, xi))
                        .sum();
                    let v = t.get(i, j, k).unwrap_or(0.0);
                    assert!((q - v).abs() < 1e-10, "({i},{j},{k}) quad {q} tensor {v}");
                }
            }
        }
    }

    #[test]
    fn zero_index_slice_is_the_norm() {
        let b = PcBasis::enumerate(3, 3);
        let t = triple_products(&b, &b).unwrap();
        for j in 0..b.len() {
            for k in 0..b.len() {
                let v = t.get(0, j, k);
                if j == k {
                    assert_eq!(v, Some(b.index(j).norm_squared()));
                } else {
                    assert_eq!(v, None);
                }
            }
        }
        assert!(t.entries().iter().all(|e| e.value != 0.0));
    }

    #[test]
    fn orthogonality_under_quadrature() {
        let b = PcBasis::enumerate(2, 3);
        let rule = tensor_rule(2, 10);
        for j in 0..b.len() {
            for k in 0..b.len() {
                let q: f64 = rule.iter().map(|(xi, w)| w * b.eval(j, xi) * b.eval(k, xi)).sum();
                let want = if j == k { b.index(j).norm_squared() } else { 0.0 };
                assert!((q - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mismatched_bases_rejected() {
        let a = PcBasis::enumerate(2, 2);
        let b = PcBasis::enumerate(3, 2);
        assert!(triple_products(&a, &b).is_err());
    }

    #[test]
    fn lognormal_deterministic_limit() {
        let b = PcBasis::enumerate(2, 2);
        let pce = project_lognormal(&[0.3, -0.1], &[vec![0.0, 0.0], vec![0.0, 0.0]], &b).unwrap();
        assert!((pce.coeffs[0][0] - 0.3f64.exp()).abs() < 1e-15);
        assert!(pce.coeffs[1..].iter().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn lognormal_mean_identity() {
        let sigma = 0.3;
        let b = PcBasis::enumerate(1, 4);
        let pce = project_lognormal(&[0.2], &[vec![sigma]], &b).unwrap();
        assert!((pce.mean()[0] - (0.2 + 0.5 * sigma * sigma).exp()).abs() < 1e-15);
    }

    #[test]
    fn lognormal_projection_matches_quadrature() {
        let b = PcBasis::enumerate(2, 4);
        let (g0, g1, g2) = (0.1, 0.25, -0.15);
        let pce = project_lognormal(&[g0], &[vec![g1], vec![g2]], &b).unwrap();
        let rule = tensor_rule(2, 30);
        for a in 0..b.len() {
            let q: f64 = rule
                .iter()
                .map(|(xi, w)| w * (g0 + g1 * xi[0] + g2 * xi[1]).exp() * b.eval(a, xi))
                .sum::<f64>()
                / b.index(a).norm_squared();
            assert!((q - pce.coeffs[a][0]).abs() < 1e-10, "alpha {a}: {q} vs {}", pce.coeffs[a][0]);
        }
    }

    #[test]
    fn lognormal_second_moment_converges_from_below() {
        let (g0, s) = (0.0, 0.6);
        let exact = (2.0 * g0 + s * s as f64).exp() * (s * s as f64).exp();
        let mut last = 0.0;
        for p in 0..6 {
            let b = PcBasis::enumerate(1, p);
            let pce = project_lognormal(&[g0], &[vec![s]], &b).unwrap();
            let m2: f64 = (0..b.len()).map(|a| pce.coeffs[a][0].powi(2) * b.index(a).norm_squared()).sum();
            assert!(m2 > last && m2 <= exact + 1e-12);
            last = m2;
        }
        assert!((exact - last) / exact < 1e-3);
    }

    proptest! {
        #[test]
        fn triple_products_are_permutation_symmetric(l in 1usize..4, p in 1u32..4) {
            let b = PcBasis::enumerate(l, p);
            let t = triple_products(&b, &b).unwrap();
            for e in t.entries() {
                for (i, j, k) in [(e.j, e.i, e.k), (e.k, e.j, e.i), (e.i, e.k, e.j), (e.j, e.k, e.i), (e.k, e.i, e.j)] {
                    prop_assert_eq!(t.get(i, j, k), Some(e.value));
                }
            }
        }
    }
}
