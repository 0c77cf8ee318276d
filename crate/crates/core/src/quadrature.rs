//! Uniform quadrature nodes, the integration matrices `Q` and `Q_I`, and
//! time-direction transfer matrices between nested node sets.
//!
//! A table with `M` sub-steps stores `M + 1` nodes `t_m = m / M` on the unit
//! interval. The quadrature weights are built on the right `M` nodes only, so
//! column 0 of `Q` vanishes and the rule reaches order `M`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Equispaced nodes `t_m = m / M`, `m = 0..=M`, on the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    substeps: usize,
    nodes: Vec<f64>,
}

impl NodeSet {
    /// Number of sub-steps `M` (one less than the number of stored nodes).
    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Relative sub-step width `γ_m = (t_m − t_{m−1})`, `m ≥ 1`.
    pub fn gamma(&self, m: usize) -> f64 {
        assert!(m >= 1 && m <= self.substeps);
        self.nodes[m] - self.nodes[m - 1]
    }

    /// Index of the node equal to `m_other / M_other`, if present.
    fn position_of(&self, m_other: usize, substeps_other: usize) -> Option<usize> {
        // m / M == m_other / M_other  <=>  m * M_other == m_other * M
        let numer = m_other * self.substeps;
        if numer.is_multiple_of(substeps_other) {
            Some(numer / substeps_other)
        } else {
            None
        }
    }
}

/// Builds the uniform node set with `substeps` sub-intervals.
pub fn uniform_nodes(substeps: usize) -> Result<NodeSet> {
    if substeps == 0 {
        return Err(Error::InvalidNodeCount(substeps));
    }
    let nodes = (0..=substeps).map(|m| m as f64 / substeps as f64).collect();
    Ok(NodeSet { substeps, nodes })
}

/// Node set plus the integration matrices for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureTable {
    pub nodes: NodeSet,
    /// `q[(m, i)] ≈ ∫_0^{t_m} ℓ_i`, normalized to a unit step.
    pub q: DMatrix<f64>,
    /// Backward-Euler sub-stepping matrix.
    pub q_implicit: DMatrix<f64>,
}

impl QuadratureTable {
    pub fn substeps(&self) -> usize {
        self.nodes.substeps()
    }

    /// Formal order of the collocation rule (equal to the number of sub-steps).
    pub fn order(&self) -> usize {
        self.nodes.substeps()
    }

    /// Convenience constructor: uniform nodes with `substeps` sub-intervals.
    pub fn uniform(substeps: usize) -> Result<Self> {
        Ok(build_q(&uniform_nodes(substeps)?))
    }
}

/// Multiplies a polynomial (coefficients in ascending order) by `(x − root)`.
fn mul_linear(poly: &[BigRational], root: &BigRational) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); poly.len() + 1];
    for (a, c) in poly.iter().enumerate() {
        out[a + 1] += c.clone();
        out[a] -= c * root;
    }
    out
}

/// Integrates a polynomial from 0 to `upper`.
fn integrate(poly: &[BigRational], upper: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    let mut power = upper.clone();
    for (a, c) in poly.iter().enumerate() {
        acc += c * &power / BigRational::from_integer(BigInt::from(a + 1));
        power *= upper;
    }
    acc
}

/// Builds `Q` and `Q_I` for the given node set.
///
/// Weights come from exact rational integration of the Lagrange basis on
/// nodes `t_1..t_M`, rounded once to `f64`.
pub fn build_q(nodes: &NodeSet) -> QuadratureTable {
    let big_m = nodes.substeps();
    let size = big_m + 1;
    let int = |v: usize| BigRational::from_integer(BigInt::from(v));
    // Work in the scaled variable s = M t, where the quadrature nodes are 1..M.
    let scale = int(big_m);

    let mut q = DMatrix::zeros(size, size);
    for i in 1..=big_m {
        let mut basis = vec![BigRational::one()];
        let mut denom = BigRational::one();
        for j in (1..=big_m).filter(|&j| j != i) {
            basis = mul_linear(&basis, &int(j));
            denom *= int(i) - int(j);
        }
        for m in 1..=big_m {
            let w = integrate(&basis, &int(m)) / (&denom * &scale);
            q[(m, i)] = w.to_f64().expect("finite weight");
        }
    }

    let mut q_implicit = DMatrix::zeros(size, size);
    for m in 1..=big_m {
        for i in 1..=m {
            q_implicit[(m, i)] = nodes.gamma(i);
        }
    }

    QuadratureTable {
        nodes: nodes.clone(),
        q,
        q_implicit,
    }
}

/// Pointwise selection from `fine` nodes onto `coarse` nodes, shape
/// `(M_c + 1) × (M_f + 1)`.
pub fn time_restriction(fine: &NodeSet, coarse: &NodeSet) -> Result<DMatrix<f64>> {
    let mut r = DMatrix::zeros(coarse.len(), fine.len());
    for mc in 0..coarse.len() {
        let mf = fine
            .position_of(mc, coarse.substeps())
            .ok_or(Error::NonNestedNodes {
                node: mc,
                position: coarse.nodes()[mc],
            })?;
        r[(mc, mf)] = 1.0;
    }
    Ok(r)
}

/// Lagrange interpolation from `coarse` nodes (all of them, including
/// `t = 0`) onto `fine` nodes, shape `(M_f + 1) × (M_c + 1)`.
pub fn time_interpolation(coarse: &NodeSet, fine: &NodeSet) -> Result<DMatrix<f64>> {
    // Nesting check shares the restriction diagnostics.
    time_restriction(fine, coarse)?;
    let tc = coarse.nodes();
    let mut p = DMatrix::zeros(fine.len(), coarse.len());
    for (mf, &t) in fine.nodes().iter().enumerate() {
        if let Some(mc) = (0..coarse.len()).find(|&mc| {
            fine.position_of(mc, coarse.substeps()) == Some(mf)
        }) {
            p[(mf, mc)] = 1.0;
            continue;
        }
        for j in 0..coarse.len() {
            let mut w = 1.0;
            for l in (0..coarse.len()).filter(|&l| l != j) {
                w *= (t - tc[l]) / (tc[j] - tc[l]);
            }
            p[(mf, j)] = w;
        }
    }
    Ok(p)
}
