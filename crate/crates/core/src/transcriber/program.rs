//! Solver-agnostic second-order cone program.
//!
//! ```text
//! minimize    c' x + constant
//! subject to  A_eq x  = b_eq
//!             A_in x <= b_in
//!             A_j x + b_j in SOC(dim_j)   for every cone block j
//! ```
//!
//! `SOC(d) = { (t, z) : ||z||_2 <= t }` with `t` the first of the `d` rows.
//! The whole program serializes to JSON so that any conic solver can consume it.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse matrix in triplet form; entries are unique per (row, col).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(ncols: usize) -> Self {
        Self { ncols, ..Default::default() }
    }

    /// Appends a row; duplicate columns within the row are summed and zeros dropped.
    pub fn push_row(&mut self, terms: &[(usize, f64)]) -> usize {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(c, v) in terms {
            assert!(c < self.ncols, "column {c} out of range");
            *merged.entry(c).or_insert(0.0) += v;
        }
        let r = self.nrows;
        for (c, v) in merged {
            if v != 0.0 {
                self.rows.push(r);
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.nrows += 1;
        r
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `A x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            out[r] += v * x[c];
        }
        out
    }
}

/// Linear constraint block `A x (= or <=) b`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearBlock {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    /// Row tags naming the constraint family, e.g. `drive[12]`.
    pub tags: Vec<String>,
}

impl LinearBlock {
    fn new(ncols: usize) -> Self {
        Self { a: SparseMatrix::new(ncols), b: Vec::new(), tags: Vec::new() }
    }

    pub fn push(&mut self, terms: &[(usize, f64)], rhs: f64, tag: impl Into<String>) {
        self.a.push_row(terms);
        self.b.push(rhs);
        self.tags.push(tag.into());
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

/// Second-order cone constraint `A x + b in SOC(dim)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeBlock {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub tag: String,
}

impl ConeBlock {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `||z|| - t` at `x`; non-positive when the cone constraint holds.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = self.a.mul(x).iter().zip(&self.b).map(|(ax, b)| ax + b).collect();
        y[1..].iter().map(|v| v * v).sum::<f64>().sqrt() - y[0]
    }
}

/// Transmission-ratio encoding inside the program.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatioEncoding {
    /// One ratio shared by all steps.
    Scalar,
    /// One ratio per step within `[gamma_min, coverage * gamma_min]`.
    PerStep { coverage: f64 },
}

/// Indices of every decision variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarLayout {
    pub steps: usize,
    pub e_b: Range<usize>,
    pub p_em: Range<usize>,
    pub p_dc: Range<usize>,
    pub p_b: Range<usize>,
    pub p_i: Range<usize>,
    /// `gamma_fgt` (scalar) or `gamma[0..N]` (per step).
    pub gamma: Range<usize>,
    /// `gamma_min` for the per-step encoding.
    pub gamma_min: Option<usize>,
    pub e_b_max: usize,
    pub delta_e: usize,
    pub n: usize,
}

impl VarLayout {
    pub fn new(steps: usize, encoding: RatioEncoding) -> Self {
        let mut next = 0;
        let mut take = |len: usize| {
            let r = next..next + len;
            next += len;
            r
        };
        let e_b = take(steps + 1);
        let p_em = take(steps);
        let p_dc = take(steps);
        let p_b = take(steps);
        let p_i = take(steps);
        let (gamma, gamma_min) = match encoding {
            RatioEncoding::Scalar => (take(1), None),
            RatioEncoding::PerStep { .. } => {
                let g = take(steps);
                (g, Some(take(1).start))
            }
        };
        let e_b_max = take(1).start;
        let delta_e = take(1).start;
        Self { steps, e_b, p_em, p_dc, p_b, p_i, gamma, gamma_min, e_b_max, delta_e, n: next }
    }

    /// Ratio variable used at step `k`.
    pub fn gamma_at(&self, k: usize) -> usize {
        if self.gamma.len() == 1 {
            self.gamma.start
        } else {
            self.gamma.start + k
        }
    }

    /// Design ratio: `gamma_fgt`, or `gamma_min` for the per-step encoding.
    pub fn design_ratio(&self) -> usize {
        self.gamma_min.unwrap_or(self.gamma.start)
    }

    /// Named variable ranges in layout order.
    pub fn blocks(&self) -> Vec<(&'static str, Range<usize>)> {
        let mut out = vec![
            ("E_b", self.e_b.clone()),
            ("P_em", self.p_em.clone()),
            ("P_dc", self.p_dc.clone()),
            ("P_b", self.p_b.clone()),
            ("P_i", self.p_i.clone()),
            ("gamma", self.gamma.clone()),
        ];
        if let Some(g) = self.gamma_min {
            out.push(("gamma_min", g..g + 1));
        }
        out.push(("E_b_max", self.e_b_max..self.e_b_max + 1));
        out.push(("delta_E_b", self.delta_e..self.delta_e + 1));
        out
    }
}

/// Per-step exogenous data fixed at transcription time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exogenous {
    pub speed: Vec<f64>,
    /// Required power at the fixed mass [W].
    pub p_req: Vec<f64>,
    /// Exogenous motor power used for the coefficient lookup [W].
    pub p_em_bar: Vec<f64>,
    /// Loss coefficients `(a1, a2, a3)` per step.
    pub loss_coeffs: Vec<[f64; 3]>,
    /// Motor speed per unit ratio, `v gamma_fd / r_w` [rad/s].
    pub omega_per_ratio: Vec<f64>,
}

/// Constants recorded alongside the program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramMeta {
    pub dt: f64,
    pub steps: usize,
    pub p_em_max: f64,
    pub m_bar: f64,
    /// Cycle distance [m].
    pub d_cycle: f64,
    pub encoding: RatioEncoding,
    /// Scaled motor envelope.
    pub t_em_max: f64,
    pub km1: f64,
    pub km2: f64,
    /// Objective constant `c_em P_em,max + c_add` [currency].
    pub objective_constant: f64,
    /// Ratio regularization weight on the design ratio [currency per unit ratio].
    pub ratio_weight: f64,
    /// Battery open-circuit power fit `p1 E_b + p2 E_b,max` and its internal power limit.
    pub p_oc: [f64; 2],
    pub p_i_max: [f64; 2],
    pub energy_unit: String,
    pub initial_soe: String,
    pub range_constraint: bool,
}

/// A complete conic program with its variable layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub layout: VarLayout,
    pub objective: Vec<f64>,
    pub eq: LinearBlock,
    pub ineq: LinearBlock,
    pub cones: Vec<ConeBlock>,
    pub meta: ProgramMeta,
    pub exogenous: Exogenous,
}

impl ConicProgram {
    pub(crate) fn empty(layout: VarLayout, meta: ProgramMeta, exogenous: Exogenous) -> Self {
        let n = layout.n;
        Self {
            objective: vec![0.0; n],
            eq: LinearBlock::new(n),
            ineq: LinearBlock::new(n),
            cones: Vec::new(),
            layout,
            meta,
            exogenous,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.layout.n
    }

    /// Adds a cone whose rows are `(terms, constant)` pairs.
    pub(crate) fn push_cone(&mut self, rows: &[(&[(usize, f64)], f64)], tag: impl Into<String>) {
        let mut a = SparseMatrix::new(self.layout.n);
        let mut b = Vec::with_capacity(rows.len());
        for (terms, c) in rows {
            a.push_row(terms);
            b.push(*c);
        }
        self.cones.push(ConeBlock { a, b, tag: tag.into() });
    }

    /// Objective value including the constant [currency].
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.meta.objective_constant
    }

    /// Largest violation over all constraint rows, each scaled by `1 + |rhs|`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (ax, b) in self.eq.a.mul(x).iter().zip(&self.eq.b) {
            worst = worst.max((ax - b).abs() / (1.0 + b.abs()));
        }
        for (ax, b) in self.ineq.a.mul(x).iter().zip(&self.ineq.b) {
            worst = worst.max((ax - b).max(0.0) / (1.0 + b.abs()));
        }
        for cone in &self.cones {
            let scale = 1.0 + cone.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
            worst = worst.max(cone.violation(x).max(0.0) / scale);
        }
        worst
    }

    /// Checks structural invariants: dimensions, cone sizes and index bounds.
    pub fn check(&self) -> Result<()> {
        let n = self.layout.n;
        if self.objective.len() != n {
            return Err(Error::Transcription("objective length differs from variable count".into()));
        }
        for block in [&self.eq, &self.ineq] {
            if block.a.ncols != n || block.a.nrows != block.b.len() || block.tags.len() != block.b.len() {
                return Err(Error::Transcription("linear block dimensions are inconsistent".into()));
            }
        }
        for cone in &self.cones {
            if cone.dim() < 2 || cone.a.nrows != cone.dim() || cone.a.ncols != n {
                return Err(Error::Transcription(format!("cone `{}` has inconsistent dimensions", cone.tag)));
            }
        }
        let all_cols = self
            .eq
            .a
            .cols
            .iter()
            .chain(&self.ineq.a.cols)
            .chain(self.cones.iter().flat_map(|c| c.a.cols.iter()));
        if all_cols.into_iter().any(|&c| c >= n) {
            return Err(Error::Transcription("constraint references an undeclared variable".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.check()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_row_merges_duplicates() {
        let mut m = SparseMatrix::new(3);
        m.push_row(&[(2, 1.0), (0, 2.0), (2, 0.5), (1, 1.0), (1, -1.0)]);
        assert_eq!(m.rows, vec![0, 0]);
        assert_eq!(m.cols, vec![0, 2]);
        assert_eq!(m.vals, vec![2.0, 1.5]);
        assert_eq!(m.mul(&[1.0, 7.0, 2.0]), vec![5.0]);
    }

    #[test]
    fn layout_sizes() {
        let s = VarLayout::new(4, RatioEncoding::Scalar);
        assert_eq!(s.n, 5 + 4 * 4 + 1 + 2);
        assert_eq!(s.gamma_at(3), s.gamma.start);
        let c = VarLayout::new(4, RatioEncoding::PerStep { coverage: 2.7 });
        assert_eq!(c.n, 5 + 4 * 4 + 4 + 1 + 2);
        assert_eq!(c.gamma_at(3), c.gamma.start + 3);
        assert_eq!(c.design_ratio(), c.gamma_min.unwrap());
        let total: usize = c.blocks().iter().map(|(_, r)| r.len()).sum();
        assert_eq!(total, c.n);
    }

    #[test]
    fn cone_violation_sign() {
        let mut a = SparseMatrix::new(2);
        a.push_row(&[(0, 1.0)]);
        a.push_row(&[(1, 1.0)]);
        let cone = ConeBlock { a, b: vec![0.0, 0.0], tag: "t".into() };
        assert!(cone.violation(&[2.0, 1.0]) < 0.0);
        assert!(cone.violation(&[1.0, 2.0]) > 0.0);
    }
}
