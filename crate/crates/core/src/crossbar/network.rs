//! Nodal analysis of a transistor-less crossbar during a write phase.
//!
//! Enabled rows are ideal voltage sources, enabled columns are grounded and
//! every other terminal floats (its transistor is off). The floating
//! terminal voltages solve the reduced conductance system `A v = b`, which
//! is symmetric positive definite whenever at least one terminal is driven.

use nalgebra::{DMatrix, DVector};

use super::{Architecture, Crossbar, PhaseSpec};
use crate::error::{check_dim, Error, Result};

/// Above this many terminals the matrix-free conjugate-gradient path is used.
pub const DENSE_NODE_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Schur reduction up to `DENSE_NODE_LIMIT` terminals, iterative beyond.
    #[default]
    Auto,
    /// Full nodal matrix with a Cholesky factorization; the reference path.
    Dense,
    /// Eliminates the larger floating side (its block is diagonal) and
    /// factors the smaller Schur complement.
    Schur,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    rows: usize,
    cols: usize,
    pub row_voltages: Vec<f64>,
    pub col_voltages: Vec<f64>,
    pub row_floating: Vec<bool>,
    pub col_floating: Vec<bool>,
    /// Signed current per cell (`j * rows + i`), positive input -> output.
    pub device_currents: Vec<f64>,
}

impl NetworkSolution {
    pub fn current(&self, j: usize, i: usize) -> f64 {
        self.device_currents[j * self.rows + i]
    }

    /// Voltages of the floating terminals, rows first.
    pub fn floating_voltages(&self) -> Vec<f64> {
        let rows = self.row_voltages.iter().zip(&self.row_floating);
        let cols = self.col_voltages.iter().zip(&self.col_floating);
        rows.chain(cols).filter(|(_, &f)| f).map(|(&v, _)| v).collect()
    }

    pub fn max_abs_current(&self) -> f64 {
        self.device_currents.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Largest net current into any floating terminal.
    pub fn max_kcl_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            if self.row_floating[i] {
                let net: f64 = (0..self.cols).map(|j| self.current(j, i)).sum();
                worst = worst.max(net.abs());
            }
        }
        for j in 0..self.cols {
            if self.col_floating[j] {
                let net: f64 = self.device_currents[j * self.rows..(j + 1) * self.rows].iter().sum();
                worst = worst.max(net.abs());
            }
        }
        worst
    }
}

pub fn solve_1r_network(xbar: &Crossbar, phase: &PhaseSpec) -> Result<NetworkSolution> {
    solve_1r_network_with(xbar, phase, SolverKind::Auto)
}

pub fn solve_1r_network_with(xbar: &Crossbar, phase: &PhaseSpec, solver: SolverKind) -> Result<NetworkSolution> {
    if xbar.arch() != Architecture::OneR {
        return Err(Error::ArchMismatch(format!("nodal solve on a {} crossbar", xbar.arch())));
    }
    let (m, n) = (xbar.rows(), xbar.cols());
    check_dim("network rows", m, phase.row_enabled.len())?;
    check_dim("network columns", n, phase.col_enabled.len())?;
    check_dim("network row voltages", m, phase.row_voltage.len())?;
    if !phase.row_enabled.iter().chain(&phase.col_enabled).any(|&e| e) {
        return Err(Error::SingularNetwork("every terminal is floating".into()));
    }

    let g = xbar.conductances();
    let row_floating: Vec<bool> = phase.row_enabled.iter().map(|e| !e).collect();
    let col_floating: Vec<bool> = phase.col_enabled.iter().map(|e| !e).collect();
    let mut row_voltages: Vec<f64> = (0..m)
        .map(|i| if phase.row_enabled[i] { phase.row_voltage[i] } else { 0.0 })
        .collect();
    let mut col_voltages = vec![0.0; n];

    // Unknown numbering: floating rows, then floating columns.
    let mut index = vec![usize::MAX; m + n];
    let mut unknowns = 0;
    for (k, &f) in row_floating.iter().chain(&col_floating).enumerate() {
        if f {
            index[k] = unknowns;
            unknowns += 1;
        }
    }

    if unknowns > 0 {
        let solver = match solver {
            SolverKind::Auto if m + n <= DENSE_NODE_LIMIT => SolverKind::Schur,
            SolverKind::Auto => SolverKind::Iterative,
            other => other,
        };
        let solution = match solver {
            SolverKind::Dense => dense_solve(&g, m, n, &index, unknowns, &row_voltages)?,
            SolverKind::Schur => schur_solve(&g, m, n, &index, unknowns, &row_voltages)?,
            _ => cg_solve(&g, m, n, &index, unknowns, &row_voltages)?,
        };
        for i in 0..m {
            if row_floating[i] {
                row_voltages[i] = solution[index[i]];
            }
        }
        for j in 0..n {
            if col_floating[j] {
                col_voltages[j] = solution[index[m + j]];
            }
        }
    }

    let mut device_currents = Vec::with_capacity(m * n);
    for j in 0..n {
        let vc = col_voltages[j];
        for i in 0..m {
            device_currents.push(g[j * m + i] * (row_voltages[i] - vc));
        }
    }

    Ok(NetworkSolution {
        rows: m,
        cols: n,
        row_voltages,
        col_voltages,
        row_floating,
        col_floating,
        device_currents,
    })
}

fn dense_solve(g: &[f64], m: usize, n: usize, index: &[usize], size: usize, row_v: &[f64]) -> Result<Vec<f64>> {
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut b = DVector::<f64>::zeros(size);
    for j in 0..n {
        let c = index[m + j];
        for i in 0..m {
            let gji = g[j * m + i];
            let r = index[i];
            match (r != usize::MAX, c != usize::MAX) {
                (true, true) => {
                    a[(r, r)] += gji;
                    a[(c, c)] += gji;
                    a[(r, c)] -= gji;
                    a[(c, r)] -= gji;
                }
                // Floating row tied to a grounded column.
                (true, false) => a[(r, r)] += gji,
                (false, true) => {
                    a[(c, c)] += gji;
                    b[c] += gji * row_v[i];
                }
                (false, false) => {}
            }
        }
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::SingularNetwork("conductance matrix is not positive definite".into()))?;
    Ok(chol.solve(&b).iter().copied().collect())
}

/// Floating rows couple only to columns and vice versa, so each side's own
/// block is diagonal. The larger side is eliminated and the Schur
/// complement on the smaller side is factored.
fn schur_solve(g: &[f64], m: usize, n: usize, index: &[usize], size: usize, row_v: &[f64]) -> Result<Vec<f64>> {
    let fr: Vec<usize> = (0..m).filter(|&i| index[i] != usize::MAX).collect();
    let fc: Vec<usize> = (0..n).filter(|&j| index[m + j] != usize::MAX).collect();
    let gji = |j: usize, i: usize| g[j * m + i];

    // Diagonals: every device touching the terminal.
    let d_r: Vec<f64> = fr.iter().map(|&i| (0..n).map(|j| gji(j, i)).sum()).collect();
    let d_c: Vec<f64> = fc.iter().map(|&j| g[j * m..(j + 1) * m].iter().sum()).collect();
    // Source injection into floating columns from driven rows.
    let b_c: Vec<f64> = fc
        .iter()
        .map(|&j| (0..m).filter(|&i| index[i] == usize::MAX).map(|i| gji(j, i) * row_v[i]).sum())
        .collect();

    let mut x = vec![0.0; size];
    let factor = |s: DMatrix<f64>| {
        s.cholesky()
            .ok_or_else(|| Error::SingularNetwork("Schur complement is not positive definite".into()))
    };
    if fc.len() <= fr.len() {
        // Unknowns: floating columns. Rows follow as weighted averages.
        let k = fc.len();
        let mut s = DMatrix::<f64>::zeros(k, k);
        for a in 0..k {
            s[(a, a)] = d_c[a];
        }
        for (r, &i) in fr.iter().enumerate() {
            let inv = 1.0 / d_r[r];
            for (a, &ja) in fc.iter().enumerate() {
                let ga = gji(ja, i) * inv;
                for (c, &jc) in fc.iter().enumerate().skip(a) {
                    let v = ga * gji(jc, i);
                    s[(a, c)] -= v;
                    if c != a {
                        s[(c, a)] -= v;
                    }
                }
            }
        }
        let cols = if k > 0 {
            factor(s)?.solve(&DVector::from_column_slice(&b_c))
        } else {
            DVector::zeros(0)
        };
        for (a, &j) in fc.iter().enumerate() {
            x[index[m + j]] = cols[a];
        }
        for (r, &i) in fr.iter().enumerate() {
            let acc: f64 = fc.iter().enumerate().map(|(a, &j)| gji(j, i) * cols[a]).sum();
            x[index[i]] = acc / d_r[r];
        }
    } else {
        // Unknowns: floating rows. Columns follow from their KCL.
        let k = fr.len();
        let mut s = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for r in 0..k {
            s[(r, r)] = d_r[r];
        }
        for (c, &j) in fc.iter().enumerate() {
            let inv = 1.0 / d_c[c];
            for (a, &ia) in fr.iter().enumerate() {
                let ga = gji(j, ia) * inv;
                rhs[a] += ga * b_c[c];
                for (q, &iq) in fr.iter().enumerate().skip(a) {
                    let v = ga * gji(j, iq);
                    s[(a, q)] -= v;
                    if q != a {
                        s[(q, a)] -= v;
                    }
                }
            }
        }
        let rows = factor(s)?.solve(&rhs);
        for (a, &i) in fr.iter().enumerate() {
            x[index[i]] = rows[a];
        }
        for (c, &j) in fc.iter().enumerate() {
            let acc: f64 = fr.iter().enumerate().map(|(a, &i)| gji(j, i) * rows[a]).sum();
            x[index[m + j]] = (b_c[c] + acc) / d_c[c];
        }
    }
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradient without forming the matrix.
fn cg_solve(g: &[f64], m: usize, n: usize, index: &[usize], size: usize, row_v: &[f64]) -> Result<Vec<f64>> {
    let row_f: Vec<bool> = (0..m).map(|i| index[i] != usize::MAX).collect();
    let col_f: Vec<bool> = (0..n).map(|j| index[m + j] != usize::MAX).collect();

    let mut diag = vec![0.0; size];
    let mut b = vec![0.0; size];
    for j in 0..n {
        for i in 0..m {
            let gji = g[j * m + i];
            if row_f[i] {
                diag[index[i]] += gji;
            }
            if col_f[j] {
                diag[index[m + j]] += gji;
                if !row_f[i] {
                    b[index[m + j]] += gji * row_v[i];
                }
            }
        }
    }

    let apply = |x: &[f64], out: &mut [f64]| {
        for (o, (&d, &xv)) in out.iter_mut().zip(diag.iter().zip(x)) {
            *o = d * xv;
        }
        for j in 0..n {
            if !col_f[j] {
                continue;
            }
            let c = index[m + j];
            for i in 0..m {
                if row_f[i] {
                    let r = index[i];
                    let gji = g[j * m + i];
                    out[r] -= gji * x[c];
                    out[c] -= gji * x[r];
                }
            }
        }
    };

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let b_norm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; size];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; size];
    let mut rz = dot(&r, &z);
    for _ in 0..(10 * size).max(100) {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularNetwork("conjugate gradient breakdown".into()));
        }
        let alpha = rz / pap;
        for k in 0..size {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if dot(&r, &r).sqrt() <= 1e-13 * b_norm {
            return Ok(x);
        }
        for k in 0..size {
            z[k] = r[k] / diag[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..size {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SingularNetwork("conjugate gradient did not converge".into()))
}
