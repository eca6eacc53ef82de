//! Entropy-regularised transport by Sinkhorn scaling in the log domain.
//!
//! The coupling is `p_ij = a_i b_j exp((f_i + g_j - c_ij) / gamma)`. Working
//! with the potentials `f, g` instead of kernel scalings keeps the iteration
//! finite for very small `gamma`. Without a warm start the regularisation is
//! annealed geometrically from the cost scale down to the target.

use super::cost::CostMatrix;
use crate::error::{Error, Result};

/// Dual potentials, reusable as a warm start.
#[derive(Clone, Debug, Default)]
pub struct SinkhornPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

pub(crate) struct SinkhornOutput {
    pub entries: Vec<(usize, usize, f64)>,
    pub potentials: SinkhornPotentials,
}

/// Entries of the coupling below this are dropped from the returned plan.
const DROP: f64 = 1e-18;

fn lse_row(vals: impl Iterator<Item = f64>, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(vals);
    let m = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + buf.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn sinkhorn(
    a: &[f64],
    b: &[f64],
    cost: &CostMatrix,
    gamma: f64,
    tol: f64,
    max_iters: usize,
    warm: Option<&SinkhornPotentials>,
) -> Result<SinkhornOutput> {
    let rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
    let la: Vec<f64> = rows.iter().map(|&i| a[i].ln()).collect();
    let lb: Vec<f64> = cols.iter().map(|&j| b[j].ln()).collect();
    let n = a.len();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; b.len()];
    let mut schedule = Vec::new();
    match warm {
        Some(p) if p.f.len() == n && p.g.len() == b.len() => {
            f.clone_from(&p.f);
            g.clone_from(&p.g);
            schedule.push(gamma);
        }
        _ => {
            let mut gm = cost.max().max(gamma);
            while gm > gamma {
                schedule.push(gm);
                gm *= 0.5;
            }
            schedule.push(gamma);
        }
    }
    let mut buf = Vec::with_capacity(n);
    let mut iters = 0;
    let mut residual = f64::INFINITY;
    let last = schedule.len() - 1;
    for (stage, &gm) in schedule.iter().enumerate() {
        let (stage_tol, stage_max) = if stage == last { (tol, max_iters) } else { (tol.max(1e-3), 200) };
        let mut k = 0;
        loop {
            // g update makes the column marginals exact.
            for &j in &cols {
                let v = lse_row(rows.iter().zip(&la).map(|(&i, lai)| lai + (f[i] - cost.get(i, j)) / gm), &mut buf);
                g[j] = -gm * v;
            }
            for &i in &rows {
                let row = cost.row(i);
                let v = lse_row(cols.iter().zip(&lb).map(|(&j, lbj)| lbj + (g[j] - row[j]) / gm), &mut buf);
                f[i] = -gm * v;
            }
            k += 1;
            iters += 1;
            if k % 8 != 0 && k < stage_max {
                continue;
            }
            // Rows are now exact; measure the column violation.
            let mut err = 0.0;
            for (cj, &j) in cols.iter().enumerate() {
                let s: f64 = rows
                    .iter()
                    .zip(&la)
                    .map(|(&i, lai)| (lai + lb[cj] + (f[i] + g[j] - cost.get(i, j)) / gm).exp())
                    .sum();
                err += (s - b[j]).abs();
            }
            residual = err;
            if err <= stage_tol || k >= stage_max {
                break;
            }
        }
    }
    if !(residual <= tol) {
        return Err(Error::Iteration { what: "Sinkhorn".into(), iters, residual });
    }
    let mut entries = Vec::new();
    for (ri, &i) in rows.iter().enumerate() {
        let row = cost.row(i);
        for (cj, &j) in cols.iter().enumerate() {
            let p = (la[ri] + lb[cj] + (f[i] + g[j] - row[j]) / gamma).exp();
            if p > DROP {
                entries.push((i, j, p));
            }
        }
    }
    Ok(SinkhornOutput { entries, potentials: SinkhornPotentials { f, g } })
}
