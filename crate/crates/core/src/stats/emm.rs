//! Estimated marginal means over the reference grid, pairwise contrasts
//! with asymptotic z tests, and Benjamini-Hochberg adjustment.

use serde::Serialize;
use statrs::function::erf::erfc;

use super::design::{Factor, Setting};
use super::lmm::LmmFit;
use super::{Result, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Emm {
    /// `(factor, level)` for each factor the means are taken over.
    pub cell: Vec<(String, String)>,
    pub estimate: f64,
    pub se: f64,
    #[serde(skip)]
    pub weights: Vec<f64>,
}

impl Emm {
    pub fn level(&self, factor: &str) -> Option<&str> {
        self.cell
            .iter()
            .find(|(f, _)| f == factor)
            .map(|(_, l)| l.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmmContrast {
    pub label: String,
    pub delta_mu: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
    pub p_adj: f64,
    pub expected_sign: Option<i8>,
    pub supported: Option<bool>,
}

/// Two-sided p-value of a standard normal statistic.
pub fn normal_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Marginal means for every level combination of `by`, averaging model
/// predictions with equal weight over the levels of the remaining
/// categorical factors. Numeric covariates are held at their sample mean.
pub fn emmeans(fit: &LmmFit, by: &[&str]) -> Result<Vec<Emm>> {
    let factors = &fit.design.factors;
    let mut by_idx = Vec::new();
    for name in by {
        let i = factors
            .iter()
            .position(|f| f.name() == *name)
            .ok_or_else(|| StatsError::Lookup(format!("no factor named {name}")))?;
        if factors[i].levels().is_none() {
            return Err(StatsError::Lookup(format!("{name} is numeric")));
        }
        by_idx.push(i);
    }
    let axes: Vec<Vec<Setting>> = factors
        .iter()
        .map(|f| match f {
            Factor::Categorical { levels, .. } => (0..levels.len()).map(Setting::Level).collect(),
            Factor::Numeric { values, .. } => {
                vec![Setting::Value(
                    values.iter().sum::<f64>() / values.len() as f64,
                )]
            }
        })
        .collect();
    let others: Vec<usize> = (0..factors.len()).filter(|i| !by_idx.contains(i)).collect();
    let by_axes: Vec<Vec<Setting>> = by_idx.iter().map(|&i| axes[i].clone()).collect();
    let other_axes: Vec<Vec<Setting>> = others.iter().map(|&i| axes[i].clone()).collect();

    let mut out = Vec::new();
    for cell in product(&by_axes) {
        let combos = product(&other_axes);
        let mut w = vec![0.0; fit.p()];
        for combo in &combos {
            let mut point = vec![Setting::Value(0.0); factors.len()];
            for (k, &i) in by_idx.iter().enumerate() {
                point[i] = cell[k];
            }
            for (k, &i) in others.iter().enumerate() {
                point[i] = combo[k];
            }
            let row = fit.design.point_row(&point)?;
            for (a, b) in w.iter_mut().zip(row) {
                *a += b / combos.len() as f64;
            }
        }
        let (estimate, se) = fit.linear(&w);
        let labels = by_idx
            .iter()
            .zip(&cell)
            .map(|(&i, s)| {
                let Setting::Level(l) = s else { unreachable!() };
                (
                    factors[i].name().to_string(),
                    factors[i].levels().expect("categorical")[*l].clone(),
                )
            })
            .collect();
        out.push(Emm {
            cell: labels,
            estimate,
            se,
            weights: w,
        });
    }
    Ok(out)
}

fn product(axes: &[Vec<Setting>]) -> Vec<Vec<Setting>> {
    let mut out = vec![vec![]];
    for axis in axes {
        let mut next = Vec::new();
        for prefix in &out {
            for s in axis {
                let mut v: Vec<Setting> = prefix.clone();
                v.push(*s);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// `a - b` with its standard error from the fixed-effect covariance.
pub fn contrast(fit: &LmmFit, a: &Emm, b: &Emm, label: impl Into<String>) -> EmmContrast {
    let d: Vec<f64> = a
        .weights
        .iter()
        .zip(&b.weights)
        .map(|(x, y)| x - y)
        .collect();
    let (delta_mu, se) = fit.linear(&d);
    let z = if se > 0.0 {
        delta_mu / se
    } else if delta_mu == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(delta_mu)
    };
    let p = normal_p(z);
    EmmContrast {
        label: label.into(),
        delta_mu,
        se,
        z,
        p,
        p_adj: p,
        expected_sign: None,
        supported: None,
    }
}

/// Finds the marginal mean whose cell matches every `(factor, level)`.
pub fn find<'a>(emms: &'a [Emm], cell: &[(&str, &str)]) -> Result<&'a Emm> {
    emms.iter()
        .find(|e| cell.iter().all(|(f, l)| e.level(f) == Some(*l)))
        .ok_or_else(|| StatsError::Lookup(format!("no marginal mean for {cell:?}")))
}

/// Benjamini-Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(StatsError::Domain(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adj = vec![0.0; m];
    let mut running = 1.0_f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(p[i] * (m as f64 / (rank + 1) as f64));
        adj[i] = running.min(1.0);
    }
    Ok(adj)
}
