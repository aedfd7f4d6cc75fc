//! Treatment-coded fixed-effect design with the full interaction of every
//! declared factor, in R's column naming and ordering.

use super::{Result, StatsError};

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// The first level is the reference.
    Categorical {
        name: String,
        levels: Vec<String>,
        values: Vec<usize>,
    },
    Numeric {
        name: String,
        values: Vec<f64>,
    },
}

impl Factor {
    /// Builds a categorical factor from labels; `levels` fixes the order.
    pub fn categorical(name: &str, levels: Vec<String>, labels: &[String]) -> Result<Self> {
        let values = labels
            .iter()
            .map(|l| {
                levels.iter().position(|v| v == l).ok_or_else(|| {
                    StatsError::Lookup(format!("level `{l}` not declared for {name}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Factor::Categorical {
            name: name.to_string(),
            levels,
            values,
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Factor::Categorical { name, .. } | Factor::Numeric { name, .. } => name,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Factor::Categorical { values, .. } => values.len(),
            Factor::Numeric { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn levels(&self) -> Option<&[String]> {
        match self {
            Factor::Categorical { levels, .. } => Some(levels),
            Factor::Numeric { .. } => None,
        }
    }
}

/// Setting of one factor at a design point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Level(usize),
    Value(f64),
}

/// One model column: a product of (factor, non-reference level or numeric)
/// parts. The intercept has no parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub parts: Vec<(usize, Option<usize>)>,
}

impl Column {
    pub fn eval(&self, point: &[Setting]) -> f64 {
        let mut v = 1.0;
        for &(f, level) in &self.parts {
            match (point[f], level) {
                (Setting::Level(l), Some(want)) => {
                    if l != want {
                        return 0.0;
                    }
                }
                (Setting::Value(x), None) => v *= x,
                _ => unreachable!("setting kind does not match factor kind"),
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct Design {
    pub factors: Vec<Factor>,
    /// Estimable columns kept in the model.
    pub columns: Vec<Column>,
    /// Columns dropped because no row populates them.
    pub dropped: Vec<Column>,
    /// Row-major `n x p`.
    pub x: Vec<f64>,
    pub n: usize,
}

impl Design {
    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p()..(i + 1) * self.p()]
    }

    pub fn settings(&self, i: usize) -> Vec<Setting> {
        self.factors
            .iter()
            .map(|f| match f {
                Factor::Categorical { values, .. } => Setting::Level(values[i]),
                Factor::Numeric { values, .. } => Setting::Value(values[i]),
            })
            .collect()
    }

    /// Design row at an arbitrary point, or an estimability error when the
    /// point touches a dropped column.
    pub fn point_row(&self, point: &[Setting]) -> Result<Vec<f64>> {
        if let Some(c) = self.dropped.iter().find(|c| c.eval(point) != 0.0) {
            return Err(StatsError::Estimability(format!(
                "cell requires unobserved column {}",
                c.name
            )));
        }
        Ok(self.columns.iter().map(|c| c.eval(point)).collect())
    }

    pub fn intercept_only(n: usize) -> Self {
        Self {
            factors: vec![],
            columns: vec![Column {
                name: "(Intercept)".into(),
                parts: vec![],
            }],
            dropped: vec![],
            x: vec![1.0; n],
            n,
        }
    }

    pub fn build(factors: Vec<Factor>) -> Result<Self> {
        let n = factors.first().map(|f| f.len()).unwrap_or(0);
        if factors.iter().any(|f| f.len() != n) {
            return Err(StatsError::Shape("factor lengths differ".into()));
        }
        if n == 0 {
            return Err(StatsError::Empty("design has no rows".into()));
        }
        let mut all = vec![Column {
            name: "(Intercept)".into(),
            parts: vec![],
        }];
        for size in 1..=factors.len() {
            for subset in subsets(factors.len(), size) {
                let mut cols: Vec<Column> = vec![Column {
                    name: String::new(),
                    parts: vec![],
                }];
                for &f in &subset {
                    let mut next = Vec::new();
                    for c in &cols {
                        match &factors[f] {
                            Factor::Categorical { name, levels, .. } => {
                                for (l, label) in levels.iter().enumerate().skip(1) {
                                    let mut parts = c.parts.clone();
                                    parts.push((f, Some(l)));
                                    next.push(Column {
                                        name: join(&c.name, &format!("{name}{label}")),
                                        parts,
                                    });
                                }
                            }
                            Factor::Numeric { name, .. } => {
                                let mut parts = c.parts.clone();
                                parts.push((f, None));
                                next.push(Column {
                                    name: join(&c.name, name),
                                    parts,
                                });
                            }
                        }
                    }
                    cols = next;
                }
                all.extend(cols);
            }
        }

        let points: Vec<Vec<Setting>> = (0..n)
            .map(|i| {
                factors
                    .iter()
                    .map(|f| match f {
                        Factor::Categorical { values, .. } => Setting::Level(values[i]),
                        Factor::Numeric { values, .. } => Setting::Value(values[i]),
                    })
                    .collect()
            })
            .collect();
        let mut columns = Vec::new();
        let mut dropped = Vec::new();
        let mut data: Vec<Vec<f64>> = Vec::new();
        for c in all {
            let v: Vec<f64> = points.iter().map(|p| c.eval(p)).collect();
            if v.iter().all(|x| *x == 0.0) {
                dropped.push(c);
            } else {
                columns.push(c);
                data.push(v);
            }
        }
        let aliased = aliased_columns(&data);
        if !aliased.is_empty() {
            let names: Vec<String> = aliased.iter().map(|&j| columns[j].name.clone()).collect();
            return Err(StatsError::Rank(names));
        }
        let p = columns.len();
        let mut x = vec![0.0; n * p];
        for (j, col) in data.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                x[i * p + j] = *v;
            }
        }
        Ok(Self {
            factors,
            columns,
            dropped,
            x,
            n,
        })
    }
}

fn join(prefix: &str, part: &str) -> String {
    if prefix.is_empty() {
        part.to_string()
    } else {
        format!("{prefix}:{part}")
    }
}

/// Index subsets of `0..n` of a given size in lexicographic order.
fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Modified Gram-Schmidt; a column whose residual norm falls below 1e-9 of
/// its original norm is aliased with earlier columns.
fn aliased_columns(cols: &[Vec<f64>]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut aliased = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        let norm0 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = c.clone();
        for q in &basis {
            let d: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= d * qi;
            }
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-9 * norm0.max(f64::MIN_POSITIVE) {
            aliased.push(j);
        } else {
            basis.push(r.into_iter().map(|v| v / norm).collect());
        }
    }
    aliased
}
