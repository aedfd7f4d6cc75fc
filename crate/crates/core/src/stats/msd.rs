//! Squared articulatory distance from the correct-production means, and
//! 95% confidence ellipses for plotting.

use std::fmt;

use nalgebra::{Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Result, StatsError};
use crate::tv::Channel;

/// 95% quantile of the chi-square distribution with two degrees of freedom.
pub const CHI2_95_2DF: f64 = 5.991;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Articulator {
    Lips,
    TongueTip,
    TongueBody,
}

impl Articulator {
    pub const ALL: [Articulator; 3] = [
        Articulator::Lips,
        Articulator::TongueTip,
        Articulator::TongueBody,
    ];

    /// `(location, degree)` channels.
    pub fn channels(self) -> (Channel, Channel) {
        match self {
            Articulator::Lips => (Channel::Lp, Channel::La),
            Articulator::TongueTip => (Channel::Ttcl, Channel::Ttcd),
            Articulator::TongueBody => (Channel::Tbcl, Channel::Tbcd),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Articulator::Lips => "lips",
            Articulator::TongueTip => "tongue_tip",
            Articulator::TongueBody => "tongue_body",
        }
    }
}

impl fmt::Display for Articulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArticulatorMsd {
    pub file_id: String,
    pub articulator: Articulator,
    pub msd: f64,
}

/// `(loc - mean_loc)^2 + (deg - mean_deg)^2` for each articulator. Both
/// lookups return `None` for a missing channel.
pub fn articulatory_msd(
    file_id: &str,
    obs: impl Fn(Channel) -> Option<f64>,
    correct_means: impl Fn(Channel) -> Option<f64>,
) -> Result<[ArticulatorMsd; 3]> {
    let one = |a: Articulator| -> Result<ArticulatorMsd> {
        let (loc, deg) = a.channels();
        let get = |f: &dyn Fn(Channel) -> Option<f64>, c: Channel| {
            f(c).filter(|v| v.is_finite())
                .ok_or_else(|| StatsError::MissingData(format!("{} for {file_id}", c.name())))
        };
        let dl = get(&obs, loc)? - get(&correct_means, loc)?;
        let dd = get(&obs, deg)? - get(&correct_means, deg)?;
        Ok(ArticulatorMsd {
            file_id: file_id.to_string(),
            articulator: a,
            msd: dl * dl + dd * dd,
        })
    };
    Ok([
        one(Articulator::Lips)?,
        one(Articulator::TongueTip)?,
        one(Articulator::TongueBody)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Major then minor semi-axis.
    pub axes: [f64; 2],
    /// Major-axis angle from +x, radians in (-pi/2, pi/2].
    pub angle: f64,
    pub n: usize,
}

pub fn confidence_ellipse(points: &[[f64; 2]]) -> Result<Ellipse> {
    let n = points.len();
    if n < 3 {
        return Err(StatsError::Degenerate(format!("{n} points")));
    }
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let k = 1.0 / (n - 1) as f64;
    let cov = Matrix2::new(sxx * k, sxy * k, sxy * k, syy * k);
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(StatsError::Degenerate("non-finite covariance".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let (i_max, i_min) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let (l_max, l_min) = (eig.eigenvalues[i_max], eig.eigenvalues[i_min]);
    if !(l_min > 1e-12 * l_max.abs().max(f64::MIN_POSITIVE)) {
        return Err(StatsError::Degenerate("covariance is singular".into()));
    }
    let v = eig.eigenvectors.column(i_max);
    let mut angle = v[1].atan2(v[0]);
    if angle <= -std::f64::consts::FRAC_PI_2 {
        angle += std::f64::consts::PI;
    } else if angle > std::f64::consts::FRAC_PI_2 {
        angle -= std::f64::consts::PI;
    }
    Ok(Ellipse {
        center: [mx, my],
        axes: [(CHI2_95_2DF * l_max).sqrt(), (CHI2_95_2DF * l_min).sqrt()],
        angle,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn means(c: Channel) -> Option<f64> {
        Some(match c {
            Channel::La => 0.1,
            Channel::Lp => -0.2,
            Channel::Ttcl => 0.3,
            Channel::Ttcd => 0.0,
            Channel::Tbcl => -0.5,
            Channel::Tbcd => 0.25,
            _ => return None,
        })
    }

    #[test]
    fn msd_examples() {
        let zero = articulatory_msd("f", means, means).unwrap();
        assert!(zero.iter().all(|m| m.msd == 0.0));
        let obs = |c: Channel| {
            means(c).map(|v| {
                if c == Channel::Ttcl {
                    v + 0.3
                } else if c == Channel::Ttcd {
                    v + 0.4
                } else {
                    v
                }
            })
        };
        let m = articulatory_msd("f", obs, means).unwrap();
        assert!((m[1].msd - 0.25).abs() < 1e-12);
        assert_eq!(m[0].msd, 0.0);
        let obs2 = |c: Channel| {
            means(c).map(|v| {
                if c == Channel::Ttcl {
                    v + 0.6
                } else if c == Channel::Ttcd {
                    v + 0.8
                } else {
                    v
                }
            })
        };
        let m2 = articulatory_msd("f", obs2, means).unwrap();
        assert!((m2[1].msd - 4.0 * m[1].msd).abs() < 1e-12);
        let missing = |c: Channel| if c == Channel::La { None } else { means(c) };
        assert!(matches!(
            articulatory_msd("f", missing, means),
            Err(StatsError::MissingData(_))
        ));
    }

    #[test]
    fn isotropic_ellipse() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<[f64; 2]> = (0..100_000)
            .map(|_| {
                [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ]
            })
            .collect();
        let e = confidence_ellipse(&pts).unwrap();
        let target = CHI2_95_2DF.sqrt();
        for a in e.axes {
            assert!((a / target - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn rotation_and_translation() {
        let pts: Vec<[f64; 2]> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.7;
                [3.0 * t.cos() + 0.1 * (i % 3) as f64, t.sin()]
            })
            .collect();
        let e = confidence_ellipse(&pts).unwrap();
        let th: f64 = 0.4;
        let rot: Vec<[f64; 2]> = pts
            .iter()
            .map(|p| {
                [
                    th.cos() * p[0] - th.sin() * p[1],
                    th.sin() * p[0] + th.cos() * p[1],
                ]
            })
            .collect();
        let r = confidence_ellipse(&rot).unwrap();
        assert!((r.axes[0] - e.axes[0]).abs() < 1e-9 && (r.axes[1] - e.axes[1]).abs() < 1e-9);
        let mut d = r.angle - e.angle - th;
        d -= std::f64::consts::PI * (d / std::f64::consts::PI).round();
        assert!(d.abs() < 1e-9);
        let moved: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] + 5.0, p[1] - 2.0]).collect();
        let m = confidence_ellipse(&moved).unwrap();
        assert!((m.center[0] - e.center[0] - 5.0).abs() < 1e-12);
        assert!((m.axes[0] - e.axes[0]).abs() < 1e-9 && (m.angle - e.angle).abs() < 1e-9);
        assert!(confidence_ellipse(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }
}
