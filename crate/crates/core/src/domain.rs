//! Bounded domains `Ω ⊂ R^N`: axis-aligned boxes (intervals when `N = 1`) and balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::unit_ball_volume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// `∏ (lower_i, upper_i)`; an interval when there is one axis.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Box,
    Ball,
}

impl Domain {
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new_box(vec![lower], vec![upper])
    }

    pub fn unit_interval() -> Self {
        Domain::Box { lower: vec![0.0], upper: vec![1.0] }
    }

    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Domain::Box { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn unit_cube(dim: usize) -> Self {
        Domain::Box { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    /// Checks the shape invariants (non-empty, finite, `lower < upper` on every axis).
    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Domain(format!(
                        "box needs matching non-empty bounds, got {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                for (axis, (lo, hi)) in lower.iter().zip(upper).enumerate() {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(Error::Domain(format!(
                            "axis {axis}: need finite lower < upper, got ({lo}, {hi})"
                        )));
                    }
                }
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Domain("ball center must be a finite point".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            Domain::Box { lower, .. } if lower.len() == 1 => DomainKind::Interval,
            Domain::Box { .. } => DomainKind::Box,
            Domain::Ball { .. } => DomainKind::Ball,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    /// Lebesgue measure `|Ω|`.
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| u - l).product(),
            Domain::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
        }
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| (u - l) * (u - l)).sum::<f64>().sqrt()
            }
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Membership in the closure of `Ω`.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).all(|(xi, (l, u))| *l <= *xi && *xi <= *u)
            }
            Domain::Ball { center, radius } => euclidean(x, center) <= *radius,
        }
    }

    /// Distance from an interior point to the boundary (0 outside the closure).
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match self {
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(xi, (l, u))| (xi - l).min(u - xi))
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { center, radius } => radius - euclidean(x, center),
        }
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lower, upper } => (lower.clone(), upper.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
