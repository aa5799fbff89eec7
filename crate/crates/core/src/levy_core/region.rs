//! Axis-aligned rectangles and finite unions of them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Minimal distance a region must keep from the origin.
pub const ORIGIN_GAP: f64 = 1e-8;

/// Closed axis-aligned box `∏ [lo_j, hi_j]`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rect(pub Vec<[f64; 2]>);

impl Rect {
    pub fn new(bounds: Vec<[f64; 2]>) -> Self {
        Rect(bounds)
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Rect(vec![[lo, hi]])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.0.iter().all(|[a, b]| a.is_finite() && b.is_finite())
    }

    pub fn volume(&self) -> f64 {
        self.0.iter().map(|[a, b]| (b - a).max(0.0)).product()
    }

    /// Euclidean distance from the origin.
    pub fn origin_distance(&self) -> f64 {
        self.0
            .iter()
            .map(|[a, b]| {
                if *a <= 0.0 && *b >= 0.0 {
                    0.0
                } else {
                    a.abs().min(b.abs())
                }
            })
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.0.iter().zip(x).all(|([a, b], v)| *v >= *a && *v <= *b)
    }

    pub fn scaled(&self, q: f64) -> Rect {
        Rect(
            self.0
                .iter()
                .map(|[a, b]| {
                    let (x, y) = (a * q, b * q);
                    if x <= y {
                        [x, y]
                    } else {
                        [y, x]
                    }
                })
                .collect(),
        )
    }

    /// `{x ∈ ℝ : x·v ∈ self}` as a closed interval, or `None` when empty.
    pub fn line_preimage(&self, v: &[f64]) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for ([a, b], vj) in self.0.iter().zip(v) {
            if *vj == 0.0 {
                if *a > 0.0 || *b < 0.0 {
                    return None;
                }
                continue;
            }
            let (x, y) = (a / vj, b / vj);
            let (x, y) = if x <= y { (x, y) } else { (y, x) };
            lo = lo.max(x);
            hi = hi.min(y);
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Rectangle extended by unconstrained coordinates; `positions[k]` is
    /// the slot of coordinate `k` of `self` in the larger space.
    pub fn embed(&self, dim: usize, positions: &[usize]) -> Rect {
        let mut out = vec![[f64::NEG_INFINITY, f64::INFINITY]; dim];
        for (k, p) in positions.iter().enumerate() {
            out[*p] = self.0[k];
        }
        Rect(out)
    }
}

/// Finite union of pairwise disjoint closed boxes, kept away from the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub boxes: Vec<Rect>,
}

impl Region {
    pub const MAX_BOXES: usize = 64;

    pub fn new(boxes: Vec<Rect>) -> Result<Self> {
        let r = Region { boxes };
        r.validate()?;
        Ok(r)
    }

    pub fn single(b: Rect) -> Result<Self> {
        Self::new(vec![b])
    }

    pub fn dim(&self) -> usize {
        self.boxes.first().map(Rect::dim).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boxes.is_empty() || self.boxes.len() > Self::MAX_BOXES {
            return invalid(format!(
                "a region needs between 1 and {} boxes, got {}",
                Self::MAX_BOXES,
                self.boxes.len()
            ));
        }
        let d = self.dim();
        for b in &self.boxes {
            if b.dim() != d || d == 0 {
                return invalid("all boxes of a region must share one positive dimension");
            }
            if b.0.iter().any(|[a, c]| a.is_nan() || c.is_nan() || a > c) {
                return invalid(format!("malformed box {:?}", b.0));
            }
            if b.origin_distance() < ORIGIN_GAP {
                return invalid(format!(
                    "box {:?} comes within {ORIGIN_GAP:e} of the origin",
                    b.0
                ));
            }
        }
        for (i, a) in self.boxes.iter().enumerate() {
            for b in &self.boxes[i + 1..] {
                let overlap = a
                    .0
                    .iter()
                    .zip(&b.0)
                    .all(|([a0, a1], [b0, b1])| a0.max(*b0) < a1.min(*b1));
                if overlap {
                    return invalid(format!("boxes {:?} and {:?} overlap", a.0, b.0));
                }
            }
        }
        Ok(())
    }

    pub fn scaled(&self, q: f64) -> Region {
        Region {
            boxes: self.boxes.iter().map(|b| b.scaled(q)).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    pub fn embed(&self, dim: usize, positions: &[usize]) -> Region {
        Region {
            boxes: self.boxes.iter().map(|b| b.embed(dim, positions)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preimage_of_a_box_along_a_line() {
        let b = Rect::new(vec![[1.0, 2.0], [-1.0, 1.0]]);
        assert_eq!(b.line_preimage(&[0.5, 0.1]), Some((2.0, 4.0)));
        assert_eq!(b.line_preimage(&[-1.0, 0.0]), Some((-2.0, -1.0)));
        assert_eq!(b.line_preimage(&[0.0, 1.0]), None);
    }

    #[test]
    fn origin_and_overlap_rules() {
        assert!(Region::single(Rect::interval(-1.0, 1.0)).is_err());
        assert!(Region::single(Rect::interval(1e-9, 1.0)).is_err());
        assert!(Region::single(Rect::interval(1e-3, 1.0)).is_ok());
        assert!(Region::new(vec![Rect::interval(1.0, 3.0), Rect::interval(2.0, 4.0)]).is_err());
        assert!(Region::new(vec![Rect::interval(1.0, 2.0), Rect::interval(2.0, 4.0)]).is_ok());
    }

    #[test]
    fn scaling_flips_negative_factors() {
        let b = Rect::interval(1.0, 2.0).scaled(-2.0);
        assert_eq!(b.0, vec![[-4.0, -2.0]]);
    }
}
