//! Plate geometries in the top-left quadrant: `x ∈ [−L, 0]`, `y ∈ [0, L]`,
//! with an optional circular hole of radius `R` centred at the origin.
//! The edges `x = 0` and `y = 0` are symmetry planes.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::network::AnsatzConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Left,
    Top,
    Right,
    Bottom,
    Hole,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [Self::Left, Self::Top, Self::Right, Self::Bottom, Self::Hole];

    pub fn name(self) -> &'static str {
        match self {
            Self::Left => "left",
            Self::Top => "top",
            Self::Right => "right",
            Self::Bottom => "bottom",
            Self::Hole => "hole",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateGeometry {
    /// Edge length `L` in mm.
    pub edge_length: f64,
    /// Hole radius `R` in mm; zero for a plain square plate.
    pub hole_radius: f64,
    /// Traction vector on the left edge in N/mm².
    pub left_traction: [f64; 2],
}

impl Default for PlateGeometry {
    fn default() -> Self {
        Self::quarter_plate()
    }
}

/// Neumann segment with its prescribed traction. Components whose mask entry
/// is `false` are not penalized (the matching displacement component is
/// prescribed instead).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannSegment {
    pub tag: BoundaryTag,
    pub t_bar: [f64; 2],
    pub mask: [bool; 2],
    shape: SegmentShape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SegmentShape {
    Line { a: [f64; 2], b: [f64; 2], normal: [f64; 2] },
    Arc { radius: f64, theta0: f64, theta1: f64 },
}

impl NeumannSegment {
    /// Point at arc-length fraction `s ∈ [0, 1]` and its outward unit normal.
    pub fn point(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        match self.shape {
            SegmentShape::Line { a, b, normal } => ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], normal),
            SegmentShape::Arc { radius, theta0, theta1 } => {
                let t = theta0 + s * (theta1 - theta0);
                let (sin, cos) = t.sin_cos();
                ([radius * cos, radius * sin], [-cos, -sin])
            }
        }
    }

    /// `n` points at the midpoints of a uniform subdivision.
    pub fn uniform_points(&self, n: usize) -> Vec<([f64; 2], [f64; 2])> {
        (0..n).map(|i| self.point((i as f64 + 0.5) / n as f64)).collect()
    }

    pub fn length(&self) -> f64 {
        match self.shape {
            SegmentShape::Line { a, b, .. } => ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt(),
            SegmentShape::Arc { radius, theta0, theta1 } => radius * (theta1 - theta0).abs(),
        }
    }
}

impl PlateGeometry {
    pub fn quarter_plate() -> Self {
        Self { edge_length: 100.0, hole_radius: 10.0, left_traction: [-100.0, 0.0] }
    }

    pub fn square(edge_length: f64, left_traction: [f64; 2]) -> Self {
        Self { edge_length, hole_radius: 0.0, left_traction }
    }

    pub fn has_hole(&self) -> bool {
        self.hole_radius > 0.0
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.edge_length > 0.0) {
            return Err("edge length must be positive".into());
        }
        if !(self.hole_radius >= 0.0 && self.hole_radius < self.edge_length) {
            return Err("hole radius must lie in [0, edge length)".into());
        }
        Ok(())
    }

    pub fn x_min(&self) -> [f64; 2] {
        [-self.edge_length, 0.0]
    }

    pub fn x_max(&self) -> [f64; 2] {
        [0.0, self.edge_length]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let l = self.edge_length;
        let inside_box = (-l..=0.0).contains(&x[0]) && (0.0..=l).contains(&x[1]);
        inside_box && x[0] * x[0] + x[1] * x[1] >= self.hole_radius * self.hole_radius
    }

    pub fn area(&self) -> f64 {
        self.edge_length * self.edge_length - PI * self.hole_radius * self.hole_radius / 4.0
    }

    /// Neumann segments; `symmetry_shear` adds the zero-shear conditions on the
    /// two symmetry planes.
    pub fn neumann_segments(&self, symmetry_shear: bool) -> Vec<NeumannSegment> {
        let (l, r) = (self.edge_length, self.hole_radius);
        let line = |tag, a, b, normal, t_bar, mask| NeumannSegment { tag, t_bar, mask, shape: SegmentShape::Line { a, b, normal } };
        let mut segs = vec![
            line(BoundaryTag::Left, [-l, 0.0], [-l, l], [-1.0, 0.0], self.left_traction, [true, true]),
            line(BoundaryTag::Top, [-l, l], [0.0, l], [0.0, 1.0], [0.0, 0.0], [true, true]),
        ];
        if self.has_hole() {
            segs.push(NeumannSegment {
                tag: BoundaryTag::Hole,
                t_bar: [0.0, 0.0],
                mask: [true, true],
                shape: SegmentShape::Arc { radius: r, theta0: FRAC_PI_2, theta1: PI },
            });
        }
        if symmetry_shear {
            // u_x = 0 holds on x = 0; only the shear traction is free
            segs.push(line(BoundaryTag::Right, [0.0, r], [0.0, l], [1.0, 0.0], [0.0, 0.0], [false, true]));
            segs.push(line(BoundaryTag::Bottom, [-l, 0.0], [-r, 0.0], [0.0, -1.0], [0.0, 0.0], [true, false]));
        }
        segs
    }

    /// Ansatz bounds for this geometry: Dirichlet planes at `x = 0` for `u_x`
    /// and `y = 0` for `u_y`, both with zero prescribed displacement.
    pub fn ansatz_config(&self, kappa_min: Vec<f64>, kappa_max: Vec<f64>, u_min: [f64; 2], u_max: [f64; 2]) -> AnsatzConfig {
        AnsatzConfig { x_min: self.x_min(), x_max: self.x_max(), kappa_min, kappa_max, u_min, u_max, x_bc: [0.0, 0.0], g_ext: [0.0, 0.0] }
    }
}
