//! The cellular flow `V = A (DH)^⊥` with stream function `H = sin x₁ sin x₂`,
//! its exact derivatives, and the cell/strip regions used by the
//! reachability strategies.
//!
//! All trigonometric evaluations reduce their arguments into `[0, 2π)` first,
//! so points far along a trajectory see exactly the same field as their
//! images in the fundamental cell.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Sym2, Vec2};

#[inline]
fn sc(a: f64) -> (f64, f64) {
    wrap_angle(a).sin_cos()
}

/// Stream function `H(x) = sin x₁ sin x₂`.
#[inline]
pub fn stream(x: Vec2) -> f64 {
    sc(x.x).0 * sc(x.y).0
}

/// `DH = (cos x₁ sin x₂, sin x₁ cos x₂)`.
#[inline]
pub fn stream_gradient(x: Vec2) -> Vec2 {
    let (s1, c1) = sc(x.x);
    let (s2, c2) = sc(x.y);
    Vec2::new(c1 * s2, s1 * c2)
}

/// `D²H`: `-sin x₁ sin x₂` on the diagonal, `cos x₁ cos x₂` off it.
#[inline]
pub fn stream_hessian(x: Vec2) -> Sym2 {
    let (s1, c1) = sc(x.x);
    let (s2, c2) = sc(x.y);
    let h = s1 * s2;
    Sym2::new(-h, c1 * c2, -h)
}

/// Cell centre `P₀ = (π/2, π/2)`, where `H` attains its maximum 1.
pub const CELL_CENTER: Vec2 = Vec2::new(FRAC_PI_2, FRAC_PI_2);

/// Cellular flow of intensity `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellularFlow {
    amplitude: f64,
}

impl CellularFlow {
    /// `amplitude` must be finite and non-negative; `A = 0` is the quiescent
    /// (laminar) limit used by the baseline checks.
    pub fn new(amplitude: f64) -> Result<Self> {
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::invalid(
                "flowfield",
                "A",
                format!("flow intensity must be finite and >= 0, got {amplitude}"),
            ));
        }
        Ok(CellularFlow { amplitude })
    }

    pub fn quiescent() -> Self {
        CellularFlow { amplitude: 0.0 }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `max |V| = A`, attained on the separatrices.
    pub fn max_speed(&self) -> f64 {
        self.amplitude
    }

    /// `V(x) = A(-cos x₂ sin x₁, cos x₁ sin x₂)`.
    #[inline]
    pub fn velocity(&self, x: Vec2) -> Vec2 {
        let (s1, c1) = sc(x.x);
        let (s2, c2) = sc(x.y);
        Vec2::new(-self.amplitude * c2 * s1, self.amplitude * c1 * s2)
    }

    /// Divergence of `V`, identically zero; exposed for numerical checks.
    pub fn divergence(&self, _x: Vec2) -> f64 {
        0.0
    }
}

/// Which named set a [`CellRegion`] describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionKind {
    /// `Q_μ = {x ∈ [0,π]² : H(x) > μ}`.
    CellInterior,
    /// `Γ_μ = {x : min(|x₁|, |x₂|, |x₁-π|, |x₂-π|) < μ}`.
    BoundaryStrip,
    /// `Z_θ = ((θ, π-θ) × [0,π]) ∪ ([0,π] × (θ, π-θ))`.
    Cross,
    /// `D_μ = [-μ, μ]²`, the box around the corner `O₁`.
    CornerBox,
    /// The open cell `U₁ = (0,π)²`; translates give `U₂..U₄`.
    Cell,
}

/// A region of the plane: one of the named sets, translated by `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRegion {
    pub kind: RegionKind,
    pub parameter: f64,
    pub offset: Vec2,
}

/// Offsets `q₁..q₄` taking `U₁` to the four cells of `[-π,π]²`.
pub const CELL_OFFSETS: [Vec2; 4] = [
    Vec2::new(0.0, 0.0),
    Vec2::new(-PI, 0.0),
    Vec2::new(0.0, -PI),
    Vec2::new(-PI, -PI),
];

/// Corners `O₁..O₄` of `Q = [0,π]²`.
pub const CELL_CORNERS: [Vec2; 4] = [
    Vec2::new(0.0, 0.0),
    Vec2::new(PI, 0.0),
    Vec2::new(PI, PI),
    Vec2::new(0.0, PI),
];

impl CellRegion {
    pub fn interior(mu: f64) -> Self {
        Self::at(RegionKind::CellInterior, mu, Vec2::ZERO)
    }

    pub fn boundary_strip(mu: f64) -> Self {
        Self::at(RegionKind::BoundaryStrip, mu, Vec2::ZERO)
    }

    pub fn cross(theta: f64) -> Self {
        Self::at(RegionKind::Cross, theta, Vec2::ZERO)
    }

    pub fn corner_box(mu: f64) -> Self {
        Self::at(RegionKind::CornerBox, mu, Vec2::ZERO)
    }

    /// `U_i` for `i` in `1..=4`.
    pub fn cell(i: usize) -> Self {
        assert!((1..=4).contains(&i), "cells are numbered 1..=4");
        Self::at(RegionKind::Cell, 0.0, CELL_OFFSETS[i - 1])
    }

    pub const fn at(kind: RegionKind, parameter: f64, offset: Vec2) -> Self {
        CellRegion {
            kind,
            parameter,
            offset,
        }
    }

    pub fn translated(self, by: Vec2) -> Self {
        CellRegion {
            offset: self.offset + by,
            ..self
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        let y = x - self.offset;
        let m = self.parameter;
        match self.kind {
            RegionKind::CellInterior => in_closed_cell(y) && stream(y) > m,
            RegionKind::BoundaryStrip => {
                let d = y.x.abs().min(y.y.abs()).min((y.x - PI).abs()).min((y.y - PI).abs());
                d < m
            }
            RegionKind::Cross => {
                let band = |c: f64| c > m && c < PI - m;
                let full = |c: f64| (0.0..=PI).contains(&c);
                (band(y.x) && full(y.y)) || (full(y.x) && band(y.y))
            }
            RegionKind::CornerBox => y.x.abs() <= m && y.y.abs() <= m,
            RegionKind::Cell => y.x > 0.0 && y.x < PI && y.y > 0.0 && y.y < PI,
        }
    }

    /// Euclidean distance from `x` to the region (0 inside). Exact for the
    /// box-shaped kinds; for `CellInterior` the level-set gap `max(μ - H, 0)`
    /// divided by `|DH|` is used as a first-order surrogate.
    pub fn distance(&self, x: Vec2) -> f64 {
        if self.contains(x) {
            return 0.0;
        }
        let y = x - self.offset;
        let m = self.parameter;
        let boxd = |lo: Vec2, hi: Vec2| {
            let dx = (lo.x - y.x).max(0.0).max(y.x - hi.x);
            let dy = (lo.y - y.y).max(0.0).max(y.y - hi.y);
            dx.hypot(dy)
        };
        match self.kind {
            RegionKind::Cell => boxd(Vec2::ZERO, Vec2::new(PI, PI)),
            RegionKind::CornerBox => boxd(Vec2::new(-m, -m), Vec2::new(m, m)),
            RegionKind::Cross => {
                boxd(Vec2::new(m, 0.0), Vec2::new(PI - m, PI)).min(boxd(Vec2::new(0.0, m), Vec2::new(PI, PI - m)))
            }
            RegionKind::BoundaryStrip => {
                let d = y.x.abs().min(y.y.abs()).min((y.x - PI).abs()).min((y.y - PI).abs());
                (d - m).max(0.0)
            }
            RegionKind::CellInterior => {
                let outside = boxd(Vec2::ZERO, Vec2::new(PI, PI));
                let g = stream_gradient(y).norm().max(1e-12);
                outside + ((m - stream(y)).max(0.0) / g)
            }
        }
    }
}

fn in_closed_cell(y: Vec2) -> bool {
    (0.0..=PI).contains(&y.x) && (0.0..=PI).contains(&y.y)
}
