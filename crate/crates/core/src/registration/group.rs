use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};

const GROUP_TOL: f64 = 1e-9;

/// Planar transformation groups, ordered by inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    SO2,
    SE2,
    SA2,
    A2,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::SO2, Group::SE2, Group::SA2, Group::A2];

    /// Projects onto the Lie algebra. Orthogonal for any metric with
    /// `p11 = p22` and `p12 = p21`.
    pub fn project(self, x: &Matrix3<f64>) -> Matrix3<f64> {
        let mut a = Matrix2::new(x[(0, 0)], x[(0, 1)], x[(1, 0)], x[(1, 1)]);
        let mut b = Vector2::new(x[(0, 2)], x[(1, 2)]);
        match self {
            Group::SO2 => {
                a = 0.5 * (a - a.transpose());
                b = Vector2::zeros();
            }
            Group::SE2 => a = 0.5 * (a - a.transpose()),
            Group::SA2 => {
                let half = 0.5 * (a[(0, 0)] - a[(1, 1)]);
                a[(0, 0)] = half;
                a[(1, 1)] = -half;
            }
            Group::A2 => {}
        }
        block(&a, &b, 0.0)
    }

    fn check_algebra(self, h: &Matrix3<f64>) -> bool {
        let scale = 1.0 + h.amax();
        let tol = 1e-12 * scale;
        let bottom = h[(2, 0)].abs().max(h[(2, 1)].abs()).max(h[(2, 2)].abs()) <= tol;
        let skew = h[(0, 0)].abs() <= tol && h[(1, 1)].abs() <= tol && (h[(0, 1)] + h[(1, 0)]).abs() <= tol;
        let translation = h[(0, 2)].abs().max(h[(1, 2)].abs()) <= tol;
        bottom
            && match self {
                Group::SO2 => skew && translation,
                Group::SE2 => skew,
                Group::SA2 => (h[(0, 0)] + h[(1, 1)]).abs() <= tol,
                Group::A2 => true,
            }
    }

    fn check_element(self, m: &Matrix3<f64>) -> bool {
        let bottom = m[(2, 0)].abs() <= GROUP_TOL
            && m[(2, 1)].abs() <= GROUP_TOL
            && (m[(2, 2)] - 1.0).abs() <= GROUP_TOL;
        let a = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let det = a.determinant();
        let orthogonal = (a.transpose() * a - Matrix2::identity()).amax() <= GROUP_TOL;
        let translation = m[(0, 2)].abs().max(m[(1, 2)].abs()) <= GROUP_TOL;
        bottom
            && match self {
                Group::SO2 => orthogonal && (det - 1.0).abs() <= GROUP_TOL && translation,
                Group::SE2 => orthogonal && (det - 1.0).abs() <= GROUP_TOL,
                Group::SA2 => (det - 1.0).abs() <= GROUP_TOL,
                Group::A2 => det.abs() > GROUP_TOL && det.is_finite(),
            }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Group::SO2 => "SO2",
            Group::SE2 => "SE2",
            Group::SA2 => "SA2",
            Group::A2 => "A2",
        };
        f.write_str(s)
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SO2" => Ok(Group::SO2),
            "SE2" => Ok(Group::SE2),
            "SA2" => Ok(Group::SA2),
            "A2" => Ok(Group::A2),
            _ => Err(Error::InvalidParameter(format!("unknown group '{s}'"))),
        }
    }
}

fn block(a: &Matrix2<f64>, b: &Vector2<f64>, corner: f64) -> Matrix3<f64> {
    Matrix3::new(a[(0, 0)], a[(0, 1)], b.x, a[(1, 0)], a[(1, 1)], b.y, 0.0, 0.0, corner)
}

/// Homogeneous `3 x 3` transform belonging to `group`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    matrix: Matrix3<f64>,
    group: Group,
}

impl GroupElement {
    pub fn new(matrix: Matrix3<f64>, group: Group) -> Result<Self> {
        if !group.check_element(&matrix) {
            return Err(Error::InvalidParameter(format!("matrix is not an element of {group}")));
        }
        Ok(Self { matrix, group })
    }

    pub fn identity(group: Group) -> Self {
        Self { matrix: Matrix3::identity(), group }
    }

    /// Rotation by `theta_deg` degrees followed by translation `(x, y)`.
    pub fn rigid(x: f64, y: f64, theta_deg: f64) -> Self {
        let (s, c) = theta_deg.to_radians().sin_cos();
        Self { matrix: Matrix3::new(c, -s, x, s, c, y, 0.0, 0.0, 1.0), group: Group::SE2 }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn translation(&self) -> (f64, f64) {
        (self.matrix[(0, 2)], self.matrix[(1, 2)])
    }

    /// Rotation angle of the linear part in degrees.
    pub fn angle_deg(&self) -> f64 {
        self.matrix[(1, 0)].atan2(self.matrix[(0, 0)]).to_degrees()
    }

    /// `self * other`; the result lives in the larger of the two groups.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let mut m = self.matrix * other.matrix;
        m[(2, 0)] = 0.0;
        m[(2, 1)] = 0.0;
        m[(2, 2)] = 1.0;
        GroupElement { matrix: m, group: self.group.max(other.group) }
    }

    pub fn inverse(&self) -> GroupElement {
        let a = Matrix2::new(self.matrix[(0, 0)], self.matrix[(0, 1)], self.matrix[(1, 0)], self.matrix[(1, 1)]);
        let inv = a.try_inverse().expect("group elements are invertible");
        let (tx, ty) = self.translation();
        let b = -(inv * Vector2::new(tx, ty));
        GroupElement { matrix: block(&inv, &b, 1.0), group: self.group }
    }

    /// Reinterprets the element in a larger group.
    pub fn widen(&self, group: Group) -> Result<GroupElement> {
        GroupElement::new(self.matrix, group)
    }

    /// Transfers to the next finer pyramid level, whose coordinates are doubled.
    pub fn refine(&self) -> GroupElement {
        let mut m = self.matrix;
        m[(0, 2)] *= 2.0;
        m[(1, 2)] *= 2.0;
        GroupElement { matrix: m, group: self.group }
    }

    /// Transfers to the next coarser pyramid level.
    pub fn coarsen(&self) -> GroupElement {
        let mut m = self.matrix;
        m[(0, 2)] *= 0.5;
        m[(1, 2)] *= 0.5;
        GroupElement { matrix: m, group: self.group }
    }
}

/// Lie algebra element `[A b; 0 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraElement {
    matrix: Matrix3<f64>,
    group: Group,
}

impl AlgebraElement {
    pub fn new(matrix: Matrix3<f64>, group: Group) -> Result<Self> {
        if !group.check_algebra(&matrix) {
            return Err(Error::InvalidParameter(format!("matrix is not in the Lie algebra of {group}")));
        }
        Ok(Self { matrix, group })
    }

    pub fn zero(group: Group) -> Self {
        Self { matrix: Matrix3::zeros(), group }
    }

    /// Orthogonal projection of an arbitrary matrix.
    pub fn projected(x: &Matrix3<f64>, group: Group) -> Self {
        Self { matrix: group.project(x), group }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn scale(&self, t: f64) -> AlgebraElement {
        AlgebraElement { matrix: self.matrix * t, group: self.group }
    }

    /// Largest displacement `|H x|` over the given centred points.
    pub fn displacement(&self, points: &[(f64, f64)]) -> f64 {
        points
            .iter()
            .map(|&(x, y)| {
                let m = &self.matrix;
                let dx = m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)];
                let dy = m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)];
                dx.hypot(dy)
            })
            .fold(0.0, f64::max)
    }

    pub fn exp(&self) -> GroupElement {
        exp_map(self)
    }
}

/// Matrix exponential, closed form for rigid motions.
pub fn exp_map(h: &AlgebraElement) -> GroupElement {
    let m = &h.matrix;
    let matrix = match h.group {
        Group::SO2 | Group::SE2 => {
            let theta = m[(1, 0)];
            let (s, c) = theta.sin_cos();
            let (v1, v2) = if theta.abs() < 1e-8 {
                (1.0 - theta * theta / 6.0, theta / 2.0 - theta.powi(3) / 24.0)
            } else {
                (s / theta, (1.0 - c) / theta)
            };
            let (bx, by) = (m[(0, 2)], m[(1, 2)]);
            Matrix3::new(c, -s, v1 * bx - v2 * by, s, c, v2 * bx + v1 * by, 0.0, 0.0, 1.0)
        }
        Group::SA2 | Group::A2 => {
            let mut e = m.exp();
            e[(2, 0)] = 0.0;
            e[(2, 1)] = 0.0;
            e[(2, 2)] = 1.0;
            e
        }
    };
    GroupElement { matrix, group: h.group }
}

/// Entry-wise weights of the inner product `tr((H1 ⊙ P) H2ᵀ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricWeights {
    p: Matrix3<f64>,
}

impl MetricWeights {
    pub fn new(p: Matrix3<f64>) -> Result<Self> {
        let positive = p.iter().all(|v| *v > 0.0 && v.is_finite());
        if !positive || p[(0, 0)] != p[(1, 1)] || p[(0, 1)] != p[(1, 0)] {
            return Err(Error::InvalidParameter(
                "metric weights must be positive with p11 = p22 and p12 = p21".into(),
            ));
        }
        Ok(Self { p })
    }

    /// Unit weights on the linear block, `1/diagonal` on the translation column.
    pub fn balanced(diagonal: f64) -> Self {
        let t = 1.0 / diagonal.max(1.0);
        Self { p: Matrix3::new(1.0, 1.0, t, 1.0, 1.0, t, 1.0, 1.0, t) }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.p
    }

    pub fn inner(&self, a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        a.component_mul(&self.p).component_mul(b).sum()
    }

    pub fn norm(&self, a: &Matrix3<f64>) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// `X ⊙ P̂`, where `P̂` holds the reciprocal entries of `P`.
    pub fn raise(&self, x: &Matrix3<f64>) -> Matrix3<f64> {
        x.component_div(&self.p)
    }
}
