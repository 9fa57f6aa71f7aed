//! Discrete function spaces: boundary DoF vectors, the interface frame with
//! its gradient jump matrices, projection-space functions (affine or
//! immersed), and the interpolation operators.

use nalgebra::{DVector, Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Plane, Tetrahedron};

/// Nodal values on an element boundary, ordered by the element's vertex list.
pub type BoundaryDofVector = DVector<f64>;

/// Which side of the interface plane a point or sub-cell belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

/// Orthonormal frame of an interface plane with the gradient jump matrices:
/// `grad_minus = m_minus · grad_plus` and `grad_plus = m_plus · grad_minus`,
/// where tangential components match and the normal flux `β ∂_n` matches.
#[derive(Debug, Clone, PartialEq)]
pub struct IfeFrame {
    pub plane: Plane,
    pub t1: Vector3<f64>,
    pub t2: Vector3<f64>,
    /// anchor point on the plane
    pub x_k: Point3<f64>,
    pub m_minus: Matrix3<f64>,
    pub m_plus: Matrix3<f64>,
    pub beta_minus: f64,
    pub beta_plus: f64,
}

impl IfeFrame {
    /// Builds the frame from the plane and the two coefficients;
    /// `m_minus = [t1, t2, β⁻ n]⁻ᵀ [t1, t2, β⁺ n]ᵀ` and `m_plus` its inverse
    /// with the roles of the coefficients swapped.
    pub fn new(plane: Plane, anchor: Point3<f64>, beta_minus: f64, beta_plus: f64) -> Self {
        assert!(beta_minus > 0.0 && beta_plus > 0.0);
        let (t1, t2) = plane.tangent_basis();
        let n = *plane.normal();
        let m_minus = jump_matrix(&t1, &t2, &n, beta_minus, beta_plus);
        let m_plus = jump_matrix(&t1, &t2, &n, beta_plus, beta_minus);
        let x_k = plane.project(&anchor);
        IfeFrame {
            plane,
            t1,
            t2,
            x_k,
            m_minus,
            m_plus,
            beta_minus,
            beta_plus,
        }
    }

    pub fn side_of(&self, p: &Point3<f64>) -> Side {
        if self.plane.signed_distance(p) < 0.0 {
            Side::Minus
        } else {
            Side::Plus
        }
    }

    pub fn beta(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.beta_minus,
            Side::Plus => self.beta_plus,
        }
    }

    /// Maps a minus-side gradient parameter to the given side.
    pub fn gradient_on(&self, p_minus: &Vector3<f64>, side: Side) -> Vector3<f64> {
        match side {
            Side::Minus => *p_minus,
            Side::Plus => self.m_plus * p_minus,
        }
    }
}

fn jump_matrix(
    t1: &Vector3<f64>,
    t2: &Vector3<f64>,
    n: &Vector3<f64>,
    beta_this: f64,
    beta_other: f64,
) -> Matrix3<f64> {
    let a = Matrix3::from_columns(&[*t1, *t2, n * beta_this]);
    let b = Matrix3::from_columns(&[*t1, *t2, n * beta_other]);
    a.transpose()
        .try_inverse()
        .expect("orthonormal frame with positive beta is invertible")
        * b.transpose()
}

/// Member of the projection space: globally affine, or an immersed function
/// that is piecewise affine across the frame's plane with exact value and
/// flux continuity.
#[derive(Debug, Clone)]
pub enum WhFunction {
    Affine {
        gradient: Vector3<f64>,
        anchor: Point3<f64>,
        value: f64,
    },
    Ife {
        p_minus: Vector3<f64>,
        value: f64,
        frame: IfeFrame,
    },
}

impl WhFunction {
    pub fn constant(c: f64) -> Self {
        WhFunction::Affine {
            gradient: Vector3::zeros(),
            anchor: Point3::origin(),
            value: c,
        }
    }

    /// Value and gradient at a point, on the given side for immersed
    /// functions (points on the plane accept either side).
    pub fn eval(&self, x: &Point3<f64>, side: Side) -> (f64, Vector3<f64>) {
        match self {
            WhFunction::Affine {
                gradient,
                anchor,
                value,
            } => (value + gradient.dot(&(x - anchor)), *gradient),
            WhFunction::Ife {
                p_minus,
                value,
                frame,
            } => {
                let g = frame.gradient_on(p_minus, side);
                (value + g.dot(&(x - frame.x_k)), g)
            }
        }
    }

    /// Evaluates with the side chosen by the frame's plane (affine functions
    /// ignore the side).
    pub fn eval_auto(&self, x: &Point3<f64>) -> (f64, Vector3<f64>) {
        match self {
            WhFunction::Affine { .. } => self.eval(x, Side::Plus),
            WhFunction::Ife { frame, .. } => self.eval(x, frame.side_of(x)),
        }
    }
}

/// Pointwise vertex values of a scalar field: the nodal interpolant's DoFs.
pub fn nodal_interpolant(
    u: &dyn Fn(&Point3<f64>) -> f64,
    vertices: &[Point3<f64>],
) -> BoundaryDofVector {
    DVector::from_iterator(vertices.len(), vertices.iter().map(u))
}

/// Quasi-interpolant of a field with a coefficient jump: the affine
/// least-squares fit of the minus-side extension over the patch, carried to
/// the plus side through the frame (`p⁺ = m_plus p⁻`). Quadrature is the
/// degree-2 rule on the patch's tetrahedra.
pub fn quasi_interpolant(
    u_minus: &dyn Fn(&Point3<f64>) -> f64,
    frame: &IfeFrame,
    patch_tets: &[Tetrahedron],
) -> Result<WhFunction> {
    // normal equations for the affine fit min Σ w (a + g·(x - x_k) - u)²
    let mut ata = nalgebra::Matrix4::<f64>::zeros();
    let mut atb = nalgebra::Vector4::<f64>::zeros();
    for tet in patch_tets {
        for (p, w) in tet.quadrature_deg2() {
            let r = p - frame.x_k;
            let row = nalgebra::Vector4::new(1.0, r.x, r.y, r.z);
            ata += row * row.transpose() * w;
            atb += row * (w * u_minus(&p));
        }
    }
    let sol = ata
        .cholesky()
        .ok_or(Error::RankDeficientPatch)?
        .solve(&atb);
    Ok(WhFunction::Ife {
        p_minus: Vector3::new(sol[1], sol[2], sol[3]),
        value: sol[0],
        frame: frame.clone(),
    })
}
