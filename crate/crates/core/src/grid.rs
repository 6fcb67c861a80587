//! Uniform 1D grid, boundary-tagged nodal fields and the finite-difference
//! operators used by the beam equations.
//!
//! All fields are node-centred on `x_j = j·dx`, `j = 0..=n`. Quadrature is the
//! composite trapezoid rule over every node, which makes the discrete
//! summation-by-parts identities exact:
//!
//! ```text
//! inner(laplacian(u), w) = -Σ_j dx·(D+u)_j·(D+w)_j
//! ```
//!
//! for `DirichletZero` and `NeumannZero` fields alike (the Neumann stencil uses
//! ghost reflection `u_{-1} = u_1`, `u_{n+1} = u_{n-1}`).

use crate::error::{Error, Result};

/// Boundary condition carried by a [`Field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Value pinned to zero at both ends (φ, ψ and their velocities).
    DirichletZero,
    /// Zero normal derivative at both ends (θ and θ_t).
    NeumannZero,
    /// Derived quantity without a boundary condition.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
    dx: f64,
}

/// Nodal values on a [`Grid`] together with their boundary tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    boundary: Boundary,
}

impl Field {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self + alpha * other`, keeping `self`'s tag.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Result<Field> {
        check_same_len(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Field {
            values,
            boundary: self.boundary,
        })
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        Field {
            values: self.values.iter().map(|v| alpha * v).collect(),
            boundary: self.boundary,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Field {
        self.boundary = boundary;
        self
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn from_raw(values: Vec<f64>, boundary: Boundary) -> Field {
        Field { values, boundary }
    }
}

fn check_same_len(a: &Field, b: &Field) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "grid mismatch: fields have {} and {} nodes",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::contract(format!("grid needs n >= 4 cells, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::contract(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(Grid {
            n,
            length,
            dx: length / n as f64,
        })
    }

    /// Number of cells.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn points(&self) -> usize {
        self.n + 1
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.n {
            self.length
        } else {
            j as f64 * self.dx
        }
    }

    /// Trapezoid weight of node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    pub fn zeros(&self, boundary: Boundary) -> Field {
        Field::from_raw(vec![0.0; self.points()], boundary)
    }

    /// Samples `f` at the nodes. Dirichlet fields get exact zeros at both ends.
    pub fn sample(&self, boundary: Boundary, f: impl Fn(f64) -> f64) -> Field {
        let mut values: Vec<f64> = (0..self.points()).map(|j| f(self.x(j))).collect();
        if boundary == Boundary::DirichletZero {
            values[0] = 0.0;
            values[self.n] = 0.0;
        }
        Field::from_raw(values, boundary)
    }

    pub fn field(&self, values: Vec<f64>, boundary: Boundary) -> Result<Field> {
        if values.len() != self.points() {
            return Err(Error::contract(format!(
                "expected {} nodal values, got {}",
                self.points(),
                values.len()
            )));
        }
        if boundary == Boundary::DirichletZero && (values[0] != 0.0 || values[self.n] != 0.0) {
            return Err(Error::contract(
                "DirichletZero field must vanish exactly at both ends",
            ));
        }
        Ok(Field::from_raw(values, boundary))
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.len() != self.points() {
            return Err(Error::contract(format!(
                "grid mismatch: field has {} nodes, grid has {}",
                f.len(),
                self.points()
            )));
        }
        Ok(())
    }

    /// Three-point second difference. The result is tagged `Free`.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let mut out = vec![0.0; self.points()];
        match f.boundary {
            Boundary::DirichletZero => laplacian_dirichlet(&f.values, self.dx, &mut out),
            Boundary::NeumannZero => laplacian_neumann(&f.values, self.dx, &mut out),
            Boundary::Free => {
                return Err(Error::contract(
                    "laplacian needs a DirichletZero or NeumannZero field",
                ))
            }
        }
        Ok(Field::from_raw(out, Boundary::Free))
    }

    /// Centered first difference. Boundary nodes use ghost reflection for
    /// `NeumannZero` fields (giving 0) and second-order one-sided stencils
    /// otherwise.
    pub fn ddx(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let u = &f.values;
        let n = self.n;
        let h = self.dx;
        let mut out = vec![0.0; self.points()];
        centered_interior(u, h, &mut out);
        match f.boundary {
            Boundary::NeumannZero => {
                out[0] = 0.0;
                out[n] = 0.0;
            }
            Boundary::DirichletZero | Boundary::Free => {
                out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
                out[n] = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
            }
        }
        Ok(Field::from_raw(out, Boundary::Free))
    }

    /// Centered difference of a `DirichletZero` field whose boundary rows are
    /// the first-order one-sided differences. This operator is exactly minus
    /// the trapezoid-adjoint of the centered difference acting on Neumann
    /// fields, so `integrate(ddx_conservative(v)) == 0` for every Dirichlet `v`.
    pub fn ddx_conservative(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        if f.boundary != Boundary::DirichletZero {
            return Err(Error::contract(
                "ddx_conservative needs a DirichletZero field",
            ));
        }
        let mut out = vec![0.0; self.points()];
        ddx_conservative_slice(&f.values, self.dx, &mut out);
        Ok(Field::from_raw(out, Boundary::Free))
    }

    /// Forward differences `(u_{j+1} - u_j)/dx` at the `n` cell midpoints.
    pub fn dx_forward(&self, f: &Field) -> Result<Vec<f64>> {
        self.check(f)?;
        Ok(forward_diff(&f.values, self.dx))
    }

    /// `Σ_j dx·(D+a)_j·(D+b)_j`, the discrete `∫ a_x b_x dx`.
    pub fn grad_inner(&self, a: &Field, b: &Field) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(grad_inner_slice(&a.values, &b.values, self.dx))
    }

    pub fn grad_norm_sq(&self, f: &Field) -> Result<f64> {
        self.grad_inner(f, f)
    }

    /// Composite trapezoid rule over all nodes.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(trapezoid(&f.values, self.dx))
    }

    pub fn inner(&self, a: &Field, b: &Field) -> Result<f64> {
        self.check(a)?;
        check_same_len(a, b)?;
        Ok(inner_slice(&a.values, &b.values, self.dx))
    }
}

// Slice kernels shared with the integrator and diagnostics. They assume the
// caller already validated lengths.

pub(crate) fn trapezoid(u: &[f64], dx: f64) -> f64 {
    let n = u.len() - 1;
    let interior: f64 = u[1..n].iter().sum();
    dx * (interior + 0.5 * (u[0] + u[n]))
}

pub(crate) fn inner_slice(a: &[f64], b: &[f64], dx: f64) -> f64 {
    let n = a.len() - 1;
    let interior: f64 = a[1..n].iter().zip(&b[1..n]).map(|(x, y)| x * y).sum();
    dx * (interior + 0.5 * (a[0] * b[0] + a[n] * b[n]))
}

pub(crate) fn forward_diff(u: &[f64], dx: f64) -> Vec<f64> {
    u.windows(2).map(|w| (w[1] - w[0]) / dx).collect()
}

pub(crate) fn grad_inner_slice(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.windows(2)
        .zip(b.windows(2))
        .map(|(p, q)| (p[1] - p[0]) * (q[1] - q[0]))
        .sum::<f64>()
        / dx
}

pub(crate) fn centered_interior(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len() - 1;
    for j in 1..n {
        out[j] = (u[j + 1] - u[j - 1]) / (2.0 * dx);
    }
}

pub(crate) fn ddx_conservative_slice(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len() - 1;
    centered_interior(u, dx, out);
    out[0] = (u[1] - u[0]) / dx;
    out[n] = (u[n] - u[n - 1]) / dx;
}

pub(crate) fn laplacian_dirichlet(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len() - 1;
    let s = 1.0 / (dx * dx);
    out[0] = 0.0;
    out[n] = 0.0;
    for j in 1..n {
        out[j] = (u[j - 1] - 2.0 * u[j] + u[j + 1]) * s;
    }
}

pub(crate) fn laplacian_neumann(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len() - 1;
    let s = 1.0 / (dx * dx);
    out[0] = 2.0 * (u[1] - u[0]) * s;
    out[n] = 2.0 * (u[n - 1] - u[n]) * s;
    for j in 1..n {
        out[j] = (u[j - 1] - 2.0 * u[j] + u[j + 1]) * s;
    }
}
