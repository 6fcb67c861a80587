//! The discrete semigroup generator `A` (with `U' = A U`), its spectrum, the
//! resolvent problem `(I − A) U = B`, and the coercivity constants of the
//! bilinear form behind the resolvent.
//!
//! Unknowns are stacked field by field, `[φ | u | ψ | v | θ | z]`, with an
//! optional `[w]` block for the exponential-kernel closure
//! `w_t = a ψ − b w`, where `w = ∫₀ᵗ g(t−s) ψ(s) ds`. Dirichlet end nodes are
//! eliminated. In the default [`ThetaSpace::MeanZero`] the θ and z blocks are
//! restricted to trapezoid-mean-zero fields by dropping node 0; the full space
//! carries an extra double eigenvalue 0 from the conserved means.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, Grid};
use crate::integrator::State;
use crate::model::{MemoryKernel, SimConfig};
use crate::operator::{linear_entries, Var};

/// Largest dimension accepted by [`spectrum`].
pub const SPECTRUM_DIM_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorMode {
    /// No convolution term.
    NoMemory,
    /// Exponential kernel closed by the auxiliary `w` block.
    ExpAugmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaSpace {
    #[default]
    MeanZero,
    Full,
}

/// Index map between stacked vectors and nodal fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    n: usize,
    space: ThetaSpace,
    augmented: bool,
}

impl Layout {
    fn first_node(&self, var: Option<Var>) -> usize {
        match var {
            Some(Var::Theta) | Some(Var::Z) if self.space == ThetaSpace::Full => 0,
            _ => 1,
        }
    }

    fn len_of(&self, var: Option<Var>) -> usize {
        match var {
            Some(Var::Theta) | Some(Var::Z) => match self.space {
                ThetaSpace::Full => self.n + 1,
                ThetaSpace::MeanZero => self.n,
            },
            _ => self.n - 1,
        }
    }

    /// Block offset; `None` stands for the `w` block.
    fn offset(&self, var: Option<Var>) -> usize {
        let order = [
            Some(Var::Phi),
            Some(Var::U),
            Some(Var::Psi),
            Some(Var::V),
            Some(Var::Theta),
            Some(Var::Z),
            None,
        ];
        order
            .iter()
            .take_while(|v| **v != var)
            .map(|v| self.len_of(*v))
            .sum()
    }

    pub fn dim(&self) -> usize {
        let base = 4 * (self.n - 1) + 2 * self.len_of(Some(Var::Theta));
        base + if self.augmented { self.n - 1 } else { 0 }
    }

    /// Stacked index of `(var, node)`, `None` for eliminated nodes.
    pub fn index(&self, var: Var, node: usize) -> Option<usize> {
        self.index_opt(Some(var), node)
    }

    fn index_opt(&self, var: Option<Var>, node: usize) -> Option<usize> {
        let first = self.first_node(var);
        let len = self.len_of(var);
        if node < first || node >= first + len {
            return None;
        }
        Some(self.offset(var) + node - first)
    }

    /// Block range of a field in the stacked vector.
    pub fn block(&self, var: Var) -> std::ops::Range<usize> {
        let o = self.offset(Some(var));
        o..o + self.len_of(Some(var))
    }

    pub fn w_block(&self) -> Option<std::ops::Range<usize>> {
        self.augmented.then(|| {
            let o = self.offset(None);
            o..o + self.n - 1
        })
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub matrix: DMatrix<f64>,
    pub mode: GeneratorMode,
    pub layout: Layout,
    grid: Grid,
}

/// `θ_0` of a trapezoid-mean-zero field in terms of nodes `1..=n`:
/// `θ_0 = −2 Σ_{0<j<n} θ_j − θ_n`.
fn mean_zero_coefficient(j: usize, n: usize) -> f64 {
    if j == n {
        -1.0
    } else {
        -2.0
    }
}

/// Assembles `A`. ExpAugmented needs an exponential kernel; every mode needs
/// linear friction.
pub fn assemble(cfg: &SimConfig, n: usize, mode: GeneratorMode) -> Result<GeneratorMatrix> {
    assemble_in(cfg, n, mode, ThetaSpace::MeanZero)
}

pub fn assemble_in(
    cfg: &SimConfig,
    n: usize,
    mode: GeneratorMode,
    space: ThetaSpace,
) -> Result<GeneratorMatrix> {
    let c = &cfg.coefficients;
    c.validate()?;
    let alpha = cfg
        .friction
        .linear_coefficient()
        .ok_or_else(|| Error::contract("the generator is linear: friction must be Linear"))?;
    let (a, b) = match (mode, &cfg.kernel) {
        (GeneratorMode::NoMemory, _) => (0.0, 0.0),
        (GeneratorMode::ExpAugmented, MemoryKernel::Exponential { a, b }) => (*a, *b),
        (GeneratorMode::ExpAugmented, _) => {
            return Err(Error::contract(
                "ExpAugmented mode needs an exponential kernel",
            ))
        }
    };
    let grid = Grid::new(n, c.length)?;
    let augmented = mode == GeneratorMode::ExpAugmented;
    let full = Layout {
        n,
        space: ThetaSpace::Full,
        augmented,
    };
    let mut m = DMatrix::zeros(full.dim(), full.dim());
    for e in linear_entries(&grid, c, alpha) {
        let r = full
            .index(e.row.0, e.row.1)
            .expect("stencil row inside layout");
        let col = full
            .index(e.col.0, e.col.1)
            .expect("stencil column inside layout");
        m[(r, col)] += e.val;
    }
    if augmented {
        let h2 = grid.dx() * grid.dx();
        for j in 1..n {
            let w = full.index_opt(None, j).unwrap();
            let v = full.index(Var::V, j).unwrap();
            // −laplacian(w)/ρ2 in the v equation
            m[(v, w)] += 2.0 / (c.rho2 * h2);
            for k in [j - 1, j + 1] {
                if let Some(wk) = full.index_opt(None, k) {
                    m[(v, wk)] -= 1.0 / (c.rho2 * h2);
                }
            }
            m[(w, full.index(Var::Psi, j).unwrap())] += a;
            m[(w, w)] -= b;
        }
    }
    let (matrix, layout) = match space {
        ThetaSpace::Full => (m, full),
        ThetaSpace::MeanZero => {
            let red = Layout {
                n,
                space: ThetaSpace::MeanZero,
                augmented,
            };
            let e = embedding(&full, &red);
            let r = e.transpose().map(|x| if x == 1.0 { 1.0 } else { 0.0 });
            (r * m * e, red)
        }
    };
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "generator has non-finite entries".to_string(),
        ));
    }
    Ok(GeneratorMatrix {
        matrix,
        mode,
        layout,
        grid,
    })
}

/// `E`: reduced stacked vector to full stacked vector (θ_0, z_0 restored).
fn embedding(full: &Layout, red: &Layout) -> DMatrix<f64> {
    let n = full.n;
    let mut e = DMatrix::zeros(full.dim(), red.dim());
    let vars: Vec<Option<Var>> = Var::ALL
        .iter()
        .map(|v| Some(*v))
        .chain(full.augmented.then_some(None))
        .collect();
    for var in vars {
        for j in 0..=n {
            if let (Some(fi), Some(ri)) = (full.index_opt(var, j), red.index_opt(var, j)) {
                e[(fi, ri)] = 1.0;
            }
        }
    }
    for var in [Var::Theta, Var::Z] {
        let f0 = full.index(var, 0).unwrap();
        for j in 1..=n {
            e[(f0, red.index(var, j).unwrap())] = mean_zero_coefficient(j, n);
        }
    }
    e
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Stacks a state (and `w` in augmented mode). In the mean-zero space
    /// node 0 of θ and z is dropped without checking the mean.
    pub fn stack(&self, state: &State, w: Option<&Field>) -> Result<DVector<f64>> {
        let l = &self.layout;
        let mut x = DVector::zeros(l.dim());
        for var in Var::ALL {
            let f = state.field(var);
            if f.len() != self.grid.points() {
                return Err(Error::contract("state lives on a different grid"));
            }
            for (j, val) in f.values().iter().enumerate() {
                if let Some(i) = l.index(var, j) {
                    x[i] = *val;
                }
            }
        }
        match (l.w_block(), w) {
            (Some(_), Some(w)) => {
                for j in 1..l.n {
                    x[l.index_opt(None, j).unwrap()] = w.values()[j];
                }
            }
            (Some(_), None) => return Err(Error::contract("augmented layout needs w")),
            (None, Some(_)) => {
                return Err(Error::contract("w given for a layout without memory block"))
            }
            (None, None) => {}
        }
        Ok(x)
    }

    /// Inverse of [`Self::stack`].
    pub fn unstack(&self, x: &DVector<f64>) -> Result<(State, Option<Field>)> {
        let l = &self.layout;
        if x.len() != l.dim() {
            return Err(Error::contract("vector length does not match the layout"));
        }
        let mut s = State::zeros(&self.grid);
        let n = l.n;
        let fields: Vec<(Var, Vec<f64>)> = Var::ALL
            .iter()
            .map(|&var| {
                let mut v = vec![0.0; n + 1];
                for (j, slot) in v.iter_mut().enumerate() {
                    if let Some(i) = l.index(var, j) {
                        *slot = x[i];
                    }
                }
                if !var.is_dirichlet() && l.space == ThetaSpace::MeanZero {
                    v[0] = (1..=n).map(|j| mean_zero_coefficient(j, n) * v[j]).sum();
                }
                (var, v)
            })
            .collect();
        for (var, v) in fields {
            let b = if var.is_dirichlet() {
                Boundary::DirichletZero
            } else {
                Boundary::NeumannZero
            };
            let f = Field::from_raw(v, b);
            match var {
                Var::Phi => s.phi = f,
                Var::U => s.u = f,
                Var::Psi => s.psi = f,
                Var::V => s.v = f,
                Var::Theta => s.theta = f,
                Var::Z => s.z = f,
            }
        }
        let w = l.w_block().map(|_| {
            let mut v = vec![0.0; n + 1];
            for (j, slot) in v.iter_mut().enumerate() {
                if let Some(i) = l.index_opt(None, j) {
                    *slot = x[i];
                }
            }
            Field::from_raw(v, Boundary::DirichletZero)
        });
        Ok((s, w))
    }

    /// Square submatrix over the listed field blocks.
    pub fn submatrix(&self, vars: &[Var]) -> DMatrix<f64> {
        let idx: Vec<usize> = vars.iter().flat_map(|v| self.layout.block(*v)).collect();
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.matrix[(idx[i], idx[j])])
    }

    /// `e^{tA} x`.
    pub fn propagate(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        (&self.matrix * t).exp() * x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Sorted by real part, descending.
    pub eigenvalues: Vec<Complex<f64>>,
    pub abscissa: f64,
    pub dominant: Complex<f64>,
}

/// All eigenvalues of a dense real matrix: Parlett–Reinsch balancing, then
/// Hessenberg reduction and shifted QR to real Schur form.
pub fn spectrum(a: &DMatrix<f64>) -> Result<SpectrumReport> {
    let dim = a.nrows();
    if dim != a.ncols() {
        return Err(Error::contract("spectrum needs a square matrix"));
    }
    if dim == 0 || dim > SPECTRUM_DIM_CAP {
        return Err(Error::contract(format!(
            "spectrum dimension {dim} outside 1..={SPECTRUM_DIM_CAP}"
        )));
    }
    let mut m = a.clone();
    nalgebra::linalg::balancing::balance_parlett_reinsch(&mut m);
    let schur = Schur::try_new(m, f64::EPSILON, 1000 * dim)
        .ok_or_else(|| Error::Numerical("QR iteration did not converge".to_string()))?;
    let mut eigenvalues: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    let dominant = eigenvalues[0];
    Ok(SpectrumReport {
        abscissa: dominant.re,
        dominant,
        eigenvalues,
    })
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub u: DVector<f64>,
    /// `‖(I − A)U − B‖ / ‖B‖` (0 for `B = 0`).
    pub residual: f64,
}

/// Solves `(I − A) U = B` by dense LU.
pub fn solve_resolvent(a: &GeneratorMatrix, b: &DVector<f64>) -> Result<ResolventSolution> {
    let dim = a.dim();
    if b.len() != dim {
        return Err(Error::contract(
            "right side length does not match the generator",
        ));
    }
    let m = DMatrix::identity(dim, dim) - &a.matrix;
    let lu = m.clone().lu();
    let u = lu
        .solve(b)
        .ok_or_else(|| Error::Singular("I − A is singular".to_string()))?;
    let r = &m * &u - b;
    let nb = b.norm();
    let residual = if nb == 0.0 { r.norm() } else { r.norm() / nb };
    if !residual.is_finite() {
        return Err(Error::Singular("I − A is numerically singular".to_string()));
    }
    Ok(ResolventSolution { u, residual })
}

/// Full-node matrices on one grid: trapezoid mass `M`, stiffness
/// `K = D+ᵀ dx D+`, centered difference `C` (zero end rows) and the
/// conservative difference `C′`.
struct Operators {
    mass: DMatrix<f64>,
    stiff: DMatrix<f64>,
    centered: DMatrix<f64>,
    conservative: DMatrix<f64>,
}

impl Operators {
    fn new(grid: &Grid) -> Self {
        let n = grid.n();
        let h = grid.dx();
        let p = n + 1;
        let mass = DMatrix::from_fn(p, p, |i, j| if i == j { grid.weight(i) } else { 0.0 });
        let mut stiff = DMatrix::zeros(p, p);
        for j in 0..n {
            stiff[(j, j)] += 1.0 / h;
            stiff[(j + 1, j + 1)] += 1.0 / h;
            stiff[(j, j + 1)] -= 1.0 / h;
            stiff[(j + 1, j)] -= 1.0 / h;
        }
        let mut centered = DMatrix::zeros(p, p);
        for j in 1..n {
            centered[(j, j + 1)] = 0.5 / h;
            centered[(j, j - 1)] = -0.5 / h;
        }
        let mut conservative = centered.clone();
        conservative[(0, 0)] = -1.0 / h;
        conservative[(0, 1)] = 1.0 / h;
        conservative[(n, n)] = 1.0 / h;
        conservative[(n, n - 1)] = -1.0 / h;
        Operators {
            mass,
            stiff,
            centered,
            conservative,
        }
    }
}

/// Prolongations from the (φ, ψ, θ) unknowns to full nodal vectors.
fn prolongations(n: usize, space: ThetaSpace) -> (DMatrix<f64>, DMatrix<f64>) {
    let dirichlet = DMatrix::from_fn(n + 1, n - 1, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    let theta = match space {
        ThetaSpace::Full => DMatrix::identity(n + 1, n + 1),
        ThetaSpace::MeanZero => DMatrix::from_fn(n + 1, n, |i, j| {
            if i == 0 {
                mean_zero_coefficient(j + 1, n)
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        }),
    };
    (dirichlet, theta)
}

/// Matrices of the stationary bilinear form over `(φ, ψ, θ)`.
#[derive(Debug, Clone)]
pub struct FormMatrix {
    /// `F(x, y) = yᵀ F x` (not symmetric: the γ coupling is skew).
    pub form: DMatrix<f64>,
    /// Gram matrix of `‖φ_x+ψ‖² + ‖φ‖² + ‖φ_x‖² + ‖θ_x‖²`.
    pub gram: DMatrix<f64>,
    /// The same norm plus `‖ψ_x‖²`.
    pub gram_with_psi: DMatrix<f64>,
}

fn place(target: &mut DMatrix<f64>, r: usize, c: usize, block: &DMatrix<f64>) {
    target
        .view_mut((r, c), (block.nrows(), block.ncols()))
        .copy_from(block);
}

/// Eliminating `u = φ − f1`, `v = ψ − f3`, `z = θ − f5` from `(I − A)U = B`
/// and testing against `(φ1, ψ1, θ1)` gives
///
/// ```text
/// F = (ρ1+μ)(φ,φ1) + k1·S(φ,ψ; φ1,ψ1) + (ρ2+α)(ψ,ψ1) + k2(ψ_x,ψ1_x)
///   + γ[(θ_x,ψ1) + (ψ_x,θ1)] + ρ3(θ,θ1) + (δ+β)(θ_x,θ1_x)
/// ```
///
/// with the memory term treated as data.
pub fn form_matrix(cfg: &SimConfig, n: usize, space: ThetaSpace) -> Result<FormMatrix> {
    let c = &cfg.coefficients;
    c.validate()?;
    let alpha = cfg
        .friction
        .linear_coefficient()
        .ok_or_else(|| Error::contract("coercivity needs Linear friction"))?;
    let grid = Grid::new(n, c.length)?;
    let ops = Operators::new(&grid);
    let (pd, pt) = prolongations(n, space);
    let (m, k, cc, cv) = (&ops.mass, &ops.stiff, &ops.centered, &ops.conservative);
    let pdt = pd.transpose();
    let ptt = pt.transpose();
    let mc = m * cc;

    let nd = n - 1;
    let nt = pt.ncols();
    let dim = 2 * nd + nt;
    let mut form = DMatrix::zeros(dim, dim);
    let ff = &pdt * (m * (c.rho1 + c.mu) + k * c.k1) * &pd;
    // k1·(ψ, Dc φ1) and k1·(Dc φ, ψ1)
    let fp = &pdt * (cc.transpose() * m) * &pd * c.k1;
    let pf = &pdt * &mc * &pd * c.k1;
    let pp = &pdt * (m * (c.rho2 + alpha + c.k1) + k * c.k2) * &pd;
    let pt_block = &pdt * &mc * &pt * c.gamma;
    let tp = &ptt * (m * cv) * &pd * c.gamma;
    let tt = &ptt * (m * c.rho3 + k * (c.delta + c.beta)) * &pt;
    place(&mut form, 0, 0, &ff);
    place(&mut form, 0, nd, &fp);
    place(&mut form, nd, 0, &pf);
    place(&mut form, nd, nd, &pp);
    place(&mut form, nd, 2 * nd, &pt_block);
    place(&mut form, 2 * nd, nd, &tp);
    place(&mut form, 2 * nd, 2 * nd, &tt);

    let mut gram = DMatrix::zeros(dim, dim);
    place(&mut gram, 0, 0, &(&pdt * (k * 2.0 + m) * &pd));
    place(&mut gram, 0, nd, &(&pdt * (cc.transpose() * m) * &pd));
    place(&mut gram, nd, 0, &(&pdt * &mc * &pd));
    place(&mut gram, nd, nd, &(&pdt * m * &pd));
    place(&mut gram, 2 * nd, 2 * nd, &(&ptt * k * &pt));
    let mut gram_with_psi = gram.clone();
    let psi_x = &pdt * k * &pd;
    let mut view = gram_with_psi.view_mut((nd, nd), (nd, nd));
    view += &psi_x;
    Ok(FormMatrix {
        form,
        gram,
        gram_with_psi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    /// Smallest generalized eigenvalue of `sym(F)` against the V-norm Gram matrix.
    pub alpha0: f64,
    /// Largest one.
    pub c_bound: f64,
    /// The same pair against the norm that also includes `‖ψ_x‖²`.
    pub alpha0_with_psi: f64,
    pub c_bound_with_psi: f64,
}

fn generalized_extremes(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(f64, f64)> {
    let chol = Cholesky::new(g.clone())
        .ok_or_else(|| Error::contract("V-norm Gram matrix is not positive definite"))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Cholesky factor not invertible".to_string()))?;
    let mut reduced = &l_inv * a * l_inv.transpose();
    // restore exact symmetry lost to round-off
    reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

/// Coercivity and continuity constants of the form over `(φ, ψ, θ)` with θ
/// restricted to mean zero (on constants the θ-gradient norm vanishes).
pub fn coercivity(cfg: &SimConfig, n: usize) -> Result<CoercivityReport> {
    let f = form_matrix(cfg, n, ThetaSpace::MeanZero)?;
    let sym = (&f.form + f.form.transpose()) * 0.5;
    let (alpha0, c_bound) = generalized_extremes(&sym, &f.gram)?;
    let (alpha0_with_psi, c_bound_with_psi) = generalized_extremes(&sym, &f.gram_with_psi)?;
    Ok(CoercivityReport {
        alpha0,
        c_bound,
        alpha0_with_psi,
        c_bound_with_psi,
    })
}

/// Solves `(I − A)U = B` (memory-free, full θ space) through the form:
/// eliminate `u, v, z`, solve `F(φ,ψ,θ) = ℓ`, then recover the velocities.
/// `b` uses the full-space stacking of [`assemble_in`].
pub fn variational_solve(cfg: &SimConfig, n: usize, b: &DVector<f64>) -> Result<DVector<f64>> {
    let gen = assemble_in(cfg, n, GeneratorMode::NoMemory, ThetaSpace::Full)?;
    let (data, _) = gen.unstack(b)?;
    let c = &cfg.coefficients;
    let alpha = cfg.friction.linear_coefficient().unwrap();
    let grid = gen.grid;
    let f = form_matrix(cfg, n, ThetaSpace::Full)?;
    let (f1, f2, f3, f4, f5, f6) = (&data.phi, &data.u, &data.psi, &data.v, &data.theta, &data.z);

    // nodal right sides of the three eliminated equations
    let lam = |x: &Field| grid.laplacian(x);
    let rhs_phi = f2.scaled(c.rho1).axpy(c.rho1 + c.mu, f1)?;
    let rhs_psi = f4
        .scaled(c.rho2)
        .axpy(c.rho2 + alpha, f3)?
        .axpy(c.gamma, &grid.ddx(f5)?)?;
    let rhs_theta = f6
        .scaled(c.rho3)
        .axpy(c.rho3, f5)?
        .axpy(
            c.gamma,
            &grid.ddx_conservative(f3)?.with_boundary(Boundary::Free),
        )?
        .axpy(-c.beta, &lam(f5)?)?;

    let nd = n - 1;
    let mut ell = DVector::zeros(2 * nd + n + 1);
    for j in 1..n {
        ell[j - 1] = grid.weight(j) * rhs_phi.values()[j];
        ell[nd + j - 1] = grid.weight(j) * rhs_psi.values()[j];
    }
    for j in 0..=n {
        ell[2 * nd + j] = grid.weight(j) * rhs_theta.values()[j];
    }
    // F(x, y) = yᵀ F x, so the test-function rows of F act on the unknown x
    let x = f
        .form
        .lu()
        .solve(&ell)
        .ok_or_else(|| Error::Singular("form matrix is singular".to_string()))?;

    let mut out = State::zeros(&grid);
    {
        let phi = out.phi.values_mut();
        for j in 1..n {
            phi[j] = x[j - 1];
        }
    }
    {
        let psi = out.psi.values_mut();
        for j in 1..n {
            psi[j] = x[nd + j - 1];
        }
    }
    {
        let theta = out.theta.values_mut();
        for j in 0..=n {
            theta[j] = x[2 * nd + j];
        }
    }
    out.u = out.phi.axpy(-1.0, f1)?;
    out.v = out.psi.axpy(-1.0, f3)?;
    out.z = out.theta.axpy(-1.0, f5)?;
    gen.stack(&out, None)
}
