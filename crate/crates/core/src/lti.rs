//! Discrete-time LTI state-space models.
//!
//! A [`StateSpaceModel`] is the quadruple `(A, B, C, D)` of
//!
//! ```text
//! x(k+1) = A x(k) + B u(k)
//! y(k)   = C x(k) + D u(k)
//! ```
//!
//! Models with zero states are allowed and represent static gains. Besides
//! single-step simulation the module provides the interconnections (series,
//! sum, stacking, inversion) used to compose coprime factors, transfer-matrix
//! evaluation at a complex point, and the null direction of a transfer matrix.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{shape, Error, Result};
use crate::linalg::{block_diag, hcat, inverse, vcat};

pub type CMatrix = DMatrix<Complex<f64>>;
pub type CVector = DVector<Complex<f64>>;

/// Relative tolerance on the linear solve behind [`StateSpaceModel::evaluate`].
pub const EVAL_SOLVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

/// Plant state plus time index.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub x: DVector<f64>,
    pub k: u64,
}

impl SimState {
    pub fn zero(n: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            k: 0,
        }
    }
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dim("state-space A", "square", shape(&a)));
        }
        if b.nrows() != n {
            return Err(Error::dim("state-space B", format!("{n} rows"), shape(&b)));
        }
        if c.ncols() != n {
            return Err(Error::dim("state-space C", format!("{n} columns"), shape(&c)));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::dim(
                "state-space D",
                format!("{}x{}", c.nrows(), b.ncols()),
                shape(&d),
            ));
        }
        Ok(Self { a, b, c, d })
    }

    /// Strictly proper model with `D = 0`.
    pub fn strictly_proper(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let d = DMatrix::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
    }

    /// Memoryless gain `y = D u`.
    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (p, m) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
        }
    }

    pub fn zero_gain(outputs: usize, inputs: usize) -> Self {
        Self::static_gain(DMatrix::zeros(outputs, inputs))
    }

    pub fn identity(k: usize) -> Self {
        Self::static_gain(DMatrix::identity(k, k))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_stable(&self) -> bool {
        spectral_radius(&self.a).map(|r| r < 1.0).unwrap_or(false)
    }

    /// One step of `x' = Ax + Bu + w`, `y = Cx + Du + eta`.
    pub fn step(
        &self,
        state: &SimState,
        u: &DVector<f64>,
        w: &DVector<f64>,
        eta: &DVector<f64>,
    ) -> Result<(SimState, DVector<f64>)> {
        self.check_len("state", state.x.len(), self.states())?;
        self.check_len("input", u.len(), self.inputs())?;
        self.check_len("process noise", w.len(), self.states())?;
        self.check_len("measurement noise", eta.len(), self.outputs())?;
        let y = &self.c * &state.x + &self.d * u + eta;
        let x = &self.a * &state.x + &self.b * u + w;
        Ok((SimState { x, k: state.k + 1 }, y))
    }

    fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::dim(format!("step {what}"), want, got));
        }
        Ok(())
    }

    /// Response to an input sequence from the zero initial state.
    pub fn simulate(&self, inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
        self.simulate_from(&DVector::zeros(self.states()), inputs)
    }

    pub fn simulate_from(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut x = x0.clone();
        inputs
            .iter()
            .map(|u| {
                let y = &self.c * &x + &self.d * u;
                x = &self.a * &x + &self.b * u;
                y
            })
            .collect()
    }

    /// Impulse-response coefficients `D, CB, CAB, ...`.
    pub fn markov_parameters(&self, count: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return out;
        }
        out.push(self.d.clone());
        let mut ak_b = self.b.clone();
        for _ in 1..count {
            out.push(&self.c * &ak_b);
            ak_b = &self.a * ak_b;
        }
        out
    }

    /// Transfer matrix `D + C (zI - A)^{-1} B`.
    pub fn evaluate(&self, z: Complex<f64>) -> Result<CMatrix> {
        let n = self.states();
        let d = to_complex(&self.d);
        if n == 0 {
            return Ok(d);
        }
        let resolvent = CMatrix::identity(n, n) * z - to_complex(&self.a);
        let smallest = resolvent.clone().svd(false, false).singular_values.min();
        let scale = resolvent.norm().max(1.0);
        if smallest <= 1e-12 * scale {
            return Err(Error::Pole { z });
        }
        let b = to_complex(&self.b);
        let sol = resolvent.clone().lu().solve(&b).ok_or(Error::Pole { z })?;
        let res = (&resolvent * &sol - &b).norm();
        if res > EVAL_SOLVE_TOL * b.norm().max(1.0) {
            return Err(Error::Singular(format!(
                "resolvent at z = {z} (solve residual {res:e})"
            )));
        }
        Ok(d + to_complex(&self.c) * sol)
    }

    /// Cascade: the output of `self` feeds `next`. Returns `next * self`.
    pub fn series(&self, next: &StateSpaceModel) -> Result<StateSpaceModel> {
        if next.inputs() != self.outputs() {
            return Err(Error::dim("series connection", self.outputs(), next.inputs()));
        }
        let (n1, n2) = (self.states(), next.states());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&next.b * &self.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        let b = vcat(&self.b, &(&next.b * &self.d));
        let c = hcat(&(&next.d * &self.c), &next.c);
        let d = &next.d * &self.d;
        StateSpaceModel::new(a, b, c, d)
    }

    /// Sum of two systems with identical input and output dimensions.
    pub fn parallel(&self, other: &StateSpaceModel) -> Result<StateSpaceModel> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::dim(
                "parallel connection",
                format!("{}x{}", self.outputs(), self.inputs()),
                format!("{}x{}", other.outputs(), other.inputs()),
            ));
        }
        StateSpaceModel::new(
            block_diag(&self.a, &other.a),
            vcat(&self.b, &other.b),
            hcat(&self.c, &other.c),
            &self.d + &other.d,
        )
    }

    pub fn difference(&self, other: &StateSpaceModel) -> Result<StateSpaceModel> {
        self.parallel(&other.scaled(-1.0))
    }

    /// `[self other]`: inputs are concatenated, outputs are summed.
    pub fn hstack(&self, other: &StateSpaceModel) -> Result<StateSpaceModel> {
        if self.outputs() != other.outputs() {
            return Err(Error::dim("horizontal stack", self.outputs(), other.outputs()));
        }
        StateSpaceModel::new(
            block_diag(&self.a, &other.a),
            block_diag(&self.b, &other.b),
            hcat(&self.c, &other.c),
            hcat(&self.d, &other.d),
        )
    }

    /// `[self; other]`: shared input, outputs are concatenated.
    pub fn vstack(&self, other: &StateSpaceModel) -> Result<StateSpaceModel> {
        if self.inputs() != other.inputs() {
            return Err(Error::dim("vertical stack", self.inputs(), other.inputs()));
        }
        StateSpaceModel::new(
            block_diag(&self.a, &other.a),
            vcat(&self.b, &other.b),
            block_diag(&self.c, &other.c),
            vcat(&self.d, &other.d),
        )
    }

    /// The 2x2 block operator `[[g11, g12], [g21, g22]]`.
    pub fn block(
        g11: &StateSpaceModel,
        g12: &StateSpaceModel,
        g21: &StateSpaceModel,
        g22: &StateSpaceModel,
    ) -> Result<StateSpaceModel> {
        g11.hstack(g12)?.vstack(&g21.hstack(g22)?)
    }

    pub fn scaled(&self, k: f64) -> StateSpaceModel {
        StateSpaceModel {
            a: self.a.clone(),
            b: self.b.clone(),
            c: &self.c * k,
            d: &self.d * k,
        }
    }

    /// Realization of the inverse system; requires a square, invertible `D`.
    pub fn inverse(&self) -> Result<StateSpaceModel> {
        let d_inv = inverse(&self.d, "feedthrough of the system to invert")?;
        StateSpaceModel::new(
            &self.a - &self.b * &d_inv * &self.c,
            &self.b * &d_inv,
            -&d_inv * &self.c,
            d_inv,
        )
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex::new(v, 0.0))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim("spectral radius", "square matrix", shape(m)));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(m.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max))
}

/// Unit vector `g` with `G(z0) g = 0`, or `None` when the null space is trivial.
///
/// The null space is read off the singular value decomposition of the
/// transfer matrix (zero-padded to a square when it is wide). The returned
/// vector has its largest component rotated onto the positive real axis, so
/// a real transfer matrix with a one-dimensional kernel yields a real vector.
pub fn zero_direction(model: &StateSpaceModel, z0: Complex<f64>) -> Result<Option<CVector>> {
    let g = model.evaluate(z0)?;
    let (p, m) = g.shape();
    if m == 0 {
        return Ok(None);
    }
    let square = if p < m {
        let mut padded = CMatrix::zeros(m, m);
        padded.view_mut((0, 0), (p, m)).copy_from(&g);
        padded
    } else {
        g.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (idx, &smallest) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty spectrum");
    let largest = svd.singular_values.max();
    if smallest > 1e-10 * largest.max(1.0) {
        return Ok(None);
    }
    let mut dir: CVector = v_t.row(idx).adjoint();
    let pivot = dir
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("nonempty vector");
    let phase = pivot.conj() / pivot.norm();
    dir *= phase;
    let norm = dir.norm();
    dir /= Complex::new(norm, 0.0);
    Ok(Some(dir))
}
