//! Structure-matrix algebra: the Poisson bracket and the testable
//! geometric predicates (skew-symmetry, Jacobi identity, Casimir residual,
//! Poisson-map residual).

use crate::error::{Error, Result};
use crate::linalg::{max_abs, Mat};

/// Coefficients of a structure matrix that depends linearly on the state:
/// `B_ij(y) = sum_k coeffs[k][i][j] * y_k`.
///
/// `coeffs[k]` is the (constant, skew-symmetric) partial derivative of `B`
/// with respect to `y_k`. In the usual Lie-Poisson tensor notation
/// `b^k_{ij}` one has `coeffs[k][i][j] = b^k_{ji}` (transposed indices).
#[derive(Debug, Clone)]
pub struct LinearTensor {
    dim: usize,
    coeffs: Vec<Mat>,
}

impl LinearTensor {
    pub fn new(coeffs: Vec<Mat>) -> Self {
        let dim = coeffs.len();
        assert!(coeffs.iter().all(|m| m.dim() == dim));
        LinearTensor { dim, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// dB/dy_k, a constant matrix.
    pub fn partial(&self, k: usize) -> &Mat {
        &self.coeffs[k]
    }

    /// Contraction: B(y) = sum_k y_k dB/dy_k, with fixed summation order.
    pub fn contract(&self, y: &[f64]) -> Mat {
        assert_eq!(y.len(), self.dim);
        let mut out = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut v = 0.0;
                for (k, c) in self.coeffs.iter().enumerate() {
                    v += c.get(i, j) * y[k];
                }
                out.set(i, j, v);
            }
        }
        out
    }
}

/// A state-dependent skew-symmetric structure matrix.
///
/// Lie-Poisson systems carry the exact linear tensor, which the Jacobi
/// check prefers over finite differences.
pub enum StructureMatrix {
    Linear(LinearTensor),
    General { dim: usize, eval: EvalFn },
}

impl StructureMatrix {
    pub fn dim(&self) -> usize {
        match self {
            StructureMatrix::Linear(t) => t.dim(),
            StructureMatrix::General { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, y: &[f64]) -> Mat {
        match self {
            StructureMatrix::Linear(t) => t.contract(y),
            StructureMatrix::General { eval, .. } => eval(y),
        }
    }

    pub fn tensor(&self) -> Option<&LinearTensor> {
        match self {
            StructureMatrix::Linear(t) => Some(t),
            StructureMatrix::General { .. } => None,
        }
    }

    /// Directional derivative (D_y B)(y)[v], exact on the tensor path.
    /// For a linear B this is simply B(v).
    pub fn directional(&self, v: &[f64]) -> Option<Mat> {
        self.tensor().map(|t| t.contract(v))
    }

    /// Drops the tensor so that consumers exercise finite-difference
    /// fallbacks against the same matrix.
    pub fn without_tensor(self) -> StructureMatrix {
        match self {
            StructureMatrix::Linear(t) => {
                let dim = t.dim();
                StructureMatrix::General {
                    dim,
                    eval: Box::new(move |y| t.contract(y)),
                }
            }
            general => general,
        }
    }
}

/// Quadratic-plus-linear scalar function `y -> 1/2 y^T S y + c^T y`.
/// Every split Hamiltonian of the bundled models is of this form, which
/// gives exact gradients and constant Hessians.
#[derive(Debug, Clone)]
pub struct QuadForm {
    pub s: Mat,
    pub c: Vec<f64>,
}

impl QuadForm {
    pub fn quadratic(s: Mat) -> Self {
        let c = vec![0.0; s.dim()];
        QuadForm { s, c }
    }

    pub fn linear(c: Vec<f64>) -> Self {
        let s = Mat::zeros(c.len());
        QuadForm { s, c }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        0.5 * self.s.bilinear(y, y) + self.c.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = self.s.matvec(y);
        for (gi, ci) in g.iter_mut().zip(&self.c) {
            *gi += ci;
        }
        g
    }

    /// Constant Hessian.
    pub fn hessian(&self) -> &Mat {
        &self.s
    }
}

/// Closure evaluating a structure matrix at a state.
pub type EvalFn = Box<dyn Fn(&[f64]) -> Mat + Send + Sync>;
/// In-place flow map `(t, y) -> y'` of one split Hamiltonian.
pub type FlowFn = Box<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// One split Hamiltonian together with the closed form of its flow.
///
/// `exact_flow(t, .)` is the time-t flow of `dy/dt = B(y) grad(y)`; for
/// stochastic parts the caller passes `t = sigma_k dW_k`.
pub struct HamiltonianPart {
    pub label: String,
    form: QuadForm,
    flow: FlowFn,
}

impl HamiltonianPart {
    pub fn new(label: impl Into<String>, form: QuadForm, flow: FlowFn) -> Self {
        HamiltonianPart {
            label: label.into(),
            form,
            flow,
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.form.value(y)
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        self.form.gradient(y)
    }

    pub fn hessian(&self) -> &Mat {
        self.form.hessian()
    }

    pub fn apply_flow(&self, t: f64, y: &mut [f64]) {
        (self.flow)(t, y)
    }

    pub fn flow_owned(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        self.apply_flow(t, &mut out);
        out
    }
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A conserved function with `grad C(y)^T B(y) = 0` everywhere.
pub struct CasimirFn {
    pub name: String,
    value: ScalarFn,
    gradient: GradFn,
}

impl CasimirFn {
    pub fn new(name: impl Into<String>, value: ScalarFn, gradient: GradFn) -> Self {
        CasimirFn {
            name: name.into(),
            value,
            gradient,
        }
    }

    pub fn from_quad(name: impl Into<String>, form: QuadForm) -> Self {
        let f1 = form.clone();
        CasimirFn::new(
            name,
            Box::new(move |y| f1.value(y)),
            Box::new(move |y| form.gradient(y)),
        )
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        (self.value)(y)
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        (self.gradient)(y)
    }
}

/// Poisson bracket {F,G}(y) = grad F(y)^T B(y) grad G(y).
pub fn poisson_bracket(
    grad_f: &[f64],
    grad_g: &[f64],
    b: &StructureMatrix,
    y: &[f64],
) -> Result<f64> {
    let d = b.dim();
    for v in [grad_f, grad_g, y] {
        if v.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: v.len(),
            });
        }
    }
    Ok(b.eval(y).bilinear(grad_f, grad_g))
}

/// max_{i,j} |B_ij(y) + B_ji(y)|
pub fn check_skew(b: &StructureMatrix, y: &[f64]) -> f64 {
    let m = b.eval(y);
    let mut res: f64 = 0.0;
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            res = res.max((m.get(i, j) + m.get(j, i)).abs());
        }
    }
    res
}

/// Max over (i,j,k) of the Jacobi cyclic sum
/// `sum_l (dB_ij/dy_l B_lk + dB_jk/dy_l B_li + dB_ki/dy_l B_lj)`.
///
/// Partial derivatives come from the linear tensor when the matrix
/// declares one, and from central differences with step `fd_step`
/// otherwise.
pub fn check_jacobi(b: &StructureMatrix, y: &[f64], fd_step: f64) -> f64 {
    assert!(fd_step > 0.0);
    let d = b.dim();
    let bm = b.eval(y);
    // partials[l] = dB/dy_l at y
    let partials: Vec<Mat> = match b.tensor() {
        Some(t) => (0..d).map(|l| t.partial(l).clone()).collect(),
        None => (0..d)
            .map(|l| {
                let mut yp = y.to_vec();
                let mut ym = y.to_vec();
                yp[l] += fd_step;
                ym[l] -= fd_step;
                let (bp, bm2) = (b.eval(&yp), b.eval(&ym));
                Mat::from_fn(d, |i, j| (bp.get(i, j) - bm2.get(i, j)) / (2.0 * fd_step))
            })
            .collect(),
    };
    let mut res: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut cyc = 0.0;
                for (l, p) in partials.iter().enumerate() {
                    cyc += p.get(i, j) * bm.get(l, k)
                        + p.get(j, k) * bm.get(l, i)
                        + p.get(k, i) * bm.get(l, j);
                }
                res = res.max(cyc.abs());
            }
        }
    }
    res
}

/// ||grad C(y)^T B(y)||_inf
pub fn check_casimir(c: &CasimirFn, b: &StructureMatrix, y: &[f64]) -> f64 {
    let g = c.gradient(y);
    let m = b.eval(y);
    let row = m.transpose().matvec(&g); // (g^T B)_j = sum_i g_i B_ij
    max_abs(&row)
}

/// Jacobian of `map` at `y` by central differences with step `fd_step`.
pub fn fd_jacobian(map: &dyn Fn(&[f64]) -> Vec<f64>, y: &[f64], fd_step: f64) -> Mat {
    let d = y.len();
    let mut jac = Mat::zeros(d);
    for j in 0..d {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[j] += fd_step;
        ym[j] -= fd_step;
        let (fp, fm) = (map(yp.as_slice()), map(ym.as_slice()));
        for i in 0..d {
            jac.set(i, j, (fp[i] - fm[i]) / (2.0 * fd_step));
        }
    }
    jac
}

/// Poisson-map residual ||D B(y) D^T - B(map(y))||_max with D the
/// finite-difference Jacobian of `map` at `y`.
pub fn check_poisson_map(
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &StructureMatrix,
    y: &[f64],
    fd_step: f64,
) -> f64 {
    let d = fd_jacobian(map, y, fd_step);
    let pushed = d.mul(&b.eval(y)).mul(&d.transpose());
    let target = b.eval(&map(y));
    pushed.sub(&target).max_abs()
}
