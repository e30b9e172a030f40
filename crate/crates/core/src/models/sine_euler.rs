//! Stochastic sine-Euler system: the smallest (N = 3) spectral truncation
//! of the two-dimensional Euler equations, with four independent complex
//! modes and up to four noises.
//!
//! The complex state is `(w_(1,0), w_(1,1), w_(0,1), w_(-1,1))`; the
//! remaining four components of the 8-vector are their conjugates
//! (Hermitian symmetry, which the dynamics preserves). All public
//! interfaces work in the real coordinates
//! `x = (Re w_1, Im w_1, ..., Re w_4, Im w_4)`, where the structure
//! matrix becomes a real 8x8 matrix depending linearly on x; its tensor
//! is generated once from the complex matrix at the unit states.
//!
//! Sub-flows: freezing one mode turns the remaining three independent
//! components (after conjugating one of them, as dictated by the Hermitian
//! symmetry) into a linear system whose generator is a 3x3 complex
//! circulant with first row `(0, c, -conj(c))`. Circulants are
//! diagonalized exactly by the order-3 discrete Fourier transform and the
//! spectrum is purely imaginary, so each sub-flow is a unitary map up to
//! rounding.

use num_complex::Complex64;

use crate::geometry::{CasimirFn, HamiltonianPart, LinearTensor, QuadForm, StructureMatrix};
use crate::linalg::Mat;
use crate::noise::uniform_symmetric;

use super::{Model, NoisePart};

type C = Complex64;

const SQRT3_HALF: f64 = 0.8660254037844386467637231707529362;
/// |k|^2 for the modes (1,0), (1,1), (0,1), (-1,1).
const MODE_NORM2: [f64; 4] = [1.0, 2.0, 1.0, 2.0];
const MODE_LABELS: [&str; 4] = ["(1,0)", "(1,1)", "(0,1)", "(-1,1)"];

#[inline]
pub fn unpack(x: &[f64]) -> [C; 4] {
    [
        C::new(x[0], x[1]),
        C::new(x[2], x[3]),
        C::new(x[4], x[5]),
        C::new(x[6], x[7]),
    ]
}

#[inline]
pub fn pack(z: &[C; 4], x: &mut [f64]) {
    for (i, w) in z.iter().enumerate() {
        x[2 * i] = w.re;
        x[2 * i + 1] = w.im;
    }
}

/// Full complex 8-vector (modes followed by conjugates).
pub fn to_full_complex(x: &[f64]) -> [C; 8] {
    let z = unpack(x);
    [z[0], z[1], z[2], z[3], z[0].conj(), z[1].conj(), z[2].conj(), z[3].conj()]
}

/// Left half of the complex structure matrix: `top[i][j] = B_{i,j}` and
/// `bottom[i][j] = B_{i+4,j}` for i, j in 0..4 (prefactor sqrt(3)/2
/// included). The right half follows from conjugation symmetry.
fn b_complex_blocks(z: &[C; 4]) -> ([[C; 4]; 4], [[C; 4]; 4]) {
    let f = SQRT3_HALF;
    let zero = C::new(0.0, 0.0);
    let (z1, z2, z3, z4) = (z[0], z[1], z[2], z[3]);
    let top = [
        [zero, f * z4, f * z2, f * z3],
        [-f * z4, zero, f * z4.conj(), -f * z3.conj()],
        [-f * z2, -f * z4.conj(), zero, f * z2.conj()],
        [-f * z3, f * z3.conj(), -f * z2.conj(), zero],
    ];
    let bottom = [
        [zero, -f * z3, -f * z4, -f * z2],
        [f * z3.conj(), zero, -f * z1.conj(), f * z1],
        [f * z4.conj(), f * z1, zero, -f * z1.conj()],
        [f * z2.conj(), -f * z1.conj(), f * z1, zero],
    ];
    (top, bottom)
}

/// Real 8x8 structure matrix in the x coordinates, obtained from the
/// complex matrix through the linear change of variables.
fn b_real(x: &[f64]) -> Mat {
    let z = unpack(x);
    let (top, bottom) = b_complex_blocks(&z);
    let mut m = Mat::zeros(8);
    for i in 0..4 {
        for j in 0..4 {
            let t = top[i][j];
            let b = bottom[i][j];
            m.set(2 * i, 2 * j, 0.5 * (t.re + b.re));
            m.set(2 * i, 2 * j + 1, 0.5 * (t.im + b.im));
            m.set(2 * i + 1, 2 * j, 0.5 * (t.im - b.im));
            m.set(2 * i + 1, 2 * j + 1, 0.5 * (b.re - t.re));
        }
    }
    m
}

fn tensor() -> LinearTensor {
    let coeffs = (0..8)
        .map(|k| {
            let mut e = [0.0; 8];
            e[k] = 1.0;
            b_real(&e)
        })
        .collect();
    LinearTensor::new(coeffs)
}

// Cube roots of unity: rho^q for q = 0, 1, 2.
const RHO: [C; 3] = [
    C::new(1.0, 0.0),
    C::new(-0.5, SQRT3_HALF),
    C::new(-0.5, -SQRT3_HALF),
];

/// Exact flow of `du/dt = G u` for the circulant generator G with first
/// row `(0, c1, -conj(c1))`. The DFT eigenvectors are exact and the
/// eigenvalues `2 i Im(c1 rho^q)` are purely imaginary, so the map is
/// unitary up to rounding.
fn circulant_flow(c1: C, t: f64, u: &mut [C; 3]) {
    let mut hat = [C::new(0.0, 0.0); 3];
    for q in 0..3 {
        let mut acc = C::new(0.0, 0.0);
        for (r, ur) in u.iter().enumerate() {
            acc += RHO[(q * r) % 3].conj() * ur;
        }
        let theta = 2.0 * t * (c1 * RHO[q]).im;
        let (s, c) = theta.sin_cos();
        hat[q] = acc * C::new(c, s) / 3.0;
    }
    for (r, ur) in u.iter_mut().enumerate() {
        let mut acc = C::new(0.0, 0.0);
        for (q, hq) in hat.iter().enumerate() {
            acc += RHO[(q * r) % 3] * hq;
        }
        *ur = acc;
    }
}

/// Sub-flow with mode `frozen` held fixed; `denom` is `|k|^2` for the
/// deterministic split and `2 |k|^2` for the noise Hamiltonians.
///
/// The three moving components and their conjugation pattern were read off
/// the frozen columns of the complex structure matrix:
///
/// frozen 0: u = (z1, z2, z3),        c1 = a
/// frozen 1: u = (z0, z2*, z3),       c1 = -a
/// frozen 2: u = (z0, z1, z3*),       c1 = a*
/// frozen 3: u = (z0, z1*, z2),       c1 = -a
///
/// with `a = (sqrt(3)/2) z_frozen / denom`.
fn mode_flow(frozen: usize, denom: f64, t: f64, x: &mut [f64]) {
    let z = unpack(x);
    let a = SQRT3_HALF * z[frozen] / denom;
    if t == 0.0 || (a.re == 0.0 && a.im == 0.0) {
        return;
    }
    let (slots, conj_mask, c1): ([usize; 3], [bool; 3], C) = match frozen {
        0 => ([1, 2, 3], [false, false, false], a),
        1 => ([0, 2, 3], [false, true, false], -a),
        2 => ([0, 1, 3], [false, false, true], a.conj()),
        3 => ([0, 1, 2], [false, true, false], -a),
        _ => unreachable!(),
    };
    let mut u = [C::new(0.0, 0.0); 3];
    for r in 0..3 {
        u[r] = if conj_mask[r] { z[slots[r]].conj() } else { z[slots[r]] };
    }
    circulant_flow(c1, t, &mut u);
    let mut out = z;
    for r in 0..3 {
        out[slots[r]] = if conj_mask[r] { u[r].conj() } else { u[r] };
    }
    pack(&out, x);
}

fn mode_part(mode: usize, denom: f64) -> QuadForm {
    let mut s = Mat::zeros(8);
    s.set(2 * mode, 2 * mode, 2.0 / denom);
    s.set(2 * mode + 1, 2 * mode + 1, 2.0 / denom);
    QuadForm::quadratic(s) // |z_mode|^2 / denom
}

// C2 machinery. Lattice indices live in {-1,0,1}^2 mod 3; the mode values
// at the negative indices are conjugates of the stored ones.

const CELL: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

#[inline]
fn reduce(p: (i32, i32)) -> (i32, i32) {
    (((p.0 + 1).rem_euclid(3)) - 1, ((p.1 + 1).rem_euclid(3)) - 1)
}

fn cell_index(p: (i32, i32)) -> Option<usize> {
    CELL.iter().position(|q| *q == p)
}

fn mode_value(full: &[C; 8], p: (i32, i32)) -> C {
    match cell_index(p) {
        Some(i) => full[i],
        None => C::new(0.0, 0.0),
    }
}

/// cos(2 pi k / 3) for integer k, evaluated exactly.
#[inline]
fn cos_third(k: i32) -> f64 {
    if k.rem_euclid(3) == 0 {
        1.0
    } else {
        -0.5
    }
}

fn c2_complex(x: &[f64]) -> C {
    let full = to_full_complex(x);
    let mut acc = C::new(0.0, 0.0);
    for &n in &CELL {
        for &m in &CELL {
            let q = reduce((-n.0 - m.0, -n.1 - m.1));
            if q == (0, 0) {
                continue;
            }
            let w = cos_third(n.0 * m.1 - n.1 * m.0);
            acc += w * mode_value(&full, n) * mode_value(&full, m) * mode_value(&full, q);
        }
    }
    acc
}

pub fn c2_value(x: &[f64]) -> f64 {
    c2_complex(x).re
}

fn c2_gradient(x: &[f64]) -> Vec<f64> {
    let full = to_full_complex(x);
    // Partials with respect to the 8 complex components.
    let mut gc = [C::new(0.0, 0.0); 8];
    for (ni, &n) in CELL.iter().enumerate() {
        for (mi, &m) in CELL.iter().enumerate() {
            let q = reduce((-n.0 - m.0, -n.1 - m.1));
            if q == (0, 0) {
                continue;
            }
            let w = cos_third(n.0 * m.1 - n.1 * m.0);
            let (vn, vm, vq) = (full[ni], full[mi], mode_value(&full, q));
            gc[ni] += w * vm * vq;
            gc[mi] += w * vn * vq;
            if let Some(qi) = cell_index(q) {
                gc[qi] += w * vn * vm;
            }
        }
    }
    // Chain rule to the real coordinates; the imaginary parts cancel
    // because C2 is real.
    let mut g = vec![0.0; 8];
    for i in 0..4 {
        let (a, b) = (gc[i], gc[i + 4]);
        g[2 * i] = (a + b).re;
        g[2 * i + 1] = -(a - b).im;
    }
    g
}

pub struct SineEuler {
    sigma: [f64; 4],
    structure: StructureMatrix,
    det: Vec<HamiltonianPart>,
    stoch: Vec<NoisePart>,
    casimirs: Vec<CasimirFn>,
}

impl SineEuler {
    pub fn new(sigma: [f64; 4]) -> Self {
        assert!(sigma.iter().all(|s| *s >= 0.0), "noise amplitudes must be >= 0");
        let det = (0..4)
            .map(|k| {
                let denom = MODE_NORM2[k];
                HamiltonianPart::new(
                    format!("H{}", MODE_LABELS[k]),
                    mode_part(k, denom),
                    Box::new(move |t, y: &mut [f64]| mode_flow(k, denom, t, y)),
                )
            })
            .collect();
        let stoch = (0..4)
            .map(|k| {
                let denom = 2.0 * MODE_NORM2[k];
                NoisePart {
                    part: HamiltonianPart::new(
                        format!("What{}", MODE_LABELS[k]),
                        mode_part(k, denom),
                        Box::new(move |t, y: &mut [f64]| mode_flow(k, denom, t, y)),
                    ),
                    sigma: sigma[k],
                    label: format!("W{}", MODE_LABELS[k]),
                }
            })
            .collect();
        let casimirs = vec![
            CasimirFn::from_quad(
                "C1",
                QuadForm::quadratic(Mat::from_fn(8, |i, j| if i == j { 2.0 } else { 0.0 })),
            ),
            CasimirFn::new("C2", Box::new(c2_value), Box::new(c2_gradient)),
        ];
        SineEuler {
            sigma,
            structure: StructureMatrix::Linear(tensor()),
            det,
            stoch,
            casimirs,
        }
    }

    pub fn sigma(&self) -> [f64; 4] {
        self.sigma
    }
}

impl Model for SineEuler {
    fn name(&self) -> &'static str {
        "se"
    }

    fn dim(&self) -> usize {
        8
    }

    fn structure(&self) -> &StructureMatrix {
        &self.structure
    }

    fn det_parts(&self) -> &[HamiltonianPart] {
        &self.det
    }

    fn stoch_parts(&self) -> &[NoisePart] {
        &self.stoch
    }

    fn casimirs(&self) -> &[CasimirFn] {
        &self.casimirs
    }

    fn default_initial(&self) -> Vec<f64> {
        vec![0.1, 0.3, 0.2, 0.3, 0.3, 0.2, 0.4, 0.1]
    }

    /// Four independent complex entries uniform on the unit disk.
    fn random_state(&self, seed: u64) -> Vec<f64> {
        let mut x = vec![0.0; 8];
        for k in 0..4 {
            let u = 0.5 * (uniform_symmetric(seed, k as u64, 11) + 1.0);
            let v = 0.5 * (uniform_symmetric(seed, k as u64, 12) + 1.0);
            let r = u.sqrt();
            let th = std::f64::consts::TAU * v;
            x[2 * k] = r * th.cos();
            x[2 * k + 1] = r * th.sin();
        }
        x
    }
}
