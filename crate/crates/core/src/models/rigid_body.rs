//! Stochastic free rigid body (d = 3, three noises).
//!
//! B(y) is the hat map of y. The Hamiltonian splits into
//! `H_k = y_k^2 / (2 I_k)`; the noise Hamiltonians are
//! `Hhat_k = y_k^2 / (2 Ihat_k)` so that the stochastic axis-k sub-flow
//! rotates the other two components by the angle `y_k t / Ihat_k`. Each
//! sub-flow fixes `y_k` and rotates the complementary pair
//! `(y_{k+1}, y_{k+2})` (cyclic), which matches the subsystem
//! `dy/dt = B(y) grad H_k(y)`. The quadratic Casimir is `|y|^2`.

use crate::error::{Error, Result};
use crate::geometry::{CasimirFn, FlowFn, HamiltonianPart, LinearTensor, QuadForm, StructureMatrix};
use crate::linalg::Mat;

use super::{Model, NoisePart};

pub struct RigidBody {
    inertia: [f64; 3],
    noise_inertia: [f64; 3],
    sigma: [f64; 3],
    structure: StructureMatrix,
    det: Vec<HamiltonianPart>,
    stoch: Vec<NoisePart>,
    casimirs: Vec<CasimirFn>,
}

fn axis_part(axis: usize, moment: f64) -> QuadForm {
    let mut s = Mat::zeros(3);
    s.set(axis, axis, 1.0 / moment);
    QuadForm::quadratic(s) // y_axis^2 / (2 moment)
}

fn axis_flow(axis: usize, moment: f64) -> FlowFn {
    let (ia, ib) = ((axis + 1) % 3, (axis + 2) % 3);
    Box::new(move |t, y| {
        let theta = y[axis] * t / moment;
        let (s, c) = theta.sin_cos();
        let (a, b) = (y[ia], y[ib]);
        y[ia] = c * a + s * b;
        y[ib] = -s * a + c * b;
    })
}

fn hat_tensor() -> LinearTensor {
    let mut c = vec![Mat::zeros(3), Mat::zeros(3), Mat::zeros(3)];
    // B12 = -y3, B13 = y2, B23 = -y1
    c[2].set(0, 1, -1.0);
    c[2].set(1, 0, 1.0);
    c[1].set(0, 2, 1.0);
    c[1].set(2, 0, -1.0);
    c[0].set(1, 2, -1.0);
    c[0].set(2, 1, 1.0);
    LinearTensor::new(c)
}

fn validate_moments(label: &str, m: &[f64; 3]) -> Result<()> {
    if m.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::Config(format!("{label} moments must be positive")));
    }
    if m[0] == m[1] || m[1] == m[2] || m[0] == m[2] {
        return Err(Error::Config(format!(
            "{label} moments must be pairwise distinct"
        )));
    }
    Ok(())
}

impl RigidBody {
    pub fn new(inertia: [f64; 3], noise_inertia: [f64; 3], sigma: [f64; 3]) -> Result<Self> {
        validate_moments("principal", &inertia)?;
        validate_moments("noise", &noise_inertia)?;
        if sigma.iter().any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::Config("noise amplitudes must be >= 0".into()));
        }
        let det = (0..3)
            .map(|k| {
                HamiltonianPart::new(
                    format!("H{}", k + 1),
                    axis_part(k, inertia[k]),
                    axis_flow(k, inertia[k]),
                )
            })
            .collect();
        let stoch = (0..3)
            .map(|k| NoisePart {
                part: HamiltonianPart::new(
                    format!("What{}", k + 1),
                    axis_part(k, noise_inertia[k]),
                    axis_flow(k, noise_inertia[k]),
                ),
                sigma: sigma[k],
                label: format!("W{}", k + 1),
            })
            .collect();
        let casimirs = vec![CasimirFn::from_quad(
            "C",
            QuadForm::quadratic(Mat::from_fn(3, |i, j| if i == j { 2.0 } else { 0.0 })),
        )];
        Ok(RigidBody {
            inertia,
            noise_inertia,
            sigma,
            structure: StructureMatrix::Linear(hat_tensor()),
            det,
            stoch,
            casimirs,
        })
    }

    pub fn inertia(&self) -> [f64; 3] {
        self.inertia
    }

    pub fn noise_inertia(&self) -> [f64; 3] {
        self.noise_inertia
    }

    pub fn sigma(&self) -> [f64; 3] {
        self.sigma
    }
}

impl Model for RigidBody {
    fn name(&self) -> &'static str {
        "rb"
    }

    fn dim(&self) -> usize {
        3
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
        vec![1.1f64.cos(), 0.0, 1.1f64.sin()]
    }
}
