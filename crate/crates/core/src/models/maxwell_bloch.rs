//! Stochastic Maxwell-Bloch system (d = 3, two noises).
//!
//! Structure matrix, Hamiltonian split and Casimir:
//! ```text
//! B(y) = [ 0  -y3  y2 ]     H = y1^2/2 + y3 = H1 + H3
//!        [ y3   0   0 ]     Hhat1 = H1, Hhat3 = H3
//!        [-y2   0   0 ]     C = (y2^2 + y3^2)/2
//! ```
//! The H1 sub-flow rotates (y2, y3) by the angle y1 t; the H3 sub-flow is
//! the shear y1 <- y1 + t y2. The two Wiener processes are labelled W1 and
//! W3, stored as noise slots 0 and 1.

use crate::geometry::{CasimirFn, HamiltonianPart, LinearTensor, QuadForm, StructureMatrix};
use crate::linalg::Mat;

use super::{Model, NoisePart};

pub struct MaxwellBloch {
    sigma1: f64,
    sigma3: f64,
    structure: StructureMatrix,
    det: Vec<HamiltonianPart>,
    stoch: Vec<NoisePart>,
    casimirs: Vec<CasimirFn>,
}

fn rotation_part() -> QuadForm {
    let mut s = Mat::zeros(3);
    s.set(0, 0, 1.0);
    QuadForm::quadratic(s) // y1^2/2
}

fn shear_part() -> QuadForm {
    QuadForm::linear(vec![0.0, 0.0, 1.0]) // y3
}

fn rotation_flow(t: f64, y: &mut [f64]) {
    let theta = y[0] * t;
    let (s, c) = theta.sin_cos();
    let (y2, y3) = (y[1], y[2]);
    y[1] = c * y2 + s * y3;
    y[2] = -s * y2 + c * y3;
}

fn shear_flow(t: f64, y: &mut [f64]) {
    y[0] += t * y[1];
}

fn tensor() -> LinearTensor {
    let mut c = vec![Mat::zeros(3), Mat::zeros(3), Mat::zeros(3)];
    // B12 = -y3, B13 = y2
    c[2].set(0, 1, -1.0);
    c[2].set(1, 0, 1.0);
    c[1].set(0, 2, 1.0);
    c[1].set(2, 0, -1.0);
    LinearTensor::new(c)
}

impl MaxwellBloch {
    pub fn new(sigma1: f64, sigma3: f64) -> Self {
        assert!(sigma1 >= 0.0 && sigma3 >= 0.0, "noise amplitudes must be >= 0");
        let det = vec![
            HamiltonianPart::new("H1", rotation_part(), Box::new(rotation_flow)),
            HamiltonianPart::new("H3", shear_part(), Box::new(shear_flow)),
        ];
        let stoch = vec![
            NoisePart {
                part: HamiltonianPart::new("What1", rotation_part(), Box::new(rotation_flow)),
                sigma: sigma1,
                label: "W1".to_string(),
            },
            NoisePart {
                part: HamiltonianPart::new("What3", shear_part(), Box::new(shear_flow)),
                sigma: sigma3,
                label: "W3".to_string(),
            },
        ];
        let mut cs = Mat::zeros(3);
        cs.set(1, 1, 1.0);
        cs.set(2, 2, 1.0);
        let casimirs = vec![CasimirFn::from_quad("C", QuadForm::quadratic(cs))];
        MaxwellBloch {
            sigma1,
            sigma3,
            structure: StructureMatrix::Linear(tensor()),
            det,
            stoch,
            casimirs,
        }
    }

    pub fn sigmas(&self) -> (f64, f64) {
        (self.sigma1, self.sigma3)
    }
}

impl Model for MaxwellBloch {
    fn name(&self) -> &'static str {
        "mb"
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
        vec![1.0, 2.0, 3.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FlowPartId;

    #[test]
    fn hamiltonian_matches_closed_form() {
        let m = MaxwellBloch::new(1.0, 1.0);
        for s in 0..10 {
            let y = m.random_state(s);
            let h = 0.5 * y[0] * y[0] + y[2];
            assert!((m.hamiltonian(&y) - h).abs() <= 1e-14);
        }
    }

    #[test]
    fn shear_flow_example() {
        let m = MaxwellBloch::new(1.0, 1.0);
        let mut y = vec![1.0, 2.0, 3.0];
        m.exact_flow(FlowPartId::deterministic(1), 0.5, &mut y)
            .unwrap();
        assert_eq!(y, vec![2.0, 2.0, 3.0]);
    }

    #[test]
    fn rotation_flow_at_zero_is_identity() {
        let m = MaxwellBloch::new(1.0, 1.0);
        let y0 = vec![0.3, -1.2, 0.8];
        let mut y = y0.clone();
        m.exact_flow(FlowPartId::deterministic(0), 0.0, &mut y)
            .unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn rotation_flow_preserves_y2_y3_norm() {
        let m = MaxwellBloch::new(1.0, 1.0);
        for s in 0..20 {
            let mut y = m.random_state(s);
            let r0 = y[1] * y[1] + y[2] * y[2];
            m.exact_flow(FlowPartId::stochastic(0), 0.37 + s as f64, &mut y)
                .unwrap();
            let r1 = y[1] * y[1] + y[2] * y[2];
            assert!((r0 - r1).abs() <= 1e-14);
        }
    }

    #[test]
    fn drift_matches_displayed_vector_field() {
        let m = MaxwellBloch::new(1.0, 1.0);
        let y = [1.0, 2.0, 3.0];
        assert_eq!(m.drift_stratonovich(&y), vec![2.0, 3.0, -2.0]);
    }

    #[test]
    fn diffusion_fields() {
        let m = MaxwellBloch::new(1.0, 1.0);
        let y = [1.0, 2.0, 3.0];
        assert_eq!(m.diffusion(0, &y).unwrap(), vec![0.0, 3.0, -2.0]);
        let zero = MaxwellBloch::new(0.0, 0.0);
        assert_eq!(zero.diffusion(0, &y).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn ito_correction_value() {
        // sigma = (1, 0): correction = (0, -y1^2 y2 / 2, -y1^2 y3 / 2).
        let m = MaxwellBloch::new(1.0, 0.0);
        let y = [1.0, 2.0, 3.0];
        let ito = m.drift_ito(&y).unwrap();
        let strat = m.drift_stratonovich(&y);
        let corr: Vec<f64> = ito.iter().zip(&strat).map(|(a, b)| a - b).collect();
        assert!((corr[0] - 0.0).abs() < 1e-14);
        assert!((corr[1] + 1.0).abs() < 1e-14);
        assert!((corr[2] + 1.5).abs() < 1e-14);
    }

    #[test]
    fn casimir_value_at_initial_point() {
        let m = MaxwellBloch::new(1.0, 1.0);
        let inv = m.invariants(&[1.0, 2.0, 3.0]);
        assert_eq!(inv[1].0, "C");
        assert!((inv[1].1 - 6.5).abs() < 1e-14);
    }

    #[test]
    fn bracket_of_squared_norm_with_shear_part() {
        // {|y|^2, H3}(y) = 2 y1 y2 = 4 at y = (1,2,3).
        use crate::geometry::poisson_bracket;
        let m = MaxwellBloch::new(1.0, 1.0);
        let y = [1.0, 2.0, 3.0];
        let grad_norm2 = [2.0 * y[0], 2.0 * y[1], 2.0 * y[2]];
        let grad_h3 = m.det_parts()[1].gradient(&y);
        let v = poisson_bracket(&grad_norm2, &grad_h3, m.structure(), &y).unwrap();
        assert!((v - 4.0).abs() <= 1e-14);
        // The Casimir gradient annihilates every bracket.
        let grad_c = m.casimirs()[0].gradient(&y);
        let grad_h = m.hamiltonian_gradient(&y);
        let w = poisson_bracket(&grad_c, &grad_h, m.structure(), &y).unwrap();
        assert_eq!(w, 0.0);
    }
}
