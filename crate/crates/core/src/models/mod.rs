//! The concrete stochastic Lie-Poisson systems: Maxwell-Bloch, rigid body
//! and sine-Euler, each with its structure matrix, Hamiltonian split,
//! noise Hamiltonians, closed-form sub-flows and Casimirs.

use crate::error::{Error, Result};
use crate::geometry::{CasimirFn, HamiltonianPart, StructureMatrix};
use crate::noise::uniform_symmetric;

pub mod config;
mod maxwell_bloch;
mod rigid_body;
mod sine_euler;

pub use config::{from_json, from_json_file, preset, ModelSetup};
pub use maxwell_bloch::MaxwellBloch;
pub use rigid_body::RigidBody;
pub use sine_euler::SineEuler;

/// Which split Hamiltonian a sub-flow belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Deterministic,
    Stochastic,
}

/// Identifies one sub-flow of a model: deterministic indices run over the
/// Hamiltonian split `H_1..H_p`, stochastic ones over the noise
/// Hamiltonians (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowPartId {
    pub kind: FlowKind,
    pub index: usize,
}

impl FlowPartId {
    pub fn deterministic(index: usize) -> Self {
        FlowPartId {
            kind: FlowKind::Deterministic,
            index,
        }
    }

    pub fn stochastic(index: usize) -> Self {
        FlowPartId {
            kind: FlowKind::Stochastic,
            index,
        }
    }
}

/// A noise Hamiltonian with its amplitude and display label.
pub struct NoisePart {
    pub part: HamiltonianPart,
    pub sigma: f64,
    pub label: String,
}

/// A stochastic Poisson system with split Hamiltonians and exact
/// sub-flows. Models are immutable after construction and all evaluations
/// are pure, so they are safe to share across threads.
pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn structure(&self) -> &StructureMatrix;
    /// Deterministic split `H_1..H_p` in application order.
    fn det_parts(&self) -> &[HamiltonianPart];
    /// Noise Hamiltonians with amplitudes, in application order.
    fn stoch_parts(&self) -> &[NoisePart];
    fn casimirs(&self) -> &[CasimirFn];
    /// Initial value used by the bundled experiment presets.
    fn default_initial(&self) -> Vec<f64>;

    /// Seeded random state for property tests: uniform on [-1,1]^d
    /// (models may override, e.g. for complex-disk sampling).
    fn random_state(&self, seed: u64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| uniform_symmetric(seed, i as u64, 1))
            .collect()
    }

    fn num_noises(&self) -> usize {
        self.stoch_parts().len()
    }

    /// Full Hamiltonian, the sum of the deterministic split.
    fn hamiltonian(&self, y: &[f64]) -> f64 {
        self.det_parts().iter().map(|p| p.value(y)).sum()
    }

    fn hamiltonian_gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for p in self.det_parts() {
            for (gi, pi) in g.iter_mut().zip(p.gradient(y)) {
                *gi += pi;
            }
        }
        g
    }

    /// Applies the exact sub-flow for `part` over flow-time `t` in place.
    /// For stochastic parts the caller passes `t = sigma_k dW_k`.
    fn exact_flow(&self, part: FlowPartId, t: f64, y: &mut [f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::non_finite(format!("{} flow input", self.name())));
        }
        let flow = match part.kind {
            FlowKind::Deterministic => self
                .det_parts()
                .get(part.index)
                .map(|p| p as &HamiltonianPart),
            FlowKind::Stochastic => self.stoch_parts().get(part.index).map(|np| &np.part),
        }
        .ok_or_else(|| Error::domain(format!("flow part index {} out of range", part.index)))?;
        flow.apply_flow(t, y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!(
                "{} flow output (part {})",
                self.name(),
                flow.label
            )));
        }
        Ok(())
    }

    /// Stratonovich drift B(y) grad H(y).
    fn drift_stratonovich(&self, y: &[f64]) -> Vec<f64> {
        self.structure()
            .eval(y)
            .matvec(&self.hamiltonian_gradient(y))
    }

    /// k-th diffusion field sigma_k B(y) grad Hhat_k(y).
    fn diffusion(&self, k: usize, y: &[f64]) -> Result<Vec<f64>> {
        let np = self
            .stoch_parts()
            .get(k)
            .ok_or_else(|| Error::domain(format!("noise index {k} out of range")))?;
        let mut g = self.structure().eval(y).matvec(&np.part.gradient(y));
        for v in g.iter_mut() {
            *v *= np.sigma;
        }
        Ok(g)
    }

    /// Jacobian-vector product D g_k(y) v.
    ///
    /// All bundled models have a linear structure matrix and
    /// quadratic-or-linear noise Hamiltonians, so
    /// `D g_k(y) v = sigma_k (B(v) grad Hhat_k(y) + B(y) Hess(Hhat_k) v)`
    /// is exact. Central differences are used if a model has no tensor.
    fn diffusion_jacobian_apply(&self, k: usize, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let np = self
            .stoch_parts()
            .get(k)
            .ok_or_else(|| Error::domain(format!("noise index {k} out of range")))?;
        match self.structure().directional(v) {
            Some(bv) => {
                let mut out = bv.matvec(&np.part.gradient(y));
                let hv = np.part.hessian().matvec(v);
                for (o, w) in out.iter_mut().zip(self.structure().eval(y).matvec(&hv)) {
                    *o += w;
                }
                for o in out.iter_mut() {
                    *o *= np.sigma;
                }
                Ok(out)
            }
            None => {
                let fd = 1e-6;
                let scale = crate::linalg::norm2(v).max(1.0);
                let step = fd / scale;
                let mut yp = y.to_vec();
                let mut ym = y.to_vec();
                for i in 0..y.len() {
                    yp[i] += step * v[i];
                    ym[i] -= step * v[i];
                }
                let (gp, gm) = (self.diffusion(k, &yp)?, self.diffusion(k, &ym)?);
                Ok(gp
                    .iter()
                    .zip(&gm)
                    .map(|(a, b)| (a - b) / (2.0 * step))
                    .collect())
            }
        }
    }

    /// Ito-corrected drift for the Euler-Maruyama baseline:
    /// `B(y) grad H(y) + 1/2 sum_k D(g_k)(y) g_k(y)`.
    fn drift_ito(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.drift_stratonovich(y);
        for k in 0..self.num_noises() {
            let g = self.diffusion(k, y)?;
            let jg = self.diffusion_jacobian_apply(k, y, &g)?;
            for (o, w) in out.iter_mut().zip(jg) {
                *o += 0.5 * w;
            }
        }
        Ok(out)
    }

    /// Hamiltonian value followed by every Casimir value.
    fn invariants(&self, y: &[f64]) -> Vec<(String, f64)> {
        let mut out = vec![("H".to_string(), self.hamiltonian(y))];
        for c in self.casimirs() {
            out.push((c.name.clone(), c.value(y)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, y: &[f64], step: f64) -> Vec<f64> {
        (0..y.len())
            .map(|i| {
                let mut yp = y.to_vec();
                let mut ym = y.to_vec();
                yp[i] += step;
                ym[i] -= step;
                (f(&yp) - f(&ym)) / (2.0 * step)
            })
            .collect()
    }

    fn all_models() -> Vec<Box<dyn Model>> {
        vec![
            Box::new(MaxwellBloch::new(1.0, 1.0)),
            Box::new(RigidBody::new([2.0, 1.0, 2.0 / 3.0], [1.0, 2.0, 3.0], [1.0; 3]).unwrap()),
            Box::new(SineEuler::new([1.0; 4])),
        ]
    }

    #[test]
    fn part_gradients_match_finite_differences() {
        for model in all_models() {
            for s in 0..5 {
                let y = model.random_state(900 + s);
                for p in model.det_parts() {
                    let g = p.gradient(&y);
                    let fd = fd_gradient(&|v| p.value(v), &y, 1e-6);
                    for (a, b) in g.iter().zip(&fd) {
                        assert!((a - b).abs() < 1e-7, "{} {}: {a} vs {b}", model.name(), p.label);
                    }
                }
                for np in model.stoch_parts() {
                    let g = np.part.gradient(&y);
                    let fd = fd_gradient(&|v| np.part.value(v), &y, 1e-6);
                    for (a, b) in g.iter().zip(&fd) {
                        assert!((a - b).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn casimir_gradients_match_finite_differences() {
        for model in all_models() {
            for s in 0..5 {
                let y = model.random_state(300 + s);
                for c in model.casimirs() {
                    let g = c.gradient(&y);
                    let fd = fd_gradient(&|v| c.value(v), &y, 1e-6);
                    for (a, b) in g.iter().zip(&fd) {
                        assert!(
                            (a - b).abs() < 1e-6,
                            "{} {}: {a} vs {b}",
                            model.name(),
                            c.name
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn ito_correction_matches_fd_jacobian() {
        // Exact tensor-based Jacobian against the central-difference path.
        for model in all_models() {
            for s in 0..10 {
                let y = model.random_state(40 + s);
                for k in 0..model.num_noises() {
                    let g = model.diffusion(k, &y).unwrap();
                    let exact = model.diffusion_jacobian_apply(k, &y, &g).unwrap();
                    let step = 1e-6 / crate::linalg::norm2(&g).max(1.0);
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    for i in 0..y.len() {
                        yp[i] += step * g[i];
                        ym[i] -= step * g[i];
                    }
                    let gp = model.diffusion(k, &yp).unwrap();
                    let gm = model.diffusion(k, &ym).unwrap();
                    for i in 0..y.len() {
                        let fd = (gp[i] - gm[i]) / (2.0 * step);
                        assert!(
                            (exact[i] - fd).abs() < 1e-6,
                            "{} noise {k}: {} vs {fd}",
                            model.name(),
                            exact[i]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_noise_ito_drift_reduces_to_stratonovich() {
        let models: Vec<Box<dyn Model>> = vec![
            Box::new(MaxwellBloch::new(0.0, 0.0)),
            Box::new(RigidBody::new([2.0, 1.0, 2.0 / 3.0], [1.0, 2.0, 3.0], [0.0; 3]).unwrap()),
            Box::new(SineEuler::new([0.0; 4])),
        ];
        for model in models {
            let y = model.random_state(77);
            let a = model.drift_stratonovich(&y);
            let b = model.drift_ito(&y).unwrap();
            for (x, z) in a.iter().zip(&b) {
                assert_eq!(x, z);
            }
        }
    }

    #[test]
    fn diffusion_index_out_of_range_is_an_error() {
        let model = MaxwellBloch::new(1.0, 1.0);
        assert!(model.diffusion(2, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn flow_part_out_of_range_is_an_error() {
        let model = MaxwellBloch::new(1.0, 1.0);
        let mut y = [1.0, 2.0, 3.0];
        assert!(model
            .exact_flow(FlowPartId::deterministic(5), 0.1, &mut y)
            .is_err());
    }
}
