//! Shared test support: an adaptive Dormand-Prince 5(4) integrator used
//! as the independent oracle for the closed-form sub-flows.

/// Integrates dy/dt = f(y) from 0 to `t_end` (either sign) with adaptive
/// step control at the requested tolerances.
pub fn integrate_ode(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    y0: &[f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Vec<f64> {
    if t_end == 0.0 {
        return y0.to_vec();
    }
    let sign = t_end.signum();
    let total = t_end.abs();
    let g = |y: &[f64]| -> Vec<f64> { f(y).iter().map(|v| sign * v).collect() };
    let mut t = 0.0f64;
    let mut y = y0.to_vec();
    let mut h = (total / 100.0).clamp(1e-10, 1e-2);
    let mut k1 = g(&y);
    while t < total {
        h = h.min(total - t);
        let (y5, y4, k_last) = dp_step(&g, &y, &k1, h);
        let mut err = 0.0f64;
        for i in 0..y.len() {
            let scale = atol + rtol * y[i].abs().max(y5[i].abs());
            err = err.max(((y5[i] - y4[i]) / scale).abs());
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            k1 = k_last; // FSAL
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).max(1e-14);
    }
    y
}

#[allow(clippy::needless_range_loop)]
fn dp_step(
    g: &dyn Fn(&[f64]) -> Vec<f64>,
    y: &[f64],
    k1: &[f64],
    h: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let d = y.len();
    let mut k = vec![k1.to_vec()];
    for stage in 0..6 {
        let mut ys = y.to_vec();
        for j in 0..=stage {
            let a = A[stage][j];
            if a != 0.0 {
                for i in 0..d {
                    ys[i] += h * a * k[j][i];
                }
            }
        }
        k.push(g(&ys));
    }
    let mut y5 = y.to_vec();
    let mut y4 = y.to_vec();
    for (j, kj) in k.iter().enumerate() {
        for i in 0..d {
            y5[i] += h * B5[j] * kj[i];
            y4[i] += h * B4[j] * kj[i];
        }
    }
    let k_last = k.pop().expect("seven stages");
    (y5, y4, k_last)
}

#[allow(dead_code)]
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
