//! Adaptive Dormand–Prince 5(4) for scalar ODEs.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
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

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-11,
            abs: 1e-14,
        }
    }
}

/// Integrates `y' = f(x, y)` from `(x0, y0)` to `x1 >= x0`.
pub fn integrate(f: impl Fn(f64, f64) -> f64, x0: f64, y0: f64, x1: f64, tol: Tolerance) -> f64 {
    let span = x1 - x0;
    if span <= 0.0 {
        return y0;
    }
    let mut x = x0;
    let mut y = y0;
    let mut h = span / 100.0;
    let mut k = [0.0f64; 7];
    k[0] = f(x, y);
    let mut steps = 0usize;
    while x < x1 {
        steps += 1;
        if steps > 10_000_000 {
            break;
        }
        let last = x + h >= x1;
        if last {
            h = x1 - x;
        }
        for i in 1..7 {
            let mut yi = y;
            for j in 0..i {
                yi += h * A[i][j] * k[j];
            }
            k[i] = f(x + C[i] * h, yi);
        }
        let mut y5 = y;
        let mut y4 = y;
        for i in 0..7 {
            y5 += h * B5[i] * k[i];
            y4 += h * B4[i] * k[i];
        }
        let scale = tol.abs + tol.rel * y.abs().max(y5.abs());
        let err = ((y5 - y4) / scale).abs();
        if err <= 1.0 || h.abs() < 1e-15 * span {
            x = if last { x1 } else { x + h };
            y = y5;
            // FSAL: last stage is the derivative at the new point.
            k[0] = k[6];
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let y = integrate(|_, y| y, 0.0, 1.0, 3.0, Tolerance::default());
        assert!((y - 3f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn logistic() {
        // y' = 2y(3 - y), closed form 3/(1 + (3/y0 - 1)e^{-6t})
        let y0 = 0.01;
        let t: f64 = 1.3;
        let exact = 3.0 / (1.0 + (3.0 / y0 - 1.0) * (-6.0 * t).exp());
        let y = integrate(|_, y| 2.0 * y * (3.0 - y), 0.0, y0, t, Tolerance::default());
        assert!((y - exact).abs() < 1e-9);
    }
}
