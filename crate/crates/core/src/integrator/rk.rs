//! Embedded Dormand-Prince 5(4) step for 3-state autonomous systems.
//! The trajectories traced here pass exponentially close to equilibria,
//! so the pair is run at tight tolerances with a plain step-doubling
//! controller capped by `h_max`.

#[derive(Debug, Clone, Copy)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        RkOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-6,
            h_max: 0.05,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub y: [f64; 3],
    /// RMS of component errors over their tolerances; accept iff <= 1.
    pub err_ratio: f64,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &[f64; 3], h: f64, terms: &[(f64, &[f64; 3])]) -> [f64; 3] {
    let mut out = *y;
    for i in 0..3 {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

pub fn dp54_step<F>(field: &F, y0: &[f64; 3], h: f64, opts: &RkOptions) -> StepOutcome
where
    F: Fn(&[f64; 3]) -> [f64; 3],
{
    let k1 = field(y0);
    let k2 = field(&axpy(y0, h, &[(A21, &k1)]));
    let k3 = field(&axpy(y0, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = field(&axpy(y0, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = field(&axpy(y0, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = field(&axpy(
        y0,
        h,
        &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y1 = axpy(
        y0,
        h,
        &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = field(&y1);
    let mut sum = 0.0;
    for i in 0..3 {
        let err = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        sum += (err / sc) * (err / sc);
    }
    StepOutcome {
        y: y1,
        err_ratio: (sum / 3.0).sqrt(),
    }
}

/// Step-size update factor from the last error ratio, clamped to [0.2, 5].
pub fn step_factor(err_ratio: f64) -> f64 {
    if err_ratio <= 0.0 {
        5.0
    } else {
        (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 5.0)
    }
}
