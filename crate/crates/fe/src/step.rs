//! Nonlinear force vectors from imposed static displacements.

use dnf_core::SparseSymmetricMatrix;

use crate::FeError;

/// `G(φ_i, φ_j)` for `i <= j` and `H(φ_i, φ_i, φ_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepVectors {
    pub quadratic: Vec<((usize, usize), Vec<f64>)>,
    pub cubic: Vec<(usize, Vec<f64>)>,
}

impl StepVectors {
    pub fn quadratic(&self, i: usize, j: usize) -> Option<&[f64]> {
        let key = (i.min(j), i.max(j));
        self.quadratic.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_slice())
    }

    pub fn cubic(&self, i: usize) -> Option<&[f64]> {
        self.cubic.iter().find(|(k, _)| *k == i).map(|(_, v)| v.as_slice())
    }
}

fn scaled(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|x| c * x).collect()
}

/// Evaluates the full internal force at `±λφ` combinations and separates the polynomial orders.
///
/// With `stiffness`, the cubic vector uses `[F(λφ) − F(−λφ) − 2λKφ]/(2λ³)`; otherwise it uses
/// the odd parts at `λ` and `2λ`.
pub fn step_extract<F>(
    full_force: F,
    stiffness: Option<&SparseSymmetricMatrix>,
    modes: &[Vec<f64>],
    amplitude: f64,
) -> Result<StepVectors, FeError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(FeError::Step(format!("amplitude must be positive, got {amplitude}")));
    }
    let l = amplitude;
    let mut quadratic = Vec::new();
    let mut cubic = Vec::new();
    let mut diag: Vec<Vec<f64>> = Vec::new();
    for (i, phi) in modes.iter().enumerate() {
        let fp = full_force(&scaled(phi, l));
        let fm = full_force(&scaled(phi, -l));
        let g: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a + b) / (2.0 * l * l)).collect();
        let h: Vec<f64> = match stiffness {
            Some(k) => {
                let kphi = k.mul_vec(phi);
                (0..phi.len()).map(|d| (fp[d] - fm[d] - 2.0 * l * kphi[d]) / (2.0 * l * l * l)).collect()
            }
            None => {
                let f2p = full_force(&scaled(phi, 2.0 * l));
                let f2m = full_force(&scaled(phi, -2.0 * l));
                (0..phi.len())
                    .map(|d| {
                        let odd1 = 0.5 * (fp[d] - fm[d]);
                        let odd2 = 0.5 * (f2p[d] - f2m[d]);
                        (odd2 - 2.0 * odd1) / (6.0 * l * l * l)
                    })
                    .collect()
            }
        };
        diag.push(g.clone());
        quadratic.push(((i, i), g));
        cubic.push((i, h));
    }
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            let sum: Vec<f64> = modes[i].iter().zip(&modes[j]).map(|(a, b)| l * (a + b)).collect();
            let fp = full_force(&sum);
            let fm = full_force(&scaled(&sum, -1.0));
            let g: Vec<f64> = (0..sum.len())
                .map(|d| 0.5 * ((fp[d] + fm[d]) / (2.0 * l * l) - diag[i][d] - diag[j][d]))
                .collect();
            quadratic.push(((i, j), g));
        }
    }
    Ok(StepVectors { quadratic, cubic })
}
