//! Closed-form results for linear oscillators, weakly nonlinear oscillators and slender beams.

use num_complex::Complex64;

/// Steady amplitude of `ẍ + c ẋ + ω₀² x = F cos ωt`.
pub fn linear_frf_amplitude(force: f64, omega0: f64, damping: f64, omega: f64) -> f64 {
    force / ((omega0 * omega0 - omega * omega).powi(2) + (damping * omega).powi(2)).sqrt()
}

/// First-order backbone `ω(a) = ω₀ + 3 h a² / (8 ω₀)` of `ẍ + ω₀² x + h x³ = 0`.
pub fn duffing_backbone(omega0: f64, h: f64, amplitude: f64) -> f64 {
    omega0 + 3.0 * h * amplitude * amplitude / (8.0 * omega0)
}

/// Floquet multipliers `e^{(−c/2 ± iω_d)T}` of `ẍ + c ẋ + ω₀² x = 0` over the period `T`.
pub fn damped_linear_multipliers(damping: f64, omega0: f64, period: f64) -> [Complex64; 2] {
    let wd = (omega0 * omega0 - 0.25 * damping * damping).sqrt();
    let base = Complex64::new(-0.5 * damping, wd) * period;
    [base.exp(), base.conj().exp()]
}

/// Free-decay envelope `e^{−c t / 2}`.
pub fn decay_envelope(damping: f64, t: f64) -> f64 {
    (-0.5 * damping * t).exp()
}

/// First root of the clamped-free frequency equation `1 + cos β cosh β = 0`.
pub const CLAMPED_FREE_BETA1: f64 = 1.875_104_068_711_961;

/// First root of the clamped-clamped frequency equation `cos β cosh β = 1`.
pub const CLAMPED_CLAMPED_BETA1: f64 = 4.730_040_744_862_704;

/// `(β²/L²) √(EI/(ρA))` for a slender prismatic beam.
pub fn euler_bernoulli_frequency(beta: f64, length: f64, young: f64, inertia: f64, density: f64, area: f64) -> f64 {
    beta * beta / (length * length) * (young * inertia / (density * area)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_equation_roots() {
        let b = CLAMPED_FREE_BETA1;
        assert!((1.0 + b.cos() * b.cosh()).abs() < 1e-12);
        let b = CLAMPED_CLAMPED_BETA1;
        assert!((b.cos() * b.cosh() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn static_limit() {
        assert!((linear_frf_amplitude(2.0, 2.0, 0.1, 0.0) - 0.5).abs() < 1e-15);
    }
}
